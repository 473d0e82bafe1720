from __future__ import annotations

from collections.abc import Iterator, Sequence

from src.core._exceptions import ConfigurationError
from src.core.decoding.early_exit import generate
from src.core.modeling.transformer import Model
from src.core.text.tokenizer import Vocabulary, decode, encode
from src.infra.logger import get_logger
from src.models.config_models import DecodeMode
from src.models.generation_models import GenerationRecord

logger = get_logger()


class GenerationService:
    """Text in, generation records out, one source at a time."""

    def __init__(self, model: Model, vocab: Vocabulary):
        if model.vocab_size != vocab.size:
            raise ConfigurationError(f"Model has V={model.vocab_size} but the vocabulary has {vocab.size} entries")
        self.model = model.eval()
        self.vocab = vocab

    def generate_texts(
        self,
        sources: Sequence[str],
        mode: DecodeMode = DecodeMode.HARD,
        delta: float = 0.5,
        length: int | None = None,
    ) -> Iterator[GenerationRecord]:
        """Lazily decode each source; inputs with no tokens are skipped but keep their input_id slot."""
        length = length or self.model.config.max_target_len
        for input_id, text in enumerate(sources):
            ids = encode(text, self.vocab)
            if not ids:
                logger.warning(f"Input {input_id} is empty after tokenization, skipped")
                continue
            result = generate(self.model, self.model.encode_one(ids), DecodeMode(mode), length, delta=delta)
            yield GenerationRecord.from_result(input_id, decode(result.token_ids, self.vocab), result)
