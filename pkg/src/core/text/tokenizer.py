"""Word-level vocabulary with the reserved ids the decoder relies on."""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from src.core._exceptions import ContractError, EmptyCorpusError, TokenIndexError
from src.infra.logger import get_logger

logger = get_logger()

PAD_ID = 0
MASK_ID = 1
EOS_ID = 2
BOS_ID = 3
UNK_ID = 4
RESERVED_TOKENS = ("[PAD]", "[MASK]", "[EOS]", "[BOS]", "[UNK]")
FULL_STOP = "."

# Words, or single punctuation marks; brackets never survive so "[mask]" cannot collide with a reserved token.
_TOKEN_PATTERN = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word and punctuation tokens."""
    return _TOKEN_PATTERN.findall(text.lower())


def normalize(text: str) -> str:
    """Canonical text form that survives an encode/decode round trip."""
    return " ".join(tokenize(text))


class Vocabulary(BaseModel):
    """Bijective token/id mapping; ids 0-4 are reserved."""

    model_config = ConfigDict(frozen=True)

    tokens: list[str] = Field(..., description="id -> token, reserved tokens first")
    _index: dict[str, int] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_reserved(self) -> Vocabulary:
        if tuple(self.tokens[: len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise ValueError(f"Vocabulary must start with the reserved block {RESERVED_TOKENS}")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("Vocabulary tokens must be unique")
        return self

    def model_post_init(self, __context: Any) -> None:
        self._index = {token: i for i, token in enumerate(self.tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def token_id(self, token: str) -> int:
        """Id of token, or UNK."""
        return self._index.get(token, UNK_ID)

    @property
    def full_stop_id(self) -> int | None:
        """Id of the sentence-ending token, if the corpus had one."""
        return self._index.get(FULL_STOP)

    def save(self, path: Path) -> None:
        """Write "rank<TAB>token" lines, reserved block first."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for rank, token in enumerate(self.tokens):
                f.write(f"{rank}\t{token}\n")
        logger.info(f"Saved vocabulary of {self.size} tokens to {path}")

    @classmethod
    def load(cls, path: Path) -> Vocabulary:
        """Read a file written by save()."""
        tokens: list[str] = []
        with open(path, encoding="utf-8") as f:
            for line_no, line in enumerate(f):
                line = line.rstrip("\n")
                if not line:
                    continue
                rank, _, token = line.partition("\t")
                expected = f"{path}:{line_no + 1}: expected rank {len(tokens)}<TAB>token, got {line!r}"
                try:
                    ranked = int(rank)
                except ValueError as e:
                    raise ContractError(expected) from e
                if ranked != len(tokens) or not token:
                    raise ContractError(expected)
                tokens.append(token)
        return cls(tokens=tokens)


def build_vocab(corpus: Iterable[str], max_size: int) -> Vocabulary:
    """Rank corpus tokens by frequency (ties lexicographic) and keep max_size entries including reserved ids."""
    if max_size <= len(RESERVED_TOKENS):
        raise ContractError(f"max_size must exceed {len(RESERVED_TOKENS)}, got {max_size}")

    counts: Counter[str] = Counter()
    for line in corpus:
        counts.update(tokenize(line))
    if not counts:
        raise EmptyCorpusError("Cannot build a vocabulary from an empty corpus")

    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    kept = [token for token, _ in ranked[: max_size - len(RESERVED_TOKENS)]]
    logger.debug(f"Vocabulary: {len(counts)} distinct tokens, kept {len(kept)}")
    return Vocabulary(tokens=[*RESERVED_TOKENS, *kept])


def encode(text: str, vocab: Vocabulary) -> list[int]:
    """Token ids for text; out-of-vocabulary words become UNK."""
    return [vocab.token_id(token) for token in tokenize(text)]


def decode(ids: Sequence[int], vocab: Vocabulary) -> str:
    """Space-joined tokens, skipping PAD and BOS."""
    words: list[str] = []
    for token_id in ids:
        token_id = int(token_id)
        if token_id < 0 or token_id >= vocab.size:
            raise TokenIndexError(token_id, vocab.size)
        if token_id in (PAD_ID, BOS_ID):
            continue
        words.append(vocab.tokens[token_id])
    return " ".join(words)
