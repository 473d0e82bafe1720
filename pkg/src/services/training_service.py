from __future__ import annotations

from pathlib import Path

from src.core._exceptions import ConfigurationError
from src.core.content.corpus import load_corpus, load_parallel, make_examples, prepare_documents
from src.core.modeling.transformer import Model
from src.core.numerics.optim import Adam
from src.core.text.tokenizer import Vocabulary
from src.core.training.finetune import finetune_loop
from src.core.training.loop import pretrain_loop
from src.core.training.lplm import PermutationSampler
from src.infra.checkpoint import load_checkpoint, save_checkpoint
from src.infra.decorators import generic_error_handler
from src.infra.logger import get_logger
from src.infra.records import write_records
from src.models.config_models import FinetuneMode, RunConfig
from src.models.training_models import TrainingReport

logger = get_logger()


class TrainingService:
    """Builds the model for a run config and drives pre-training or fine-tuning."""

    def __init__(self, config: RunConfig):
        self.config = config

    @property
    def checkpoint_path(self) -> Path:
        return self.config.paths.checkpoint or self.config.paths.output_dir / "model.ckpt"

    def load_vocab(self) -> Vocabulary:
        if self.config.paths.vocab is None:
            raise ConfigurationError("paths.vocab is required; run build-vocab first")
        return Vocabulary.load(self.config.paths.vocab)

    def build_model(self, vocab: Vocabulary, use_init: bool = False) -> Model:
        """Fresh model sized to the vocabulary, or the init checkpoint when asked for one."""
        init = self.config.training.init_checkpoint
        if use_init and init is not None:
            model = load_checkpoint(init)
            if model.vocab_size != vocab.size:
                raise ConfigurationError(
                    f"Checkpoint {init} has V={model.vocab_size} but the vocabulary has {vocab.size} entries"
                )
            logger.info(f"Starting from checkpoint {init}")
            return model
        try:
            model_config = self.config.model.with_vocab(vocab.size)
        except ValueError as e:
            raise ConfigurationError(str(e)) from e
        model = Model(model_config, seed=self.config.seed)
        logger.info(f"Initialized model with {model.num_parameters()} parameters (seed={self.config.seed})")
        return model

    def decode_length(self, model: Model) -> int:
        return self.config.training.decode_length or model.config.max_target_len

    def optimizer(self, model: Model) -> Adam:
        training = self.config.training
        return Adam(model.parameters(), lr=training.lr, clip_norm=training.clip_norm)

    def sampler(self, model: Model) -> PermutationSampler:
        return PermutationSampler(model.layers, self.config.training.samples_per_sequence, seed=self.config.seed)

    def _finish(self, model: Model, report: TrainingReport) -> TrainingReport:
        save_checkpoint(model, self.checkpoint_path)
        report_path = self.config.paths.output_dir / f"{report.objective}.jsonl"
        write_records(report_path, report.records)
        logger.info(f"{report.objective}: {report.steps} steps, report written to {report_path}")
        return report

    @generic_error_handler
    def pretrain(self) -> TrainingReport:
        """LPLM pre-training on the configured corpus; writes the checkpoint and the step report."""
        if self.config.paths.corpus is None:
            raise ConfigurationError("paths.corpus is required for pre-training")
        vocab = self.load_vocab()
        model = self.build_model(vocab)
        length = self.decode_length(model)
        # Room for the appended EOS
        documents = prepare_documents(load_corpus(self.config.paths.corpus), vocab, length - 1)
        training = self.config.training
        report = pretrain_loop(
            model,
            documents,
            vocab,
            self.config.corruption,
            self.sampler(model),
            steps=training.steps,
            optimizer=self.optimizer(model),
            batch_size=training.batch_size,
            decode_length=length,
            seed=self.config.seed,
            exact_copy_through=training.exact_copy_through,
            log_every=training.log_every,
        )
        return self._finish(model, report)

    @generic_error_handler
    def finetune(self, mode: FinetuneMode) -> TrainingReport:
        """Fine-tune on the parallel training data for one exit mode."""
        if self.config.paths.train_data is None:
            raise ConfigurationError("paths.train_data is required for fine-tuning")
        vocab = self.load_vocab()
        model = self.build_model(vocab, use_init=True)
        length = self.decode_length(model)
        dataset = make_examples(load_parallel(self.config.paths.train_data), vocab, length)
        training = self.config.training
        report = finetune_loop(
            model,
            dataset,
            FinetuneMode(mode),
            steps=training.steps,
            optimizer=self.optimizer(model),
            batch_size=training.batch_size,
            decode_length=length,
            seed=self.config.seed,
            sampler=self.sampler(model),
            exact_copy_through=training.exact_copy_through,
            log_every=training.log_every,
        )
        return self._finish(model, report)
