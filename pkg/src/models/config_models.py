from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, ClassVar

from pydantic import DirectoryPath, Field, FilePath, field_validator, model_validator

from src.models.base_models import ConfigModel


class DecodeMode(str, Enum):
    """How the decoder produces its output."""

    AR = "ar"  # left-to-right reference loop, benchmark only
    NAR = "nar"  # one full-depth parallel pass
    HARD = "hard"  # entropy-threshold early exit
    SOFT = "soft"  # per-layer prediction feedback


class FinetuneMode(str, Enum):
    HARD = "hard"
    SOFT = "soft"


class ModelConfig(ConfigModel):
    """Architecture hyperparameters shared by the encoder and the NAR decoder."""

    PRESETS: ClassVar[dict[str, dict[str, Any]]] = {
        "base": {"layers": 6, "d_model": 768, "heads": 12, "d_ff": 3072, "dropout": 0.1},
        "bench": {"layers": 6, "d_model": 256, "heads": 4, "d_ff": 1024, "dropout": 0.0},
        "desk": {"layers": 4, "d_model": 64, "heads": 4, "d_ff": 256, "dropout": 0.0},
    }

    layers: int = Field(4, ge=1, description="Encoder and decoder layer count L")
    d_model: int = Field(64, ge=1, description="Hidden width d")
    heads: int = Field(4, ge=1, description="Attention heads")
    d_ff: int = Field(256, ge=1, description="Feed-forward width")
    max_target_len: int = Field(32, ge=1, description="Maximum decoder length T_max")
    max_source_len: int = Field(64, ge=1, description="Longer sources are truncated")
    vocab_size: int | None = Field(None, ge=6, description="V; filled from the vocabulary when omitted")
    share_off_ramps: bool = Field(True, description="One off-ramp classifier for every decoder layer")
    dropout: float = Field(0.0, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_heads(self) -> ModelConfig:
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        return self

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    @classmethod
    def preset(cls, name: str, **overrides: Any) -> ModelConfig:
        """Named architecture with optional field overrides."""
        if name not in cls.PRESETS:
            raise ValueError(f"Unknown preset {name!r}; choose one of {sorted(cls.PRESETS)}")
        return cls(**{**cls.PRESETS[name], **overrides})

    def with_vocab(self, vocab_size: int) -> ModelConfig:
        """Copy with V filled in; an explicit, different V is an error."""
        if self.vocab_size is not None and self.vocab_size != vocab_size:
            raise ValueError(f"Config vocab_size={self.vocab_size} disagrees with vocabulary size {vocab_size}")
        return self.model_copy(update={"vocab_size": vocab_size})


class CorruptionConfig(ConfigModel):
    """Denoising corruptions applied to pre-training documents."""

    span_fraction: float = Field(0.15, gt=0.0, lt=1.0, description="Share of tokens covered by masked spans")
    poisson_lambda: float = Field(3.0, gt=0.0, description="Mean span length before clipping")
    shuffle_sentences: bool = Field(True)
    rng_seed: int = Field(0, description="Base of the per-document random streams")


class HardExitConfig(ConfigModel):
    delta: float = Field(0.5, ge=0.0, description="Entropy threshold in nats")
    length: int = Field(..., ge=1, description="Requested decode length T")


class SoftExitConfig(ConfigModel):
    length: int = Field(..., ge=1, description="Requested decode length T")


class TrainingConfig(ConfigModel):
    steps: int = Field(1000, ge=0)
    lr: float = Field(2e-4, gt=0.0)
    batch_size: int = Field(8, ge=1)
    samples_per_sequence: int = Field(10, ge=1, description="Exit assignments k sampled per target sequence")
    clip_norm: float | None = Field(1.0, gt=0.0)
    log_every: int = Field(50, ge=1)
    exact_copy_through: bool = Field(False, description="Run one copy-through forward per sampled assignment")
    init_checkpoint: FilePath | None = Field(None, description="Fine-tuning starts here; from scratch when absent")
    decode_length: int | None = Field(None, ge=1, description="Fixed training decode length; T_max when absent")


class DecodingConfig(ConfigModel):
    mode: DecodeMode = DecodeMode.HARD
    delta: float = Field(0.5, ge=0.0)
    length: int | None = Field(None, ge=1, description="Decode length T; T_max when absent")


class PathsConfig(ConfigModel):
    vocab: FilePath | None = None
    corpus: FilePath | None = Field(None, description="One document per line")
    train_data: DirectoryPath | None = Field(None, description="Directory holding src.txt and tgt.txt")
    eval_data: DirectoryPath | None = None
    checkpoint: Path | None = Field(None, description="Read by generate/evaluate, written by training")
    output_dir: Path = Field(default_factory=lambda: Path("runs"))

    @field_validator("train_data", "eval_data")
    @classmethod
    def _check_parallel(cls, value: Path | None) -> Path | None:
        if value is not None:
            for name in ("src.txt", "tgt.txt"):
                if not (value / name).is_file():
                    raise ValueError(f"{value} has no {name}")
        return value

    @model_validator(mode="after")
    def _create_output_dir(self) -> PathsConfig:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self


class RunConfig(ConfigModel):
    """Everything one CLI run needs; loaded from a YAML file."""

    seed: int = Field(..., description="Run seed; also seeds corruption unless rng_seed is set")
    model: ModelConfig = Field(default_factory=ModelConfig)
    corruption: CorruptionConfig = Field(default_factory=CorruptionConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    decoding: DecodingConfig = Field(default_factory=DecodingConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    @model_validator(mode="before")
    @classmethod
    def _seed_corruption(cls, data: Any) -> Any:
        """Corruption streams follow the run seed when the file leaves ``rng_seed`` out."""
        if not isinstance(data, dict) or "seed" not in data:
            return data
        corruption = data.get("corruption")
        if corruption is None:
            return {**data, "corruption": {"rng_seed": data["seed"]}}
        if isinstance(corruption, dict) and corruption.get("rng_seed") is None:
            return {**data, "corruption": {**corruption, "rng_seed": data["seed"]}}
        return data
