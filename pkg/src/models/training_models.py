from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.text.tokenizer import EOS_ID
from src.models.base_models import RecordModel


class TrainingExample(BaseModel):
    """A (corrupted or source input, original target) pair."""

    model_config = ConfigDict(frozen=True)

    src_ids: list[int] = Field(..., min_length=1)
    tgt_ids: list[int] = Field(..., min_length=1, description="EOS-terminated target")

    @field_validator("tgt_ids")
    @classmethod
    def _eos_terminated(cls, tgt_ids: list[int]) -> list[int]:
        if tgt_ids[-1] != EOS_ID:
            raise ValueError("target must end with EOS")
        return tgt_ids

    @property
    def length(self) -> int:
        return len(self.tgt_ids)


class TrainingBatch(BaseModel):
    """Sources plus PAD-padded targets at one fixed decode length."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    sources: list[list[int]]
    targets: np.ndarray = Field(..., description="[B, T] int64, PAD after EOS")

    @property
    def batch_size(self) -> int:
        return len(self.sources)

    @property
    def length(self) -> int:
        return int(self.targets.shape[1])

    @property
    def num_target_tokens(self) -> int:
        return int(np.count_nonzero(self.targets))


class StepRecord(RecordModel):
    """One line of a training report."""

    step: int = Field(..., ge=0)
    loss: float
    tokens_per_sec: float = Field(0.0, ge=0.0)
    mean_exit_layer: float = Field(..., description="Mean sampled exit layer, or L for full-depth objectives")
    grad_norm: float = Field(0.0, ge=0.0)
    layer_losses: list[float] | None = Field(None, description="Per-off-ramp losses of the soft objective")


class TrainingReport(BaseModel):
    """Loss curve of a training run."""

    objective: str
    records: list[StepRecord] = Field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.records)

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.records]

    def window_mean(self, start: int, size: int) -> float:
        """Mean loss over records[start:start+size]."""
        window = self.losses[start : start + size]
        if not window:
            raise ValueError(f"no records in window starting at {start}")
        return sum(window) / len(window)
