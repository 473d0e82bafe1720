from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from src.models.base_models import RecordModel
from src.models.config_models import DecodeMode


class RougeScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    precision: float = Field(..., ge=0.0, le=1.0)
    recall: float = Field(..., ge=0.0, le=1.0)
    f1: float = Field(..., ge=0.0, le=1.0)

    @classmethod
    def from_counts(cls, overlap: float, hyp_total: float, ref_total: float) -> RougeScore:
        """Scores from a match count; an empty side gives zeros."""
        if hyp_total == 0 or ref_total == 0 or overlap == 0:
            return cls(precision=0.0, recall=0.0, f1=0.0)
        precision = overlap / hyp_total
        recall = overlap / ref_total
        return cls(precision=precision, recall=recall, f1=2 * precision * recall / (precision + recall))


class EvalPair(BaseModel):
    """Generated and reference token lists; either may be empty."""

    model_config = ConfigDict(frozen=True)

    hypothesis: list[str]
    reference: list[str]


class ExampleScore(RecordModel):
    """Per-example line of an evaluation report."""

    input_id: int
    hypothesis: str
    reference: str
    exact_match: bool
    token_accuracy: float
    rouge_l: float
    mean_exit_layer: float


class EvaluationReport(BaseModel):
    """Corpus metrics plus per-example records."""

    mode: DecodeMode
    delta: float | None = None
    metrics: dict[str, float] = Field(default_factory=dict, description="metric name -> score")
    examples: list[ExampleScore] = Field(default_factory=list)

    def summary_lines(self) -> list[str]:
        """'name<TAB>score' lines in name order."""
        return [f"{name}\t{score:.6f}" for name, score in sorted(self.metrics.items())]


class SweepRecord(RecordModel):
    """Hard-exit behaviour at one threshold."""

    delta: float = Field(..., ge=0.0)
    mean_exit_layer: float
    exit_fractions: list[float] = Field(..., description="Share of tokens exiting at layer 1..L")
    token_accuracy: float
    sequence_accuracy: float
    mean_decoder_flops: float


class LayerAccuracyRecord(RecordModel):
    """Token accuracy of one off-ramp under a full-depth forward."""

    layer: int = Field(..., ge=1)
    token_accuracy: float
    loss: float
