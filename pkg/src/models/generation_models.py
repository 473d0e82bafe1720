from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, computed_field, model_validator

from src.core.text.tokenizer import EOS_ID
from src.models.base_models import RecordModel
from src.models.config_models import DecodeMode


def _prefix_before_eos(ids: list[int]) -> list[int]:
    return ids[: ids.index(EOS_ID)] if EOS_ID in ids else list(ids)


class GenerationResult(BaseModel):
    """One decoded sequence with its per-position exit behaviour and cost."""

    mode: DecodeMode
    token_ids: list[int] = Field(..., description="raw_ids cut before the first EOS")
    raw_ids: list[int] = Field(..., description="All T predicted ids")
    exit_layers: list[int] = Field(..., description="Layer whose off-ramp produced each raw id")
    entropies: list[float] = Field(default_factory=list, description="Entropy (nats) at each exit")
    decoder_flops: int = Field(0, ge=0, description="Every counted FLOP outside the encoder")
    layer_flops: int = Field(0, ge=0, description="Decoder self-attention plus feed-forward FLOPs")
    flops_by_category: dict[str, int] = Field(default_factory=dict)
    latency_ns: int = Field(0, ge=0)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def mean_exit_layer(self) -> float:
        return sum(self.exit_layers) / len(self.exit_layers) if self.exit_layers else 0.0

    @model_validator(mode="after")
    def _check_consistency(self) -> GenerationResult:
        if self.token_ids != _prefix_before_eos(self.raw_ids):
            raise ValueError("token_ids must be the prefix of raw_ids before the first EOS")
        if len(self.exit_layers) != len(self.raw_ids):
            raise ValueError("one exit layer per raw id is required")
        if self.entropies and len(self.entropies) != len(self.raw_ids):
            raise ValueError("one entropy per raw id is required")
        return self

    @property
    def length(self) -> int:
        return len(self.raw_ids)


class ArDecodeResult(BaseModel):
    """Output of the left-to-right reference loop."""

    raw_ids: list[int]
    decoder_passes: int = Field(..., ge=0, description="Full decoder stack executions")

    @property
    def token_ids(self) -> list[int]:
        return _prefix_before_eos(self.raw_ids)


class GenerationRecord(RecordModel):
    """One line of a generation output file."""

    input_id: int
    text: str
    mode: DecodeMode
    mean_exit_layer: float
    decoder_flops: int
    latency_ns: int
    exit_layers: list[int]

    @classmethod
    def from_result(cls, input_id: int, text: str, result: GenerationResult) -> GenerationRecord:
        return cls(
            input_id=input_id,
            text=text,
            mode=result.mode,
            mean_exit_layer=result.mean_exit_layer,
            decoder_flops=result.decoder_flops,
            latency_ns=result.latency_ns,
            exit_layers=result.exit_layers,
        )


class BenchmarkRecord(RecordModel):
    """Latency and cost of one decode mode at one length, measured at batch size 1."""

    mode: DecodeMode
    length: int = Field(..., ge=1, description="Decode length T")
    repetitions: int = Field(..., ge=30, description="Timed decodes behind the latency figures")
    batch_size: Literal[1] = 1
    median_ns: int = Field(..., ge=0)
    p95_ns: int = Field(..., ge=0)
    decoder_flops: int = Field(..., ge=0)
    layer_flops: int = Field(..., ge=0, description="Decoder self-attention plus feed-forward FLOPs")
    mean_exit_layer: float
    speedup: float | None = Field(None, description="AR median latency over this mode's; absent without an AR run")
