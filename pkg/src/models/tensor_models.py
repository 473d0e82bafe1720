from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core._exceptions import ExitAssignmentError
from src.core.numerics.tensor import Array, Tensor


class TensorModel(BaseModel):
    """Container for tensors produced by a forward pass."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


class EncoderStates(TensorModel):
    """Final encoder hidden states S for a batch of sources."""

    states: Tensor = Field(..., description="[B, n, d]")
    source_mask: np.ndarray = Field(..., description="[B, n] bool, False on padding")
    truncated: bool = Field(False, description="Some source was cut to max_source_len")

    @property
    def batch_size(self) -> int:
        return self.states.shape[0]

    @property
    def source_length(self) -> int:
        return self.states.shape[1]

    def row(self, index: int) -> EncoderStates:
        """Single-source view of one batch row, padding removed."""
        length = int(self.source_mask[index].sum())
        return EncoderStates(
            states=self.states[index : index + 1, :length],
            source_mask=self.source_mask[index : index + 1, :length],
            truncated=self.truncated,
        )


class ExitAssignment(BaseModel):
    """Exit layer l_t for every target position, 1-based."""

    model_config = ConfigDict(frozen=True)

    exits: list[int] = Field(..., min_length=1)

    @field_validator("exits")
    @classmethod
    def _positive(cls, exits: list[int]) -> list[int]:
        if any(layer < 1 for layer in exits):
            raise ValueError(f"exit layers are 1-based, got {exits}")
        return exits

    @classmethod
    def uniform(cls, length: int, layer: int) -> ExitAssignment:
        return cls(exits=[layer] * length)

    @classmethod
    def from_array(cls, exits: Sequence[int] | Array) -> ExitAssignment:
        return cls(exits=[int(x) for x in exits])

    @property
    def length(self) -> int:
        return len(self.exits)

    def as_array(self) -> Array:
        return np.asarray(self.exits, dtype=np.int64)

    def check(self, layers: int, length: int) -> None:
        """Raise unless every entry lies in [1, layers] and there is one per position."""
        if self.length != length:
            raise ExitAssignmentError(f"expected {length} exit layers, got {self.length}", self.exits)
        if max(self.exits) > layers:
            raise ExitAssignmentError(f"exit layers must lie in [1, {layers}], got {self.exits}", self.exits)


class DecoderTrace(TensorModel):
    """Every decoder layer's hidden states plus the logits read at each position's exit layer."""

    hidden: list[Tensor] = Field(..., description="L tensors of shape [1, T, d]; index l-1 holds layer l")
    exit_logits: Tensor = Field(..., description="[T, V] logits from off-ramp l_t at position t")
    exits: ExitAssignment

    @property
    def hidden_states(self) -> Array:
        """[L, T, d] array of h^l_t."""
        return np.stack([h.data[0] for h in self.hidden])


class CrossMemory(TensorModel):
    """Per-layer cross-attention keys and values, computed once per decode."""

    keys: list[Tensor] = Field(..., description="L tensors of shape [B, heads, n, head_dim]")
    values: list[Tensor]
    bias: np.ndarray = Field(..., description="[B, 1, 1, n] additive mask over source padding")


class SoftDecodeOutput(TensorModel):
    """Logits from every off-ramp under the prediction-feedback forward."""

    layer_logits: list[Tensor] = Field(..., description="L tensors of shape [B, T, V]")
    feedback_tokens: list[np.ndarray] = Field(default_factory=list, description="argmax fed into layers 2..L")

    @property
    def final_logits(self) -> Tensor:
        return self.layer_logits[-1]
