"""Adaptive-moment optimizer over named parameters."""

from __future__ import annotations

import math
from collections.abc import Mapping

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core._exceptions import ShapeError
from src.core.numerics.tensor import ACCUM_DTYPE, Array, Tensor


class OptimizerState(BaseModel):
    """Per-parameter moments plus the hyperparameters of the update rule."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    lr: float = Field(default=2e-4, gt=0, description="Learning rate")
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    step: int = Field(default=0, ge=0, description="Number of updates applied")
    first_moment: dict[str, np.ndarray] = Field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = Field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, Array | None], state: OptimizerState) -> None:
    """Apply one bias-corrected Adam update in place.

    Parameters without a gradient are left untouched. Moments are kept in float64.
    """
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step

    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise ShapeError(f"adam_step[{name}]", param.shape, grad.shape)

        g = grad.astype(ACCUM_DTYPE)
        m = state.first_moment.setdefault(name, np.zeros(param.shape, dtype=ACCUM_DTYPE))
        v = state.second_moment.setdefault(name, np.zeros(param.shape, dtype=ACCUM_DTYPE))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g

        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        param.data = (param.data.astype(ACCUM_DTYPE) - update).astype(param.dtype)


class Adam:
    """Stateful wrapper that reads gradients off the parameters it owns."""

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float = 2e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        epsilon: float = 1e-8,
        clip_norm: float | None = None,
    ):
        self.params = dict(params)
        self.clip_norm = clip_norm
        self.state = OptimizerState(lr=lr, beta1=betas[0], beta2=betas[1], epsilon=epsilon)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.grad = None

    def grad_norm(self) -> float:
        """Global L2 norm of the current gradients."""
        total = sum(float(np.sum(p.grad.astype(ACCUM_DTYPE) ** 2)) for p in self.params.values() if p.grad is not None)
        return math.sqrt(total)

    def step(self) -> float:
        """Clip (when configured), update, and return the pre-clip gradient norm."""
        norm = self.grad_norm()
        scale = 1.0
        if self.clip_norm is not None and norm > self.clip_norm:
            scale = self.clip_norm / (norm + 1e-12)
        grads = {name: (p.grad * scale if p.grad is not None else None) for name, p in self.params.items()}
        adam_step(self.params, grads, self.state)
        return norm
