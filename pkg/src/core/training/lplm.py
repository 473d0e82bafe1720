"""Layer-permutation objective: every target token is scored at a randomly assigned exit layer."""

from __future__ import annotations

from collections.abc import Sequence
from typing import Protocol

import numpy as np

from src.core._exceptions import ContractError, ExitAssignmentError
from src.core.content.corpus import collate
from src.core.modeling.transformer import Model
from src.core.numerics.tensor import Array, Tensor, cross_entropy, log_softmax, masked_nll, stack, take
from src.core.text.tokenizer import PAD_ID
from src.models.tensor_models import ExitAssignment
from src.models.training_models import TrainingBatch, TrainingExample


def sample_exit_assignment(length: int, layers: int, rng: np.random.Generator) -> ExitAssignment:
    """Draw each l_t independently and uniformly from 1..layers."""
    if length < 1 or layers < 1:
        raise ContractError(f"need length >= 1 and layers >= 1, got {length}, {layers}")
    return ExitAssignment.from_array(rng.integers(1, layers + 1, size=length))


class AssignmentSampler(Protocol):
    samples_per_sequence: int

    def sample_batch(self, batch_size: int, length: int) -> Array: ...


class PermutationSampler:
    """k independent uniform exit assignments per target sequence."""

    def __init__(self, layers: int, samples_per_sequence: int = 10, seed: int = 0):
        if samples_per_sequence < 1:
            raise ContractError(f"samples_per_sequence must be at least 1, got {samples_per_sequence}")
        self.layers = layers
        self.samples_per_sequence = samples_per_sequence
        self.rng = np.random.default_rng([seed, 4])

    def sample_batch(self, batch_size: int, length: int) -> Array:
        """[k, B, T] exit layers."""
        return self.rng.integers(1, self.layers + 1, size=(self.samples_per_sequence, batch_size, length))


class FixedAssignmentSampler:
    """Always returns the same assignments; every sequence in a batch shares them."""

    def __init__(self, assignments: Sequence[ExitAssignment]):
        if not assignments:
            raise ContractError("FixedAssignmentSampler needs at least one assignment")
        self.assignments = list(assignments)
        self.samples_per_sequence = len(self.assignments)

    def sample_batch(self, batch_size: int, length: int) -> Array:
        for assignment in self.assignments:
            if assignment.length != length:
                raise ExitAssignmentError(f"fixed assignment has {assignment.length} entries, need {length}")
        exits = np.stack([a.as_array() for a in self.assignments])
        return np.broadcast_to(exits[:, None, :], (len(self.assignments), batch_size, length)).copy()


def _as_batch(model: Model, data: TrainingExample | TrainingBatch, decode_length: int | None) -> TrainingBatch:
    if isinstance(data, TrainingBatch):
        return data
    return collate([data], decode_length or model.config.max_target_len)


def _target_log_probs(log_probs: Tensor, targets: Array) -> Tensor:
    """log p(target) at every (b, t) of a [B, T, V] tensor."""
    batch, length = targets.shape
    b = np.arange(batch)[:, None]
    t = np.arange(length)[None, :]
    return take(log_probs, (b, t, targets))


def nar_cross_entropy(model: Model, data: TrainingExample | TrainingBatch, decode_length: int | None = None) -> Tensor:
    """Standard NAR loss: last-layer off-ramp at every position, PAD ignored."""
    batch = _as_batch(model, data, decode_length)
    hidden = model.decode_full(model.encode(batch.sources), batch.length)
    logits = model.off_ramp_logits(hidden[-1], model.layers)
    return cross_entropy(logits.reshape(-1, model.vocab_size), batch.targets.reshape(-1), ignore_index=PAD_ID)


def lplm_loss(
    model: Model,
    data: TrainingExample | TrainingBatch,
    sampler: AssignmentSampler,
    decode_length: int | None = None,
    exact_copy_through: bool = False,
    assignments: Array | None = None,
) -> Tensor:
    """Mean over k sampled exit assignments of the per-token NLL read at each token's exit layer.

    The default computes one full-depth forward and gathers each token's log-probability
    from its assigned layer. ``exact_copy_through`` instead runs one copy-through forward
    per sequence and assignment. Pass ``assignments`` ([k, B, T]) to skip sampling.
    """
    batch = _as_batch(model, data, decode_length)
    exits = sampler.sample_batch(batch.batch_size, batch.length) if assignments is None else assignments
    k = exits.shape[0]
    if exits.shape[1:] != batch.targets.shape or exits.min() < 1 or exits.max() > model.layers:
        raise ExitAssignmentError(f"assignments of shape {exits.shape} do not fit {model.layers} layers")
    mask = np.broadcast_to(batch.targets != PAD_ID, exits.shape)
    encoded = model.encode(batch.sources)

    if exact_copy_through:
        rows = []
        positions = np.arange(batch.length)
        for i in range(k):
            for b in range(batch.batch_size):
                trace = model.decode_with_exits(encoded.row(b), batch.length, ExitAssignment.from_array(exits[i, b]))
                rows.append(take(log_softmax(trace.exit_logits, axis=-1), (positions, batch.targets[b])))
        picked = stack(rows).reshape(k, batch.batch_size, batch.length)
        return masked_nll(picked, mask)

    hidden = model.decode_full(encoded, batch.length)
    per_layer = stack(
        [
            _target_log_probs(log_softmax(model.off_ramp_logits(h, layer), axis=-1), batch.targets)
            for layer, h in enumerate(hidden, start=1)
        ]
    )
    b = np.arange(batch.batch_size)[None, :, None]
    t = np.arange(batch.length)[None, None, :]
    picked = take(per_layer, (exits - 1, b, t))
    return masked_nll(picked, mask)
