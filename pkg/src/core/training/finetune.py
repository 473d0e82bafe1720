"""Fine-tuning objectives matched to the two early-exit inference modes."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from src.core._exceptions import ContractError
from src.core.content.corpus import iterate_batches
from src.core.modeling.transformer import Model
from src.core.numerics.optim import Adam
from src.core.numerics.tensor import Tensor, cross_entropy
from src.core.text.tokenizer import PAD_ID
from src.core.training.lplm import AssignmentSampler, PermutationSampler
from src.core.training.loop import Objective, ObjectiveOutput, lplm_objective, run_training
from src.models.config_models import FinetuneMode
from src.models.training_models import TrainingBatch, TrainingExample, TrainingReport


def soft_exit_losses(model: Model, batch: TrainingBatch) -> list[Tensor]:
    """Cross-entropy of every off-ramp under the prediction-feedback forward."""
    out = model.decode_soft(model.encode(batch.sources), batch.length)
    targets = batch.targets.reshape(-1)
    return [
        cross_entropy(logits.reshape(-1, model.vocab_size), targets, ignore_index=PAD_ID) for logits in out.layer_logits
    ]


def soft_objective(model: Model, batch: TrainingBatch) -> ObjectiveOutput:
    """Deep supervision: the sum of all per-layer losses."""
    losses = soft_exit_losses(model, batch)
    total = losses[0]
    for loss in losses[1:]:
        total = total + loss
    return ObjectiveOutput(total, float(model.layers), [loss.item() for loss in losses])


def finetune_loop(
    model: Model,
    dataset: Sequence[TrainingExample],
    mode: FinetuneMode,
    steps: int,
    optimizer: Adam,
    batch_size: int = 8,
    decode_length: int | None = None,
    seed: int = 0,
    sampler: AssignmentSampler | None = None,
    exact_copy_through: bool = False,
    log_every: int = 50,
) -> TrainingReport:
    """Train for one exit mode.

    Hard mode continues the layer-permutation objective; soft mode trains the feedback
    forward with deep supervision.
    """
    if not dataset:
        raise ContractError("finetune_loop needs a non-empty dataset")
    mode = FinetuneMode(mode)
    length = decode_length or model.config.max_target_len
    batches = iterate_batches(dataset, batch_size, length, np.random.default_rng([seed, 3]))

    objective: Objective
    if mode is FinetuneMode.HARD:
        objective = lplm_objective(sampler or PermutationSampler(model.layers, seed=seed), exact_copy_through)
    else:
        objective = soft_objective
    return run_training(model, batches, objective, optimizer, steps, f"finetune-{mode.value}", log_every)
