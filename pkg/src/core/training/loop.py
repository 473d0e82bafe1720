"""Shared optimization loop and the LPLM pre-training entry point."""

from __future__ import annotations

import math
import time
from collections.abc import Callable, Iterator, Sequence
from typing import NamedTuple

import numpy as np
from tqdm import tqdm

from src.core._exceptions import EmptyCorpusError, TrainingDivergedError
from src.core.content.corpus import collate
from src.core.modeling.transformer import Model
from src.core.numerics.optim import Adam
from src.core.numerics.tensor import Tape, Tensor
from src.core.text.tokenizer import PAD_ID, Vocabulary
from src.core.training.corruption import corrupt_document, document_rng
from src.core.training.lplm import AssignmentSampler, lplm_loss
from src.infra.logger import get_logger
from src.infra.settings import get_settings
from src.models.config_models import CorruptionConfig
from src.models.training_models import StepRecord, TrainingBatch, TrainingExample, TrainingReport

logger = get_logger()


class ObjectiveOutput(NamedTuple):
    loss: Tensor
    mean_exit_layer: float
    layer_losses: list[float] | None = None


Objective = Callable[[Model, TrainingBatch], ObjectiveOutput]


def lplm_objective(sampler: AssignmentSampler, exact_copy_through: bool = False) -> Objective:
    """Layer-permutation loss, reporting the mean sampled exit layer."""

    def objective(model: Model, batch: TrainingBatch) -> ObjectiveOutput:
        exits = sampler.sample_batch(batch.batch_size, batch.length)
        loss = lplm_loss(model, batch, sampler, exact_copy_through=exact_copy_through, assignments=exits)
        valid = np.broadcast_to(batch.targets != PAD_ID, exits.shape)
        return ObjectiveOutput(loss, float(exits[valid].mean()) if valid.any() else float(exits.mean()))

    return objective


def run_training(
    model: Model,
    batches: Iterator[TrainingBatch],
    objective: Objective,
    optimizer: Adam,
    steps: int,
    name: str,
    log_every: int = 50,
) -> TrainingReport:
    """Run ``steps`` optimizer updates; abort on a non-finite loss."""
    report = TrainingReport(objective=name)
    if steps == 0:
        return report

    last_finite: float | None = None
    model.train()
    try:
        for step in tqdm(range(steps), desc=name, disable=get_settings().progress_disable):
            batch = next(batches)
            started = time.perf_counter()
            optimizer.zero_grad()
            with Tape() as tape:
                out = objective(model, batch)
            loss = out.loss.item()
            if not math.isfinite(loss):
                logger.critical(f"{name}: non-finite loss {loss} at step {step}")
                raise TrainingDivergedError(step, loss, last_finite)
            tape.backward(out.loss)
            grad_norm = optimizer.step()
            elapsed = time.perf_counter() - started

            last_finite = loss
            record = StepRecord(
                step=step,
                loss=loss,
                tokens_per_sec=batch.num_target_tokens / elapsed if elapsed > 0 else 0.0,
                mean_exit_layer=out.mean_exit_layer,
                grad_norm=grad_norm if math.isfinite(grad_norm) else 0.0,
                layer_losses=out.layer_losses,
            )
            report.records.append(record)
            if step % log_every == 0 or step == steps - 1:
                logger.info(f"{name} step {step}: loss {loss:.4f}, {record.tokens_per_sec:.0f} tokens/s")
    finally:
        model.eval()
    return report


def pretraining_batches(
    documents: Sequence[Sequence[int]],
    vocab: Vocabulary,
    corruption: CorruptionConfig,
    batch_size: int,
    decode_length: int,
    seed: int,
) -> Iterator[TrainingBatch]:
    """Endless corrupted batches; document i of the stream uses its own random stream."""
    if not documents:
        raise EmptyCorpusError("Cannot pre-train on an empty corpus")
    order_rng = np.random.default_rng([seed, 2])
    drawn = 0
    pending: list[TrainingExample] = []
    while True:
        for index in order_rng.permutation(len(documents)):
            rng = document_rng(corruption.rng_seed, drawn)
            pending.append(corrupt_document(documents[index], vocab, corruption, rng))
            drawn += 1
            if len(pending) == batch_size:
                yield collate(pending, decode_length)
                pending = []


def pretrain_loop(
    model: Model,
    documents: Sequence[Sequence[int]],
    vocab: Vocabulary,
    corruption: CorruptionConfig,
    sampler: AssignmentSampler,
    steps: int,
    optimizer: Adam,
    batch_size: int = 8,
    decode_length: int | None = None,
    seed: int = 0,
    exact_copy_through: bool = False,
    log_every: int = 50,
) -> TrainingReport:
    """Corrupt, encode, score with LPLM, backpropagate and update, ``steps`` times."""
    length = decode_length or model.config.max_target_len
    batches = pretraining_batches(documents, vocab, corruption, batch_size, length, seed)
    objective = lplm_objective(sampler, exact_copy_through)
    return run_training(model, batches, objective, optimizer, steps, "pretrain", log_every)
