"""Denoising corruptions for pre-training: sentence shuffling and Poisson-span infilling."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, Field

from src.core._exceptions import ContractError
from src.core.text.tokenizer import EOS_ID, MASK_ID, Vocabulary
from src.models.config_models import CorruptionConfig
from src.models.training_models import TrainingExample


class CorruptionStats(BaseModel):
    """Running totals for checking the corruption distribution."""

    documents: int = 0
    tokens: int = 0
    masked_tokens: int = 0
    span_draws: list[int] = Field(default_factory=list, description="Poisson draws before clipping")

    @property
    def masked_fraction(self) -> float:
        return self.masked_tokens / self.tokens if self.tokens else 0.0

    @property
    def mean_span_length(self) -> float:
        return float(np.mean(self.span_draws)) if self.span_draws else 0.0


def document_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for document ``index``."""
    return np.random.default_rng([seed, index])


def split_sentences(doc_ids: Sequence[int], full_stop_id: int | None) -> list[list[int]]:
    """Sentences ending at each full stop; trailing tokens form a final sentence."""
    if full_stop_id is None:
        return [list(doc_ids)] if doc_ids else []
    sentences: list[list[int]] = []
    current: list[int] = []
    for token in doc_ids:
        current.append(int(token))
        if token == full_stop_id:
            sentences.append(current)
            current = []
    if current:
        sentences.append(current)
    return sentences


def shuffle_sentences(doc_ids: Sequence[int], vocab: Vocabulary, rng: np.random.Generator) -> list[int]:
    """Uniformly permute sentence order; the token multiset is unchanged."""
    sentences = split_sentences(doc_ids, vocab.full_stop_id)
    if len(sentences) <= 1:
        return list(doc_ids)
    order = rng.permutation(len(sentences))
    return [token for i in order for token in sentences[i]]


def sample_span_length(poisson_lambda: float, rng: np.random.Generator) -> int:
    """Poisson draw, redrawn until positive."""
    while True:
        draw = int(rng.poisson(poisson_lambda))
        if draw > 0:
            return draw


def infill_spans(
    doc_ids: Sequence[int],
    cfg: CorruptionConfig,
    rng: np.random.Generator,
    stats: CorruptionStats | None = None,
) -> list[int]:
    """Replace non-overlapping random spans with one MASK each.

    Spans cover round(span_fraction * len) original tokens in total; each length is a
    positive Poisson draw clipped to the budget still open.
    """
    n = len(doc_ids)
    if n == 0:
        raise ContractError("infill_spans needs a non-empty document")
    budget = math.floor(cfg.span_fraction * n + 0.5)
    covered = np.zeros(n, dtype=bool)
    starts: dict[int, int] = {}

    remaining = budget
    while remaining > 0:
        draw = sample_span_length(cfg.poisson_lambda, rng)
        if stats is not None:
            stats.span_draws.append(draw)
        length = min(draw, remaining)
        # Shrink until some window of that length is entirely uncovered.
        while True:
            free = np.flatnonzero(~sliding_window_view(covered, length).any(axis=1))
            if free.size or length == 1:
                break
            length -= 1
        if free.size == 0:
            break
        start = int(rng.choice(free))
        covered[start : start + length] = True
        starts[start] = length
        remaining -= length

    corrupted: list[int] = []
    i = 0
    while i < n:
        if i in starts:
            corrupted.append(MASK_ID)
            i += starts[i]
        else:
            corrupted.append(int(doc_ids[i]))
            i += 1

    if stats is not None:
        stats.documents += 1
        stats.tokens += n
        stats.masked_tokens += int(covered.sum())
    return corrupted


def corrupt_document(
    doc_ids: Sequence[int],
    vocab: Vocabulary,
    cfg: CorruptionConfig,
    rng: np.random.Generator,
    stats: CorruptionStats | None = None,
) -> TrainingExample:
    """Corrupted source paired with the untouched, EOS-terminated document."""
    source = shuffle_sentences(doc_ids, vocab, rng) if cfg.shuffle_sentences else list(doc_ids)
    source = infill_spans(source, cfg, rng, stats)
    return TrainingExample(src_ids=source, tgt_ids=[*doc_ids, EOS_ID])
