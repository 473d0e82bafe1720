"""Inference with token-level early exit.

Hard exit stops a position at the first layer whose off-ramp entropy is at most the
threshold; soft exit runs every layer and feeds each layer's prediction forward.
"""

from __future__ import annotations

import math
import time
from collections.abc import Sequence

import numpy as np

from src.core._exceptions import ContractError, ProbabilityError
from src.core.modeling.transformer import Model
from src.core.numerics.flops import LAYER_CATEGORIES, FlopCounter
from src.core.numerics.tensor import ACCUM_DTYPE, Array
from src.core.text.tokenizer import EOS_ID
from src.models.config_models import DecodeMode, HardExitConfig, SoftExitConfig
from src.models.generation_models import GenerationResult
from src.models.tensor_models import EncoderStates


def entropy(dist: Sequence[float] | Array) -> float:
    """Shannon entropy in nats, with 0 log 0 taken as 0."""
    p = np.asarray(dist, dtype=ACCUM_DTYPE)
    if p.ndim != 1 or p.size == 0:
        raise ProbabilityError(f"expected a non-empty probability vector, got shape {p.shape}")
    if (p < 0).any():
        raise ProbabilityError(f"negative probability {p.min()}")
    if abs(p.sum() - 1.0) > 1e-4:
        raise ProbabilityError(f"probabilities sum to {p.sum()}, not 1")
    nonzero = p[p > 0]
    return float(np.clip(-np.sum(nonzero * np.log(nonzero)), 0.0, math.log(p.size)))


def logit_entropies(logits: Array) -> Array:
    """Entropy of softmax(logits) for every row, in float64 and clipped to [0, ln V]."""
    z = logits.astype(ACCUM_DTYPE)
    z = z - z.max(axis=-1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    h = -(np.exp(log_p) * log_p).sum(axis=-1)
    return np.clip(h, 0.0, math.log(logits.shape[-1]))


def truncate_at_eos(raw_ids: Sequence[int]) -> list[int]:
    """Prefix strictly before the first EOS; everything when there is none."""
    ids = [int(i) for i in raw_ids]
    return ids[: ids.index(EOS_ID)] if EOS_ID in ids else ids


def _single(encoded: EncoderStates) -> None:
    if encoded.batch_size != 1:
        raise ContractError(f"generation runs at batch size 1, got {encoded.batch_size}")


def _result(
    mode: DecodeMode,
    raw_ids: Array | list[int],
    exit_layers: Array | list[int],
    entropies: Array | list[float],
    counter: FlopCounter,
    started_ns: int,
) -> GenerationResult:
    raw = [int(i) for i in raw_ids]
    return GenerationResult(
        mode=mode,
        token_ids=truncate_at_eos(raw),
        raw_ids=raw,
        exit_layers=[int(layer) for layer in exit_layers],
        entropies=[float(h) for h in entropies],
        decoder_flops=counter.decoder_total,
        layer_flops=counter.total_for(*LAYER_CATEGORIES),
        flops_by_category=counter.as_dict(),
        latency_ns=time.perf_counter_ns() - started_ns,
    )


def generate_hard(model: Model, encoded: EncoderStates, cfg: HardExitConfig) -> GenerationResult:
    """Layer-major sweep; a position leaves at the first layer with entropy <= delta, else at L.

    Exited positions are copied upward unchanged and stay visible as keys and values.
    """
    _single(encoded)
    started = time.perf_counter_ns()
    length, layers = cfg.length, model.layers
    exit_layers = np.full(length, layers, dtype=np.int64)
    tokens = np.zeros(length, dtype=np.int64)
    entropies = np.zeros(length, dtype=ACCUM_DTYPE)
    pending = np.ones(length, dtype=bool)

    with FlopCounter() as counter:
        memory = model.cross_memory(encoded)
        h = model.decoder_input(length)
        for layer in range(1, layers + 1):
            active = np.flatnonzero(pending)
            h = model.decoder_layer(layer, h, memory, None if active.size == length else active)
            logits = model.off_ramp_logits(h[0, active], layer).data
            h_rows = logit_entropies(logits)
            leaving = (h_rows <= cfg.delta) | (layer == layers)
            positions = active[leaving]
            exit_layers[positions] = layer
            tokens[positions] = np.argmax(logits[leaving], axis=-1)
            entropies[positions] = h_rows[leaving]
            pending[positions] = False
            if not pending.any():
                break
    return _result(DecodeMode.HARD, tokens, exit_layers, entropies, counter, started)


def generate_soft(model: Model, encoded: EncoderStates, cfg: SoftExitConfig) -> GenerationResult:
    """Prediction-feedback decode; tokens come from the last layer's off-ramp."""
    _single(encoded)
    started = time.perf_counter_ns()
    with FlopCounter() as counter:
        out = model.decode_soft(encoded, cfg.length)
    logits = out.final_logits.data[0]
    return _result(
        DecodeMode.SOFT,
        np.argmax(logits, axis=-1),
        [model.layers] * cfg.length,
        logit_entropies(logits),
        counter,
        started,
    )


def generate_nar(model: Model, encoded: EncoderStates, length: int) -> GenerationResult:
    """Plain full-depth NAR decode from the last off-ramp."""
    _single(encoded)
    started = time.perf_counter_ns()
    with FlopCounter() as counter:
        hidden = model.decode_full(encoded, length)
        logits = model.off_ramp_logits(hidden[-1][0], model.layers).data
    return _result(
        DecodeMode.NAR, np.argmax(logits, axis=-1), [model.layers] * length, logit_entropies(logits), counter, started
    )


def generate_ar(model: Model, encoded: EncoderStates, length: int, stop_at_eos: bool = True) -> GenerationResult:
    """Left-to-right reference decode wrapped as a GenerationResult."""
    _single(encoded)
    started = time.perf_counter_ns()
    with FlopCounter() as counter:
        out = model.decode_ar_reference(encoded, length, stop_at_eos=stop_at_eos)
    return _result(DecodeMode.AR, out.raw_ids, [model.layers] * len(out.raw_ids), [], counter, started)


def generate(
    model: Model,
    encoded: EncoderStates,
    mode: DecodeMode,
    length: int,
    delta: float = 0.5,
    stop_at_eos: bool = True,
) -> GenerationResult:
    """Dispatch to the decoder for ``mode``."""
    mode = DecodeMode(mode)
    if mode is DecodeMode.HARD:
        return generate_hard(model, encoded, HardExitConfig(delta=delta, length=length))
    if mode is DecodeMode.SOFT:
        return generate_soft(model, encoded, SoftExitConfig(length=length))
    if mode is DecodeMode.NAR:
        return generate_nar(model, encoded, length)
    return generate_ar(model, encoded, length, stop_at_eos=stop_at_eos)
