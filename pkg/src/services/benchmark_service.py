"""Per-sample latency and FLOP benchmark of the decode modes."""

from __future__ import annotations

import os
import time
from collections.abc import Mapping, Sequence

import numpy as np
from tqdm import tqdm

from src.core._exceptions import ContractError
from src.core.decoding.early_exit import generate
from src.core.modeling.transformer import Model
from src.infra.decorators import generic_error_handler
from src.infra.logger import get_logger
from src.infra.settings import get_settings
from src.models.config_models import DecodeMode
from src.models.generation_models import BenchmarkRecord, GenerationResult
from src.models.tensor_models import EncoderStates
from src.models.training_models import TrainingExample

logger = get_logger()

TABLE_COLUMNS = ("mode", "T", "reps", "median_ms", "p95_ms", "decoder_flops", "layer_flops", "mean_exit", "speedup")

# Read by OpenBLAS and MKL once, when numpy is imported
BLAS_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def blas_threads() -> dict[str, str | None]:
    return {var: os.environ.get(var) for var in BLAS_THREAD_VARS}


def blas_pinned(threads: Mapping[str, str | None]) -> bool:
    """True when some thread variable is set and every one that is set says 1."""
    values = [value for value in threads.values() if value is not None]
    return bool(values) and all(value.strip() == "1" for value in values)


class LatencyBenchmark:
    """Times decodes at batch size 1 after untimed warm-up runs.

    Sources are encoded once up front; only the decoder is inside the timed region.
    The AR reference runs without stopping at EOS so every mode decodes exactly T positions.
    """

    def __init__(
        self,
        model: Model,
        dataset: Sequence[TrainingExample],
        delta: float = 0.5,
        warmup: int | None = None,
        repetitions: int | None = None,
    ):
        if not dataset:
            raise ContractError("the benchmark needs at least one source")
        settings = get_settings()
        self.model = model.eval()
        self.delta = delta
        self.warmup = settings.bench_warmup if warmup is None else warmup
        self.repetitions = settings.bench_repetitions if repetitions is None else repetitions
        if self.repetitions < 30:
            raise ContractError(f"latency needs at least 30 repetitions, got {self.repetitions}")
        self.encoded: list[EncoderStates] = [model.encode_one(example.src_ids) for example in dataset]

    def _decode(self, mode: DecodeMode, length: int, index: int) -> tuple[GenerationResult, int]:
        encoded = self.encoded[index % len(self.encoded)]
        started = time.perf_counter_ns()
        result = generate(self.model, encoded, mode, length, delta=self.delta, stop_at_eos=False)
        return result, time.perf_counter_ns() - started

    def measure(self, mode: DecodeMode, length: int) -> BenchmarkRecord:
        """One (mode, T) cell: median and p95 latency plus mean FLOPs over the timed runs."""
        mode = DecodeMode(mode)
        for i in range(self.warmup):
            self._decode(mode, length, i)

        latencies = np.zeros(self.repetitions, dtype=np.int64)
        decoder_flops = layer_flops = 0
        exit_sum = 0.0
        for i in tqdm(
            range(self.repetitions), desc=f"bench {mode.value} T={length}", disable=get_settings().progress_disable
        ):
            result, elapsed = self._decode(mode, length, i)
            latencies[i] = elapsed
            decoder_flops += result.decoder_flops
            layer_flops += result.layer_flops
            exit_sum += result.mean_exit_layer

        return BenchmarkRecord(
            mode=mode,
            length=length,
            repetitions=self.repetitions,
            median_ns=int(np.median(latencies)),
            p95_ns=int(np.percentile(latencies, 95)),
            decoder_flops=round(decoder_flops / self.repetitions),
            layer_flops=round(layer_flops / self.repetitions),
            mean_exit_layer=exit_sum / self.repetitions,
        )

    def run(self, modes: Sequence[DecodeMode], lengths: Sequence[int]) -> list[BenchmarkRecord]:
        records = [self.measure(mode, length) for length in lengths for mode in modes]
        return with_speedups(records)


def with_speedups(records: Sequence[BenchmarkRecord]) -> list[BenchmarkRecord]:
    """Fill speedup = AR median / mode median per length; left empty where AR was not run."""
    ar_median = {r.length: r.median_ns for r in records if r.mode is DecodeMode.AR}
    out = []
    for record in records:
        baseline = ar_median.get(record.length)
        if baseline is None or record.median_ns == 0:
            out.append(record)
        elif record.mode is DecodeMode.AR:
            out.append(record.model_copy(update={"speedup": 1.0}))
        else:
            out.append(record.model_copy(update={"speedup": baseline / record.median_ns}))
    return out


def format_table(records: Sequence[BenchmarkRecord]) -> str:
    """Fixed-width text table, one row per record."""
    rows = [TABLE_COLUMNS]
    for r in records:
        rows.append(
            (
                r.mode.value,
                str(r.length),
                str(r.repetitions),
                f"{r.median_ns / 1e6:.3f}",
                f"{r.p95_ns / 1e6:.3f}",
                str(r.decoder_flops),
                str(r.layer_flops),
                f"{r.mean_exit_layer:.2f}",
                "-" if r.speedup is None else f"{r.speedup:.2f}x",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_COLUMNS))]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(row, widths, strict=True)) for row in rows)


@generic_error_handler
def bench_latency(
    model: Model,
    dataset: Sequence[TrainingExample],
    modes: Sequence[DecodeMode],
    lengths: Sequence[int],
    delta: float = 0.5,
) -> list[BenchmarkRecord]:
    """Benchmark every (mode, T) pair on the given sources."""
    threads = blas_threads()
    logger.info("BLAS threads: " + ", ".join(f"{var}={value or 'unset'}" for var, value in threads.items()))
    if not blas_pinned(threads):
        logger.warning("BLAS may run multi-threaded; export OMP_NUM_THREADS=1 before starting for single-thread timing")
    records = LatencyBenchmark(model, dataset, delta=delta).run(modes, lengths)
    for r in records:
        logger.info(f"{r.mode.value} T={r.length}: median {r.median_ns / 1e6:.3f} ms, {r.layer_flops} layer FLOPs")
    return records
