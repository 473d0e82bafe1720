"""Model-level evaluation: quality metrics, threshold sweeps and per-off-ramp accuracy."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from tqdm import tqdm

from src.core._exceptions import ContractError
from src.core.content.corpus import collate
from src.core.decoding.early_exit import generate, generate_hard
from src.core.evaluation.metrics import corpus_bleu, distinct_n, meteor_simplified, rouge_l, rouge_n
from src.core.modeling.transformer import Model
from src.core.numerics.tensor import cross_entropy
from src.core.text.tokenizer import EOS_ID, PAD_ID, Vocabulary, decode
from src.infra.decorators import generic_error_handler
from src.infra.logger import get_logger
from src.infra.settings import get_settings
from src.models.config_models import DecodeMode, HardExitConfig
from src.models.evaluation_models import EvalPair, EvaluationReport, ExampleScore, LayerAccuracyRecord, SweepRecord
from src.models.generation_models import GenerationResult
from src.models.training_models import TrainingExample

logger = get_logger()

DEFAULT_DELTAS = (0.0, 0.25, 0.5, 0.75, 1.0)


def _require(dataset: Sequence[TrainingExample]) -> None:
    if not dataset:
        raise ContractError("evaluation needs a non-empty dataset")


def _matches(result: GenerationResult, example: TrainingExample) -> int:
    """Target positions (EOS included) whose predicted id is right."""
    return sum(1 for t, target in enumerate(example.tgt_ids) if t < result.length and result.raw_ids[t] == target)


def _exact(result: GenerationResult, example: TrainingExample) -> bool:
    return result.token_ids == list(example.tgt_ids[:-1]) and EOS_ID in result.raw_ids


def _progress(iterable: Sequence[TrainingExample], desc: str) -> tqdm:
    return tqdm(iterable, desc=desc, disable=get_settings().progress_disable)


@generic_error_handler
def evaluate_model(
    model: Model,
    vocab: Vocabulary,
    dataset: Sequence[TrainingExample],
    mode: DecodeMode,
    delta: float = 0.5,
    length: int | None = None,
) -> EvaluationReport:
    """Decode every source at batch size 1 and score the outputs against their references."""
    _require(dataset)
    mode = DecodeMode(mode)
    length = length or model.config.max_target_len
    model.eval()

    examples: list[ExampleScore] = []
    pairs: list[EvalPair] = []
    correct = total = exact = 0
    exit_sum = 0.0
    rouge: dict[str, float] = {"rouge1": 0.0, "rouge2": 0.0, "rougeL": 0.0}
    meteor = 0.0
    for input_id, example in enumerate(_progress(dataset, f"evaluate-{mode.value}")):
        result = generate(model, model.encode_one(example.src_ids), mode, length, delta=delta)
        hypothesis = decode(result.token_ids, vocab)
        reference = decode(example.tgt_ids[:-1], vocab)
        pair = EvalPair(hypothesis=hypothesis.split(), reference=reference.split())
        pairs.append(pair)

        matched = _matches(result, example)
        correct += matched
        total += example.length
        is_exact = _exact(result, example)
        exact += is_exact
        exit_sum += result.mean_exit_layer

        lcs = rouge_l(pair.hypothesis, pair.reference)
        rouge["rouge1"] += rouge_n(pair.hypothesis, pair.reference, 1).f1
        rouge["rouge2"] += rouge_n(pair.hypothesis, pair.reference, 2).f1
        rouge["rougeL"] += lcs.f1
        meteor += meteor_simplified(pair.hypothesis, pair.reference)
        examples.append(
            ExampleScore(
                input_id=input_id,
                hypothesis=hypothesis,
                reference=reference,
                exact_match=is_exact,
                token_accuracy=matched / example.length,
                rouge_l=lcs.f1,
                mean_exit_layer=result.mean_exit_layer,
            )
        )

    n = len(dataset)
    metrics = {name: score / n for name, score in rouge.items()}
    metrics.update(
        token_accuracy=correct / total,
        sequence_accuracy=exact / n,
        bleu4=corpus_bleu(pairs, 4),
        meteor=meteor / n,
        distinct1=distinct_n((p.hypothesis for p in pairs), 1),
        distinct2=distinct_n((p.hypothesis for p in pairs), 2),
        mean_exit_layer=exit_sum / n,
    )
    logger.info(
        f"Evaluated {n} examples in {mode.value} mode: token accuracy {metrics['token_accuracy']:.4f}, "
        f"ROUGE-L {metrics['rougeL']:.4f}"
    )
    delta_used = delta if mode is DecodeMode.HARD else None
    return EvaluationReport(mode=mode, delta=delta_used, metrics=metrics, examples=examples)


@generic_error_handler
def sweep_thresholds(
    model: Model,
    dataset: Sequence[TrainingExample],
    deltas: Sequence[float] = DEFAULT_DELTAS,
    length: int | None = None,
) -> list[SweepRecord]:
    """Hard-exit decode of the dataset at every threshold; exit fractions count all T positions."""
    _require(dataset)
    length = length or model.config.max_target_len
    model.eval()
    encoded = [model.encode_one(example.src_ids) for example in dataset]

    records = []
    for delta in deltas:
        histogram = np.zeros(model.layers, dtype=np.int64)
        correct = total = exact = 0
        flops = 0
        for states, example in zip(encoded, dataset, strict=True):
            result = generate_hard(model, states, HardExitConfig(delta=delta, length=length))
            histogram += np.bincount(np.asarray(result.exit_layers) - 1, minlength=model.layers)
            correct += _matches(result, example)
            total += example.length
            exact += _exact(result, example)
            flops += result.decoder_flops
        fractions = histogram / histogram.sum()
        record = SweepRecord(
            delta=delta,
            mean_exit_layer=float(np.dot(fractions, np.arange(1, model.layers + 1))),
            exit_fractions=[float(f) for f in fractions],
            token_accuracy=correct / total,
            sequence_accuracy=exact / len(dataset),
            mean_decoder_flops=flops / len(dataset),
        )
        logger.info(
            f"delta={delta}: mean exit layer {record.mean_exit_layer:.3f}, accuracy {record.token_accuracy:.4f}"
        )
        records.append(record)
    return records


@generic_error_handler
def layer_accuracy(
    model: Model,
    dataset: Sequence[TrainingExample],
    length: int | None = None,
    batch_size: int = 32,
) -> list[LayerAccuracyRecord]:
    """Token accuracy and cross-entropy of every off-ramp on a full-depth forward."""
    _require(dataset)
    length = length or model.config.max_target_len
    model.eval()
    correct = np.zeros(model.layers, dtype=np.int64)
    loss_sum = np.zeros(model.layers)
    total = 0
    for start in range(0, len(dataset), batch_size):
        batch = collate(dataset[start : start + batch_size], length)
        valid = batch.targets != PAD_ID
        hidden = model.decode_full(model.encode(batch.sources), length)
        tokens = int(valid.sum())
        total += tokens
        for index, h in enumerate(hidden):
            logits = model.off_ramp_logits(h, index + 1)
            predicted = np.argmax(logits.data, axis=-1)
            correct[index] += int(((predicted == batch.targets) & valid).sum())
            loss = cross_entropy(logits.reshape(-1, model.vocab_size), batch.targets.reshape(-1), ignore_index=PAD_ID)
            loss_sum[index] += loss.item() * tokens
    return [
        LayerAccuracyRecord(layer=layer, token_accuracy=correct[layer - 1] / total, loss=loss_sum[layer - 1] / total)
        for layer in range(1, model.layers + 1)
    ]
