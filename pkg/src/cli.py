"""Command-line entry point: ``offramp <subcommand> ...``."""

from __future__ import annotations

import argparse
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from src.core._exceptions import ConfigurationError
from src.core.content.corpus import SOURCE_FILE, load_corpus, load_parallel, make_examples
from src.core.content.synthetic import SyntheticTask, make_synthetic
from src.core.modeling.transformer import Model
from src.core.text.tokenizer import Vocabulary, build_vocab
from src.infra.checkpoint import load_checkpoint
from src.infra.config_loader import load_run_config
from src.infra.decorators import cli_error_boundary
from src.infra.logger import configure_logging, get_logger
from src.infra.records import emit_records, write_records
from src.models.config_models import DecodeMode, FinetuneMode, RunConfig
from src.models.training_models import TrainingExample
from src.services.benchmark_service import bench_latency, format_table
from src.services.evaluation_service import DEFAULT_DELTAS, evaluate_model, layer_accuracy, sweep_thresholds
from src.services.generation_service import GenerationService
from src.services.training_service import TrainingService

logger = get_logger()


def _csv(cast: Callable[[str], object]) -> Callable[[str], list]:
    def parse(value: str) -> list:
        try:
            items = [cast(item.strip()) for item in value.split(",") if item.strip()]
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from e
        if not items:
            raise argparse.ArgumentTypeError("expected a comma-separated list")
        return items

    return parse


def _config(args: argparse.Namespace) -> RunConfig:
    config = load_run_config(args.config, seed=args.seed)
    if getattr(args, "steps", None) is not None:
        config = config.model_copy(update={"training": config.training.model_copy(update={"steps": args.steps})})
    return config


def _trained(config: RunConfig) -> tuple[Model, Vocabulary]:
    """Checkpoint and vocabulary named by the config."""
    if config.paths.checkpoint is None or not config.paths.checkpoint.is_file():
        raise ConfigurationError(f"paths.checkpoint must name an existing checkpoint, got {config.paths.checkpoint}")
    if config.paths.vocab is None:
        raise ConfigurationError("paths.vocab is required")
    return load_checkpoint(config.paths.checkpoint), Vocabulary.load(config.paths.vocab)


def _decode_length(args: argparse.Namespace, config: RunConfig, model: Model) -> int:
    return args.length or config.decoding.length or model.config.max_target_len


def _eval_set(config: RunConfig, vocab: Vocabulary, length: int) -> list[TrainingExample]:
    directory = config.paths.eval_data or config.paths.train_data
    if directory is None:
        raise ConfigurationError("paths.eval_data (or paths.train_data) is required")
    return make_examples(load_parallel(directory), vocab, length)


# Handlers
@cli_error_boundary
def cmd_build_vocab(args: argparse.Namespace) -> int:
    corpus: list[str] = []
    for path in args.corpus:
        corpus.extend(load_corpus(path))
    build_vocab(corpus, args.max_size).save(args.out)
    return 0


@cli_error_boundary
def cmd_make_synthetic(args: argparse.Namespace) -> int:
    make_synthetic(SyntheticTask(args.task), args.size, args.seed, args.out)
    return 0


@cli_error_boundary
def cmd_pretrain(args: argparse.Namespace) -> int:
    TrainingService(_config(args)).pretrain()
    return 0


@cli_error_boundary
def cmd_finetune(args: argparse.Namespace) -> int:
    TrainingService(_config(args)).finetune(FinetuneMode(args.mode))
    return 0


@cli_error_boundary
def cmd_generate(args: argparse.Namespace) -> int:
    config = _config(args)
    model, vocab = _trained(config)
    if args.input is not None:
        sources = load_corpus(args.input)
    elif config.paths.eval_data is not None:
        sources = load_corpus(config.paths.eval_data / SOURCE_FILE)
    else:
        raise ConfigurationError("generate needs --input or paths.eval_data")
    mode = DecodeMode(args.mode or config.decoding.mode)
    delta = config.decoding.delta if args.delta is None else args.delta
    records = GenerationService(model, vocab).generate_texts(
        sources, mode, delta, _decode_length(args, config, model)
    )
    if args.out is not None:
        write_records(args.out, records)
    else:
        emit_records(sys.stdout, records)
    return 0


@cli_error_boundary
def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config(args)
    model, vocab = _trained(config)
    length = _decode_length(args, config, model)
    dataset = _eval_set(config, vocab, length)
    mode = DecodeMode(args.mode or config.decoding.mode)
    delta = config.decoding.delta if args.delta is None else args.delta
    report = evaluate_model(model, vocab, dataset, mode, delta, length)
    write_records(config.paths.output_dir / f"eval-{mode.value}.jsonl", report.examples)
    if args.per_layer:
        write_records(config.paths.output_dir / "layer-accuracy.jsonl", layer_accuracy(model, dataset, length))
    print("\n".join(report.summary_lines()))
    return 0


@cli_error_boundary
def cmd_bench(args: argparse.Namespace) -> int:
    config = _config(args)
    model, vocab = _trained(config)
    lengths = args.lengths or [_decode_length(args, config, model)]
    dataset = _eval_set(config, vocab, max(lengths))
    delta = config.decoding.delta if args.delta is None else args.delta
    records = bench_latency(model, dataset, args.modes, lengths, delta)
    write_records(config.paths.output_dir / "bench.jsonl", records)
    print(format_table(records))
    return 0


@cli_error_boundary
def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config(args)
    model, vocab = _trained(config)
    length = _decode_length(args, config, model)
    records = sweep_thresholds(model, _eval_set(config, vocab, length), args.deltas, length)
    write_records(config.paths.output_dir / "sweep.jsonl", records)
    emit_records(sys.stdout, records)
    return 0


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, required=True, help="YAML run config")
    parser.add_argument("--seed", type=int, help="Override the config seed")


def _add_decode_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=[m.value for m in DecodeMode], help="Decode mode (default: config)")
    parser.add_argument("--delta", type=float, help="Hard-exit entropy threshold in nats")
    parser.add_argument("--length", type=int, help="Decode length T")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="offramp", description="Early-exit non-autoregressive text generation")
    parser.add_argument("--debug", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="Build a word-level vocabulary from corpus files")
    p.add_argument("--corpus", type=Path, nargs="+", required=True)
    p.add_argument("--max-size", type=int, default=8000)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_build_vocab)

    p = sub.add_parser("make-synthetic", help="Write a synthetic parallel dataset")
    p.add_argument("--task", choices=[t.value for t in SyntheticTask], required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="Directory for src.txt and tgt.txt")
    p.set_defaults(handler=cmd_make_synthetic)

    p = sub.add_parser("pretrain", help="Layer-permutation pre-training on a corrupted corpus")
    _add_run_options(p)
    p.add_argument("--steps", type=int, help="Override training.steps")
    p.set_defaults(handler=cmd_pretrain)

    p = sub.add_parser("finetune", help="Fine-tune for hard or soft early exit")
    _add_run_options(p)
    p.add_argument("--mode", choices=[m.value for m in FinetuneMode], required=True)
    p.add_argument("--steps", type=int, help="Override training.steps")
    p.set_defaults(handler=cmd_finetune)

    p = sub.add_parser("generate", help="Decode sources into generation records")
    _add_run_options(p)
    _add_decode_options(p)
    p.add_argument("--input", type=Path, help="One source per line (default: eval_data/src.txt)")
    p.add_argument("--out", type=Path, help="JSON lines file (default: stdout)")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("evaluate", help="Score generations against references")
    _add_run_options(p)
    _add_decode_options(p)
    p.add_argument("--per-layer", action="store_true", help="Also report every off-ramp's accuracy")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("bench", help="Per-sample latency and FLOPs by decode mode and length")
    _add_run_options(p)
    p.add_argument("--modes", type=_csv(DecodeMode), default=list(DecodeMode))
    p.add_argument("--lengths", type=_csv(int))
    p.add_argument("--delta", type=float)
    p.add_argument("--length", type=int, help=argparse.SUPPRESS)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("sweep", help="Hard-exit behaviour across entropy thresholds")
    _add_run_options(p)
    p.add_argument("--deltas", type=_csv(float), default=list(DEFAULT_DELTAS))
    p.add_argument("--length", type=int)
    p.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(debug=args.debug)
    return args.handler(args)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
