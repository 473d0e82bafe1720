"""Training-based acceptance runs on the synthetic template task."""

import math

import pytest

from src.core.content.corpus import make_examples
from src.core.content.synthetic import SyntheticTask, make_pairs
from src.core.decoding.early_exit import generate
from src.core.modeling.transformer import Model
from src.core.numerics.optim import Adam
from src.core.text.tokenizer import build_vocab
from src.core.training.finetune import finetune_loop
from src.models.config_models import DecodeMode, FinetuneMode, ModelConfig
from src.services.evaluation_service import evaluate_model, sweep_thresholds

pytestmark = pytest.mark.slow

DECODE_LENGTH = 25


@pytest.fixture(scope="module")
def template_task():
    train = make_pairs(SyntheticTask.TEMPLATE, 5000, seed=0)
    held_out = make_pairs(SyntheticTask.TEMPLATE, 200, seed=1)
    vocab = build_vocab([text for pair in train for text in pair], max_size=200)
    return vocab, make_examples(train, vocab, DECODE_LENGTH), make_examples(held_out, vocab, DECODE_LENGTH)


@pytest.fixture(scope="module")
def soft_model(template_task):
    vocab, train, _ = template_task
    config = ModelConfig.preset("desk", max_target_len=32, max_source_len=64, vocab_size=vocab.size)
    model = Model(config, seed=0)
    finetune_loop(
        model,
        train,
        FinetuneMode.SOFT,
        steps=2000,
        optimizer=Adam(model.parameters(), lr=1e-3, clip_norm=1.0),
        batch_size=16,
        decode_length=DECODE_LENGTH,
        seed=0,
        log_every=200,
    )
    return model


def test_soft_exit_learns_the_template_task(soft_model, template_task):
    vocab, _, held_out = template_task
    soft = evaluate_model(soft_model, vocab, held_out, DecodeMode.SOFT, length=DECODE_LENGTH)
    hard = evaluate_model(soft_model, vocab, held_out, DecodeMode.HARD, delta=0.5, length=DECODE_LENGTH)
    assert soft.metrics["token_accuracy"] >= 0.90
    assert soft.metrics["sequence_accuracy"] >= 0.75
    assert soft.metrics["token_accuracy"] >= hard.metrics["token_accuracy"]


def test_larger_thresholds_exit_earlier(soft_model, template_task):
    vocab, _, held_out = template_task
    zero, half, one, everything = sweep_thresholds(
        soft_model, held_out, [0.0, 0.5, 1.0, math.log(vocab.size)], length=DECODE_LENGTH
    )
    assert zero.exit_fractions[-1] >= 0.99
    assert everything.exit_fractions[0] == 1.0
    assert half.mean_exit_layer > one.mean_exit_layer
    assert one.exit_fractions[0] > half.exit_fractions[0]
    assert zero.mean_exit_layer > everything.mean_exit_layer


def test_identical_seeds_give_identical_outputs(soft_model, template_task):
    _, _, held_out = template_task
    encoded = soft_model.encode_one(held_out[0].src_ids)
    first = generate(soft_model, encoded, DecodeMode.SOFT, DECODE_LENGTH)
    second = generate(soft_model, encoded, DecodeMode.SOFT, DECODE_LENGTH)
    assert first.raw_ids == second.raw_ids
    assert first.layer_flops == second.layer_flops


@pytest.fixture(scope="module")
def copy_task():
    train = make_pairs(SyntheticTask.COPY, 5000, seed=0)
    held_out = make_pairs(SyntheticTask.COPY, 200, seed=1)
    vocab = build_vocab([src for src, _ in train], max_size=200)
    return vocab, make_examples(train, vocab, DECODE_LENGTH), make_examples(held_out, vocab, DECODE_LENGTH)


@pytest.fixture(scope="module")
def hard_copy_model(copy_task):
    vocab, train, _ = copy_task
    config = ModelConfig.preset("desk", max_target_len=32, max_source_len=32, vocab_size=vocab.size)
    model = Model(config, seed=0)
    finetune_loop(
        model,
        train,
        FinetuneMode.HARD,
        steps=3000,
        optimizer=Adam(model.parameters(), lr=1e-3, clip_norm=1.0),
        batch_size=16,
        decode_length=DECODE_LENGTH,
        seed=0,
        log_every=500,
    )
    return model


def test_hard_exit_copies_with_fewer_layers(hard_copy_model, copy_task):
    vocab, _, held_out = copy_task
    report = evaluate_model(hard_copy_model, vocab, held_out, DecodeMode.HARD, delta=0.5, length=DECODE_LENGTH)
    assert report.metrics["mean_exit_layer"] < hard_copy_model.layers
    assert report.metrics["sequence_accuracy"] >= 0.90
