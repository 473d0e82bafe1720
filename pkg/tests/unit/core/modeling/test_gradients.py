import numpy as np
import pytest

from src.core.content.corpus import collate
from src.core.modeling.transformer import Model
from src.core.numerics.tensor import Tape
from src.core.text.tokenizer import EOS_ID
from src.core.training.finetune import soft_objective
from src.core.training.lplm import FixedAssignmentSampler, lplm_loss, nar_cross_entropy
from src.models.config_models import ModelConfig
from src.models.tensor_models import ExitAssignment
from src.models.training_models import TrainingExample

EPS = 1e-6


@pytest.fixture
def grad_model(vocab) -> Model:
    config = ModelConfig(layers=2, d_model=64, heads=4, d_ff=128, max_target_len=8, max_source_len=8)
    return Model(config.with_vocab(vocab.size), seed=0, dtype=np.float64)


@pytest.fixture
def example() -> TrainingExample:
    return TrainingExample(src_ids=[5, 9, 7, 12, 6], tgt_ids=[7, 6, 9, 5, EOS_ID])


def _sampled_entries(
    model: Model, count: int, seed: int, exclude: tuple[str, ...]
) -> list[tuple[str, tuple[int, ...]]]:
    rng = np.random.default_rng(seed)
    names = [name for name in model.params if not name.startswith(exclude)] if exclude else list(model.params)
    entries = []
    for _ in range(count):
        name = names[int(rng.integers(len(names)))]
        shape = model.params[name].shape
        entries.append((name, tuple(int(rng.integers(n)) for n in shape)))
    return entries


def _check(model: Model, loss_fn, count: int = 50, seed: int = 0, exclude: tuple[str, ...] = ("soft.",)) -> None:
    model.eval()
    for p in model.params.values():
        p.grad = None
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)

    for name, index in _sampled_entries(model, count, seed, exclude):
        param = model.params[name]
        analytic = 0.0 if param.grad is None else float(param.grad[index])
        original = param.data[index]
        param.data[index] = original + EPS
        plus = loss_fn().item()
        param.data[index] = original - EPS
        minus = loss_fn().item()
        param.data[index] = original
        numeric = (plus - minus) / (2 * EPS)
        assert abs(analytic - numeric) <= 1e-3 * max(abs(analytic), abs(numeric)) + 1e-8, (name, index)


def test_nar_loss_gradients(grad_model, example):
    _check(grad_model, lambda: nar_cross_entropy(grad_model, example, decode_length=6))


def test_copy_through_loss_gradients(grad_model, example):
    """Gradients flow through recomputed rows, frozen keys/values and the copied states."""
    sampler = FixedAssignmentSampler([ExitAssignment(exits=[1, 2, 2, 1, 2, 1])])
    _check(
        grad_model,
        lambda: lplm_loss(grad_model, example, sampler, decode_length=6, exact_copy_through=True),
        seed=1,
    )


def test_soft_feedback_gradients(grad_model, example):
    batch = collate([example], 6)
    _check(grad_model, lambda: soft_objective(grad_model, batch).loss, seed=2, exclude=())
