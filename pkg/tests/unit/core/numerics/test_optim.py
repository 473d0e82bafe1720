import numpy as np
import pytest

from src.core._exceptions import ShapeError
from src.core.numerics.optim import Adam, OptimizerState, adam_step
from src.core.numerics.tensor import Tape, Tensor, tensor_sum


def _quadratic(param: Tensor) -> Tensor:
    return tensor_sum(param * param)


def test_first_step_moves_each_entry_by_lr():
    """Bias correction makes the first Adam update lr * sign(g)."""
    param = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True, dtype=np.float64)
    optimizer = Adam({"w": param}, lr=0.1)
    with Tape() as tape:
        loss = _quadratic(param)
    tape.backward(loss)
    optimizer.step()
    np.testing.assert_allclose(param.data, [0.9, -1.9, 2.9], atol=1e-6)


def test_repeated_steps_reduce_a_quadratic():
    param = Tensor(np.array([3.0, -4.0]), requires_grad=True, dtype=np.float64)
    optimizer = Adam({"w": param}, lr=0.1)
    start = _quadratic(param).item()
    for _ in range(100):
        optimizer.zero_grad()
        with Tape() as tape:
            loss = _quadratic(param)
        tape.backward(loss)
        optimizer.step()
    assert _quadratic(param).item() < start / 10


def test_step_returns_pre_clip_norm_and_clips():
    param = Tensor(np.zeros(2), requires_grad=True, dtype=np.float64)
    param.grad = np.array([3.0, 4.0])
    optimizer = Adam({"w": param}, lr=0.1, clip_norm=1.0)
    assert optimizer.step() == pytest.approx(5.0)
    assert optimizer.state.step == 1


def test_parameters_without_gradient_are_untouched():
    used = Tensor(np.ones(2), requires_grad=True, dtype=np.float64)
    unused = Tensor(np.ones(2), requires_grad=True, dtype=np.float64)
    used.grad = np.ones(2)
    Adam({"used": used, "unused": unused}, lr=0.1).step()
    np.testing.assert_array_equal(unused.data, np.ones(2))
    assert not np.array_equal(used.data, np.ones(2))


def test_adam_step_rejects_mismatched_gradient():
    param = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        adam_step({"w": param}, {"w": np.ones(2)}, OptimizerState())
