import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.core._exceptions import ContractError, ShapeError, TokenIndexError
from src.core.numerics.tensor import (
    Tape,
    Tensor,
    concat,
    cross_entropy,
    gelu,
    index_update,
    layer_norm,
    log_softmax,
    masked_nll,
    matmul,
    softmax,
    stack,
    take,
    tensor_sum,
)


def numeric_grad(fn, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central differences of scalar fn at every entry of x (float64, modified in place)."""
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        original = x[idx]
        x[idx] = original + eps
        plus = fn()
        x[idx] = original - eps
        minus = fn()
        x[idx] = original
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def check_grad(build, *shapes, seed: int = 0):
    """Compare tape gradients of sum(build(*inputs) * weights) against finite differences."""
    rng = np.random.default_rng(seed)
    inputs = [Tensor(rng.standard_normal(shape), requires_grad=True, dtype=np.float64) for shape in shapes]
    out_shape = build(*inputs).shape
    weights = Tensor(rng.standard_normal(out_shape), dtype=np.float64)

    def loss_value() -> float:
        return float(np.sum(build(*inputs).data * weights.data))

    with Tape() as tape:
        loss = tensor_sum(build(*inputs) * weights)
    tape.backward(loss)
    for t in inputs:
        np.testing.assert_allclose(t.grad, numeric_grad(loss_value, t.data), rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize(
    ("build", "shapes"),
    [
        (lambda a, b: a * b + a / (b * b + 1.0), [(3, 4), (3, 4)]),
        (lambda a, b: matmul(a, b), [(2, 3, 4), (4, 5)]),
        (lambda a: softmax(a, axis=-1), [(3, 5)]),
        (lambda a: log_softmax(a, axis=-1), [(3, 5)]),
        (lambda a: gelu(a), [(4, 6)]),
        (lambda a, g, b: layer_norm(a, g, b), [(3, 8), (8,), (8,)]),
        (lambda a: a.reshape(6, 2).transpose(1, 0), [(3, 4)]),
        (lambda a: a.mean(axis=1, keepdims=True) + a, [(3, 4)]),
        (lambda a, b: concat([a, b], axis=1), [(2, 3), (2, 2)]),
        (lambda a, b: stack([a, b], axis=0), [(2, 3), (2, 3)]),
    ],
)
def test_op_gradients_match_finite_differences(build, shapes):
    """Reverse-mode gradients of the core ops agree with central differences."""
    check_grad(build, *shapes)


def test_take_accumulates_repeated_indices():
    """Gathering the same row twice doubles its gradient."""
    x = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True, dtype=np.float64)
    with Tape() as tape:
        loss = tensor_sum(take(x, np.array([0, 0, 2])))
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]])


def test_index_update_routes_gradients():
    base = Tensor(np.zeros((1, 4, 2)), requires_grad=True, dtype=np.float64)
    values = Tensor(np.ones((1, 2, 2)), requires_grad=True, dtype=np.float64)
    rows = np.array([1, 3])
    with Tape() as tape:
        out = index_update(base, (slice(None), rows), values)
        loss = tensor_sum(out * Tensor(np.arange(8.0).reshape(1, 4, 2)))
    tape.backward(loss)
    np.testing.assert_array_equal(out.data[0, rows], np.ones((2, 2)))
    np.testing.assert_array_equal(base.grad[0, rows], np.zeros((2, 2)))
    np.testing.assert_array_equal(base.grad[0, 0], [0.0, 1.0])
    np.testing.assert_array_equal(values.grad[0], [[2.0, 3.0], [6.0, 7.0]])


def test_index_update_leaves_other_rows_bitwise_identical():
    rng = np.random.default_rng(1)
    base = Tensor(rng.standard_normal((1, 5, 3)).astype(np.float32))
    out = index_update(base, (slice(None), np.array([2])), Tensor(np.zeros((1, 1, 3), dtype=np.float32)))
    for row in (0, 1, 3, 4):
        assert out.data[0, row].tobytes() == base.data[0, row].tobytes()


def test_no_graph_outside_a_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    y = x * 2.0
    assert y._node is None
    assert not y.requires_grad


def test_backward_rejects_non_scalar_loss():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(ContractError):
        tape.backward(y)


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError) as exc_info:
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))
    assert "(2, 3)" in str(exc_info.value)
    assert "(4, 5)" in str(exc_info.value)


def test_layer_norm_rejects_non_positive_epsilon():
    x = Tensor(np.ones((2, 4)))
    with pytest.raises(ContractError):
        layer_norm(x, Tensor(np.ones(4)), Tensor(np.zeros(4)), epsilon=0.0)


def test_cross_entropy_matches_manual_value():
    """Uniform logits over V classes cost ln V per token."""
    logits = Tensor(np.zeros((3, 5)))
    loss = cross_entropy(logits, [0, 1, 4])
    assert loss.item() == pytest.approx(np.log(5), rel=1e-6)


def test_cross_entropy_ignores_padding_rows():
    logits = Tensor(np.array([[10.0, 0.0], [0.0, 10.0]]))
    full = cross_entropy(logits, [0, 0]).item()
    masked = cross_entropy(logits, [0, 0], ignore_index=None).item()
    only_first = cross_entropy(logits, [0, -100], ignore_index=-100).item()
    assert full == masked
    assert only_first < full


def test_cross_entropy_rejects_out_of_vocabulary_targets():
    with pytest.raises(TokenIndexError):
        cross_entropy(Tensor(np.zeros((2, 3))), [0, 3])


def test_masked_nll_with_empty_mask_is_zero():
    assert masked_nll(Tensor(np.full((2, 2), -1.0)), np.zeros((2, 2), dtype=bool)).item() == 0.0


finite_rows = arrays(
    np.float64,
    st.tuples(st.integers(1, 4), st.integers(2, 8)),
    elements=st.floats(-30, 30, allow_nan=False, allow_infinity=False),
)


@given(finite_rows, st.floats(-50, 50, allow_nan=False))
@settings(max_examples=50, deadline=None)
def test_softmax_is_shift_invariant(x, shift):
    a = softmax(Tensor(x), axis=-1).data
    b = softmax(Tensor(x + shift), axis=-1).data
    np.testing.assert_allclose(a, b, atol=1e-9)


@given(finite_rows)
@settings(max_examples=50, deadline=None)
def test_softmax_rows_are_distributions(x):
    p = softmax(Tensor(x), axis=-1).data
    assert (p >= 0).all()
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-9)
    np.testing.assert_allclose(np.exp(log_softmax(Tensor(x), axis=-1).data), p, atol=1e-9)
