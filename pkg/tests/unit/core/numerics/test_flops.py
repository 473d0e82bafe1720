import numpy as np

from src.core.numerics.flops import LAYER_CATEGORIES, FlopCategory, FlopCounter, flop_scope
from src.core.numerics.tensor import Tensor, matmul


def test_matmul_charges_two_mkn():
    with FlopCounter() as counter:
        matmul(Tensor(np.ones((3, 4))), Tensor(np.ones((4, 5))))
    assert counter.total == 2 * 3 * 4 * 5


def test_batched_matmul_charges_every_matrix():
    with FlopCounter() as counter:
        matmul(Tensor(np.ones((2, 3, 4))), Tensor(np.ones((4, 5))))
    assert counter.total == 2 * 2 * 3 * 4 * 5


def test_scope_attributes_work_to_its_category():
    with FlopCounter() as counter:
        with flop_scope(FlopCategory.FFN):
            matmul(Tensor(np.ones((1, 2))), Tensor(np.ones((2, 1))))
        matmul(Tensor(np.ones((1, 2))), Tensor(np.ones((2, 1))))
    assert counter.by_category[FlopCategory.FFN.value] == 4
    assert counter.by_category[FlopCategory.OTHER.value] == 4
    assert counter.total_for(*LAYER_CATEGORIES) == 4


def test_nothing_is_counted_without_an_active_counter():
    counter = FlopCounter()
    matmul(Tensor(np.ones((2, 2))), Tensor(np.ones((2, 2))))
    assert counter.total == 0


def test_nested_counters_restore_the_outer_one():
    with FlopCounter() as outer:
        with FlopCounter() as inner:
            matmul(Tensor(np.ones((1, 1))), Tensor(np.ones((1, 1))))
        matmul(Tensor(np.ones((1, 1))), Tensor(np.ones((1, 1))))
    assert inner.total == 2
    assert outer.total == 2


def test_decoder_total_excludes_encoder():
    counter = FlopCounter()
    counter.add(10, FlopCategory.ENCODER)
    counter.add(7, FlopCategory.SELF_ATTN)
    counter.add(3, FlopCategory.CROSS_KV)
    assert counter.decoder_total == 10
    assert counter.as_dict() == {"cross_kv": 3, "encoder": 10, "self_attn": 7}
