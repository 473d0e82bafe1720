import pytest

from src.core._exceptions import ContractError
from src.core.content.corpus import load_parallel
from src.core.content.synthetic import MAX_LENGTH, MIN_LENGTH, SyntheticTask, make_pairs, make_synthetic


@pytest.mark.parametrize("task", list(SyntheticTask))
def test_pairs_are_deterministic_per_seed(task):
    assert make_pairs(task, 20, seed=7) == make_pairs(task, 20, seed=7)
    assert make_pairs(task, 20, seed=7) != make_pairs(task, 20, seed=8)


def test_copy_targets_equal_sources():
    for src, tgt in make_pairs(SyntheticTask.COPY, 50, seed=0):
        assert src == tgt
        assert MIN_LENGTH <= len(src.split()) <= MAX_LENGTH


def test_reverse_targets_reverse_the_words():
    for src, tgt in make_pairs(SyntheticTask.REVERSE, 50, seed=0):
        assert tgt.split() == src.split()[::-1]


def test_template_targets_fill_every_slot():
    for src, tgt in make_pairs(SyntheticTask.TEMPLATE, 100, seed=0):
        words = tgt.split()
        assert MIN_LENGTH <= len(words) <= MAX_LENGTH
        assert words[-1] == "."
        for clause in src.split(" ; "):
            slots = dict(zip(clause.split()[::2], clause.split()[1::2], strict=True))
            article = "an" if slots["color"][0] in "aeiou" else "a"
            assert f"{slots['name']} from {slots['city']} has {article} {slots['color']} {slots['object']}" in tgt


def test_tasks_use_independent_streams():
    copy = make_pairs(SyntheticTask.COPY, 5, seed=0)
    reverse = make_pairs(SyntheticTask.REVERSE, 5, seed=0)
    assert [src for src, _ in copy] != [src for src, _ in reverse]


def test_size_must_be_positive():
    with pytest.raises(ContractError):
        make_pairs(SyntheticTask.COPY, 0, seed=0)


def test_make_synthetic_writes_parallel_files(tmp_path):
    pairs = make_synthetic(SyntheticTask.REVERSE, 10, 1, tmp_path / "out")
    assert load_parallel(tmp_path / "out") == pairs
