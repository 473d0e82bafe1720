import itertools
import math
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core._exceptions import ContractError
from src.core.evaluation.metrics import (
    align_unigrams,
    bleu_n,
    corpus_bleu,
    count_chunks,
    distinct_n,
    lcs_length,
    meteor_simplified,
    modified_precision,
    rouge_l,
    rouge_n,
)
from src.models.evaluation_models import EvalPair

tokens = st.lists(st.sampled_from("abc"), max_size=8)


def brute_lcs(a: tuple, b: tuple) -> int:
    @lru_cache(maxsize=None)
    def go(i: int, j: int) -> int:
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def _all_sequences(max_len: int) -> list[tuple[str, ...]]:
    return [seq for n in range(max_len + 1) for seq in itertools.product("abc", repeat=n)]


class TestRouge:
    def test_identical_sequences_score_one(self):
        assert rouge_n("a b c".split(), "a b c".split(), 2).f1 == 1.0
        assert rouge_l("a b c".split(), "a b c".split()).f1 == 1.0

    def test_disjoint_sequences_score_zero(self):
        assert rouge_n(["a"], ["b"], 1).f1 == 0.0

    def test_unigram_overlap(self):
        score = rouge_n("a b c".split(), "a c d".split(), 1)
        assert score.precision == pytest.approx(2 / 3)
        assert score.recall == pytest.approx(2 / 3)

    def test_lcs_scores(self):
        score = rouge_l("a x b".split(), "a b".split())
        assert score.recall == 1.0
        assert score.precision == pytest.approx(2 / 3)

    def test_empty_hypothesis_scores_zero(self):
        assert rouge_l([], ["a"]).f1 == 0.0
        assert rouge_n([], ["a"], 1).f1 == 0.0

    def test_n_must_be_positive(self):
        with pytest.raises(ContractError):
            rouge_n(["a"], ["a"], 0)

    def test_lcs_matches_brute_force_on_every_short_pair(self):
        sequences = _all_sequences(4)
        for a, b in itertools.product(sequences, repeat=2):
            assert lcs_length(a, b) == brute_lcs(a, b)

    @given(tokens, tokens)
    @settings(max_examples=300, deadline=None)
    def test_lcs_matches_brute_force_up_to_length_eight(self, a, b):
        assert lcs_length(a, b) == brute_lcs(tuple(a), tuple(b))


class TestBleu:
    def test_identical_scores_one(self):
        assert bleu_n("a b c d".split(), "a b c d".split(), 2) == pytest.approx(1.0)

    def test_clipping(self):
        assert modified_precision("the the the".split(), "the cat".split(), 1) == (1, 3)
        assert bleu_n("the the the".split(), "the cat".split(), 1) == pytest.approx(1 / 3)

    def test_brevity_penalty_for_short_hypotheses(self):
        score = bleu_n("a b".split(), "a b c d".split(), 1)
        assert score == pytest.approx(math.exp(-1))
        assert score < 1.0

    def test_zero_precision_is_floored(self):
        # no bigram matches: floor 1 / (2 * 2) for the bigram precision
        score = bleu_n("a b".split(), "b a".split(), 2)
        assert score == pytest.approx((1.0 * 0.25) ** 0.5)

    def test_empty_hypothesis_scores_zero(self):
        assert bleu_n([], ["a"]) == 0.0

    def test_corpus_bleu_sums_counts_before_averaging(self):
        pairs = [EvalPair(hypothesis=["a", "b"], reference=["a", "b"]), EvalPair(hypothesis=["c"], reference=["d"])]
        # unigram precision over the corpus is 2/3
        assert corpus_bleu(pairs, 1) == pytest.approx(2 / 3)

    def test_corpus_bleu_of_identical_pairs_is_one(self):
        pairs = [EvalPair(hypothesis=list("abcd"), reference=list("abcd"))] * 3
        assert corpus_bleu(pairs, 4) == pytest.approx(1.0)


class TestMeteor:
    def test_identical_sequence_has_one_chunk(self):
        m = 4
        assert meteor_simplified(list("abcd"), list("abcd")) == pytest.approx(1 - 0.5 / m**3)

    def test_swapped_pair(self):
        assert meteor_simplified(["a", "b"], ["b", "a"]) == pytest.approx(0.5)

    def test_zero_overlap(self):
        assert meteor_simplified(["a"], ["b"]) == 0.0
        assert meteor_simplified([], ["b"]) == 0.0

    def test_recall_weighs_more_than_precision(self):
        """Missing reference words cost more than extra hypothesis words."""
        extra = meteor_simplified("a b c d x y".split(), "a b c d".split())
        missing = meteor_simplified("a b c d".split(), "a b c d x y".split())
        assert missing < extra

    def test_alignment_is_greedy_leftmost(self):
        assert align_unigrams(["a", "a"], ["b", "a", "a"]) == [(0, 1), (1, 2)]
        assert count_chunks([(0, 1), (1, 2)]) == 1
        assert count_chunks([(0, 1), (1, 0)]) == 2


class TestDistinct:
    def test_all_unique(self):
        assert distinct_n([["a", "b"], ["c"]], 1) == 1.0

    def test_repeated_unigram(self):
        assert distinct_n([["a", "a", "a"]], 1) == pytest.approx(1 / 3)

    def test_n_longer_than_every_hypothesis(self):
        assert distinct_n([["a"], ["b", "c"]], 3) == 0.0

    @given(st.lists(tokens, max_size=5))
    @settings(max_examples=100, deadline=None)
    def test_permutation_invariant(self, hyps):
        assert distinct_n(hyps, 2) == distinct_n(list(reversed(hyps)), 2)


@given(tokens, tokens)
@settings(max_examples=200, deadline=None)
def test_scores_lie_in_the_unit_interval(hyp, ref):
    for score in (
        rouge_n(hyp, ref, 1).f1,
        rouge_n(hyp, ref, 2).f1,
        rouge_l(hyp, ref).f1,
        bleu_n(hyp, ref, 4),
        meteor_simplified(hyp, ref),
    ):
        assert 0.0 <= score <= 1.0
