"""N-gram overlap metrics over token lists.

These are reference implementations: scores are not comparable digit-for-digit with the
official toolkits (no stemming, synonyms or multiple references).
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Hashable, Iterable, Sequence

from src.core._exceptions import ContractError
from src.models.evaluation_models import EvalPair, RougeScore

Tokens = Sequence[Hashable]

# Recall weight of the simplified METEOR harmonic mean: F = P*R / (alpha*P + (1-alpha)*R).
METEOR_ALPHA = 0.9
METEOR_PENALTY_WEIGHT = 0.5
METEOR_PENALTY_EXPONENT = 3


def ngrams(tokens: Tokens, n: int) -> Counter[tuple[Hashable, ...]]:
    if n < 1:
        raise ContractError(f"n must be at least 1, got {n}")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_overlap(hyp: Counter[tuple[Hashable, ...]], ref: Counter[tuple[Hashable, ...]]) -> int:
    return sum(min(count, ref[gram]) for gram, count in hyp.items())


def rouge_n(hyp: Tokens, ref: Tokens, n: int) -> RougeScore:
    """Clipped n-gram overlap as precision, recall and F1."""
    hyp_grams, ref_grams = ngrams(hyp, n), ngrams(ref, n)
    overlap = _clipped_overlap(hyp_grams, ref_grams)
    return RougeScore.from_counts(overlap, sum(hyp_grams.values()), sum(ref_grams.values()))


def lcs_length(a: Tokens, b: Tokens) -> int:
    """Longest common subsequence by dynamic programming, one row at a time."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            current.append(previous[j - 1] + 1 if x == y else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(hyp: Tokens, ref: Tokens) -> RougeScore:
    return RougeScore.from_counts(lcs_length(hyp, ref), len(hyp), len(ref))


def modified_precision(hyp: Tokens, ref: Tokens, n: int) -> tuple[int, int]:
    """(clipped matches, hypothesis n-gram count) for order n."""
    hyp_grams = ngrams(hyp, n)
    return _clipped_overlap(hyp_grams, ngrams(ref, n)), sum(hyp_grams.values())


def _bleu_from_counts(matches: Sequence[int], totals: Sequence[int], hyp_len: int, ref_len: int) -> float:
    if hyp_len == 0:
        return 0.0
    floor = 1.0 / (2 * hyp_len)
    log_precision = 0.0
    for match, total in zip(matches, totals, strict=True):
        precision = match / total if total else 0.0
        log_precision += math.log(precision if precision > 0 else floor)
    brevity = math.exp(1.0 - ref_len / hyp_len) if hyp_len < ref_len else 1.0
    return min(1.0, brevity * math.exp(log_precision / len(matches)))


def bleu_n(hyp: Tokens, ref: Tokens, n: int = 4) -> float:
    """Sentence BLEU: geometric mean of clipped precisions 1..n times the brevity penalty.

    A zero precision is floored at 1 / (2 |hyp|).
    """
    if n < 1:
        raise ContractError(f"n must be at least 1, got {n}")
    counts = [modified_precision(hyp, ref, order) for order in range(1, n + 1)]
    return _bleu_from_counts([m for m, _ in counts], [t for _, t in counts], len(hyp), len(ref))


def corpus_bleu(pairs: Iterable[EvalPair], n: int = 4) -> float:
    """BLEU with counts summed over the corpus before the geometric mean."""
    if n < 1:
        raise ContractError(f"n must be at least 1, got {n}")
    matches, totals = [0] * n, [0] * n
    hyp_len = ref_len = 0
    for pair in pairs:
        hyp_len += len(pair.hypothesis)
        ref_len += len(pair.reference)
        for order in range(1, n + 1):
            match, total = modified_precision(pair.hypothesis, pair.reference, order)
            matches[order - 1] += match
            totals[order - 1] += total
    return _bleu_from_counts(matches, totals, hyp_len, ref_len)


def align_unigrams(hyp: Tokens, ref: Tokens) -> list[tuple[int, int]]:
    """Exact-match alignment: each hypothesis token takes the leftmost unused equal reference token."""
    used = [False] * len(ref)
    alignment = []
    for i, token in enumerate(hyp):
        for j, candidate in enumerate(ref):
            if not used[j] and candidate == token:
                used[j] = True
                alignment.append((i, j))
                break
    return alignment


def count_chunks(alignment: Sequence[tuple[int, int]]) -> int:
    """Runs of matches adjacent in both sequences."""
    chunks = 0
    previous: tuple[int, int] | None = None
    for i, j in alignment:
        if previous is None or i != previous[0] + 1 or j != previous[1] + 1:
            chunks += 1
        previous = (i, j)
    return chunks


def meteor_simplified(hyp: Tokens, ref: Tokens) -> float:
    """Recall-weighted unigram F-mean times a fragmentation penalty; exact matches only."""
    alignment = align_unigrams(hyp, ref)
    matches = len(alignment)
    if matches == 0:
        return 0.0
    precision, recall = matches / len(hyp), matches / len(ref)
    f_mean = precision * recall / (METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall)
    penalty = METEOR_PENALTY_WEIGHT * (count_chunks(alignment) / matches) ** METEOR_PENALTY_EXPONENT
    return f_mean * (1 - penalty)


def distinct_n(hyps: Iterable[Tokens], n: int) -> float:
    """Unique n-grams over all n-grams in the hypothesis corpus; 0 when there are none."""
    seen: Counter[tuple[Hashable, ...]] = Counter()
    for hyp in hyps:
        seen.update(ngrams(hyp, n))
    total = sum(seen.values())
    return len(seen) / total if total else 0.0
