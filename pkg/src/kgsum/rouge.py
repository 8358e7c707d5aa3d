"""ROUGE-1/2/L over token lists (lowercased, no stemming, single reference)."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: float, n_candidate: int, n_reference: int) -> "RougeScore":
        p = overlap / n_candidate if n_candidate else 0.0
        r = overlap / n_reference if n_reference else 0.0
        return cls(p, r, f1_score(p, r))


ZERO = RougeScore(0.0, 0.0, 0.0)


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _lower(tokens: Sequence[str]) -> list[str]:
    return [t.lower() for t in tokens]


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int = 1) -> RougeScore:
    if n < 1:
        raise ValueError("n must be >= 1")
    cand, ref = ngrams(_lower(candidate), n), ngrams(_lower(reference), n)
    if not cand or not ref:
        return ZERO
    overlap = sum((cand & ref).values())
    return RougeScore.from_counts(overlap, sum(cand.values()), sum(ref.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """Summary-level LCS over the whole token sequences."""
    cand, ref = _lower(candidate), _lower(reference)
    if not cand or not ref:
        return ZERO
    return RougeScore.from_counts(lcs_length(cand, ref), len(cand), len(ref))


def check_weights(rouge1_weight: float, rouge2_weight: float) -> None:
    if rouge1_weight < 0 or rouge2_weight < 0 or rouge1_weight + rouge2_weight > 1 + 1e-12:
        raise ValueError(f"invalid ROUGE weights rouge1_weight={rouge1_weight}, rouge2_weight={rouge2_weight}")


def rouge_reward(candidate: Sequence[str], reference: Sequence[str], rouge1_weight: float, rouge2_weight: float) -> float:
    """``g1 * R1_F + g2 * R2_F + (1 - g1 - g2) * RL_F``."""
    check_weights(rouge1_weight, rouge2_weight)
    total = 0.0
    if rouge1_weight:
        total += rouge1_weight * rouge_n(candidate, reference, 1).f1
    if rouge2_weight:
        total += rouge2_weight * rouge_n(candidate, reference, 2).f1
    rest = 1.0 - rouge1_weight - rouge2_weight
    if rest > 0:
        total += rest * rouge_l(candidate, reference).f1
    return total


def rouge_all(candidate: Sequence[str], reference: Sequence[str]) -> dict[str, RougeScore]:
    return {
        "rouge-1": rouge_n(candidate, reference, 1),
        "rouge-2": rouge_n(candidate, reference, 2),
        "rouge-l": rouge_l(candidate, reference),
    }
