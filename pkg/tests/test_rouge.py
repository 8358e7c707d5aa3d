from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgsum.rouge import lcs_length, rouge_l, rouge_n, rouge_reward
from oracles import naive_lcs, naive_rouge_n


def f1(p, r):
    return 2 * p * r / (p + r) if p + r else Fr(0)


Z = (Fr(0), Fr(0))
ONE = (Fr(1), Fr(1))

# (candidate, reference, ROUGE-1 (P, R), ROUGE-2 (P, R), ROUGE-L (P, R)), counted by hand
FIXTURES = [
    ("the cat sat", "the cat ran", (Fr(2, 3), Fr(2, 3)), (Fr(1, 2), Fr(1, 2)), (Fr(2, 3), Fr(2, 3))),
    ("a b c d", "a x c y", (Fr(1, 2), Fr(1, 2)), Z, (Fr(1, 2), Fr(1, 2))),
    ("the quick brown fox", "the quick brown fox", ONE, ONE, ONE),
    ("a b", "c d", Z, Z, Z),
    ("", "a b", Z, Z, Z),
    ("the the the", "the cat", (Fr(1, 3), Fr(1, 2)), Z, (Fr(1, 3), Fr(1, 2))),
    ("The Cat", "the cat", ONE, ONE, ONE),
    ("a b a b", "a b", (Fr(1, 2), Fr(1)), (Fr(1, 3), Fr(1)), (Fr(1, 2), Fr(1))),
    ("b a", "a b", ONE, Z, (Fr(1, 2), Fr(1, 2))),
    ("a", "a b c", (Fr(1), Fr(1, 3)), Z, (Fr(1), Fr(1, 3))),
    ("a b c d e", "a c e", (Fr(3, 5), Fr(1)), Z, (Fr(3, 5), Fr(1))),
    ("x y z", "z y x", ONE, Z, (Fr(1, 3), Fr(1, 3))),
    ("a b c a b", "a b a b c", ONE, (Fr(3, 4), Fr(3, 4)), (Fr(4, 5), Fr(4, 5))),
    ("the cat is on the mat", "the cat sat on the mat", (Fr(5, 6), Fr(5, 6)), (Fr(3, 5), Fr(3, 5)), (Fr(5, 6), Fr(5, 6))),
    ("police killed the gunman", "police kill the gunman", (Fr(3, 4), Fr(3, 4)), (Fr(1, 3), Fr(1, 3)), (Fr(3, 4), Fr(3, 4))),
    ("a a a a", "a a", (Fr(1, 2), Fr(1)), (Fr(1, 3), Fr(1)), (Fr(1, 2), Fr(1))),
    ("a b", "a b c d e f", (Fr(1), Fr(1, 3)), (Fr(1), Fr(1, 5)), (Fr(1), Fr(1, 3))),
    ("c d e f a b", "a b c d", (Fr(2, 3), Fr(1)), (Fr(2, 5), Fr(2, 3)), (Fr(1, 3), Fr(1, 2))),
    ("", "", Z, Z, Z),
    ("a b c", "", Z, Z, Z),
]

assert len(FIXTURES) == 20


def check(score, expected):
    p, r = expected
    assert score.precision == pytest.approx(float(p), abs=1e-9)
    assert score.recall == pytest.approx(float(r), abs=1e-9)
    assert score.f1 == pytest.approx(float(f1(p, r)), abs=1e-9)


@pytest.mark.parametrize("cand,ref,r1,r2,rl", FIXTURES, ids=[f"{c!r}~{r!r}" for c, r, *_ in FIXTURES])
def test_hand_computed_fixture(cand, ref, r1, r2, rl):
    c, r = cand.split(), ref.split()
    check(rouge_n(c, r, 1), r1)
    check(rouge_n(c, r, 2), r2)
    check(rouge_l(c, r), rl)


def test_headline_cases():
    assert rouge_n("the cat sat".split(), "the cat ran".split(), 1).f1 == pytest.approx(2 / 3, abs=1e-12)
    s = rouge_l("a b c d".split(), "a x c y".split())
    assert (s.precision, s.recall) == (0.5, 0.5)


def test_reward_mixtures():
    c, r = "the cat is on the mat".split(), "the cat sat on the mat".split()
    r2, rl = rouge_n(c, r, 2).f1, rouge_l(c, r).f1
    r1 = rouge_n(c, r, 1).f1
    assert rouge_reward(c, r, 0.0, 0.75) == pytest.approx(0.75 * r2 + 0.25 * rl, abs=1e-12)
    assert rouge_reward(c, r, 0.33, 0.33) == pytest.approx(0.33 * r1 + 0.33 * r2 + 0.34 * rl, abs=1e-12)
    for g1, g2 in [(0, 0), (1, 0), (0.2, 0.5), (0.33, 0.33)]:
        assert rouge_reward(r, r, g1, g2) == pytest.approx(1.0)


@pytest.mark.parametrize("g1,g2", [(-0.1, 0.5), (0.5, -0.1), (0.6, 0.6)])
def test_invalid_weights_rejected(g1, g2):
    with pytest.raises(ValueError):
        rouge_reward(["a"], ["a"], g1, g2)


def test_order_sensitivity():
    ref = "the cat sat on the mat".split()
    shuffled = "mat the on sat cat the".split()
    assert rouge_n(shuffled, ref, 1).f1 == 1.0
    assert rouge_n(shuffled, ref, 2).f1 < 1.0
    assert rouge_l(shuffled, ref).f1 < 1.0


words = st.lists(st.sampled_from(["a", "b", "c", "d", "A", "e"]), max_size=12)


@settings(max_examples=200, deadline=None)
@given(c=words, r=words)
def test_agrees_with_naive_implementation(c, r):
    for n in (1, 2):
        s = rouge_n(c, r, n)
        p, rec, f = naive_rouge_n(c, r, n)
        assert (s.precision, s.recall) == pytest.approx((p, rec), abs=1e-12)
        assert s.f1 == pytest.approx(f, abs=1e-12)
    assert lcs_length([t.lower() for t in c], [t.lower() for t in r]) == naive_lcs([t.lower() for t in c], [t.lower() for t in r])


@settings(max_examples=200, deadline=None)
@given(c=words, r=words)
def test_scores_bounded(c, r):
    for s in (rouge_n(c, r, 1), rouge_n(c, r, 2), rouge_l(c, r)):
        for v in (s.precision, s.recall, s.f1):
            assert 0.0 <= v <= 1.0
        assert s.f1 <= max(s.precision, s.recall) + 1e-12


@settings(max_examples=200, deadline=None)
@given(c=words, r=words, data=st.data())
def test_rouge1_order_invariant_and_recall_monotone(c, r, data):
    perm = data.draw(st.permutations(c))
    assert rouge_n(perm, r, 1) == rouge_n(c, r, 1)
    if r:
        tok = data.draw(st.sampled_from(r))
        assert rouge_n(c + [tok], r, 1).recall >= rouge_n(c, r, 1).recall
