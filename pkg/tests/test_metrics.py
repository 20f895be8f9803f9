import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from captionmcdm.metrics import bleu, evaluate_corpus, lcs_length, rouge_l, sentence_bleu_smoothed

import oracles


def toks(s):
    return s.split()


class TestBleu:
    def test_self_match(self):
        c = toks("a man rides a red bike")
        assert bleu([c], [[c]]) == [1.0, 1.0, 1.0, 1.0]

    def test_disjoint(self):
        assert bleu([toks("x y z w")], [[toks("a b c d")]]) == [0.0, 0.0, 0.0, 0.0]

    def test_brevity_penalty(self):
        scores = bleu([toks("the cat")], [[toks("the cat sat")]], max_n=1)
        assert scores[0] == pytest.approx(math.exp(-0.5), abs=1e-12)

    def test_clipping(self):
        # "the" appears once in the reference, so only one of seven counts
        scores = bleu([toks("the the the the the the the")], [[toks("the cat is on the mat")], ], max_n=1)
        assert scores[0] == pytest.approx(2 / 7)

    def test_closest_reference_length(self):
        cand = toks("a b c d")
        refs = [toks("a b c d e f g h"), toks("a b c d e")]
        # r = 5 (closest), c = 4
        assert bleu([cand], [refs], max_n=1)[0] == pytest.approx(math.exp(1 - 5 / 4))

    def test_corpus_pooling_not_mean(self):
        cands = [toks("a b c d"), toks("x y z w")]
        refs = [[toks("a b c d")], [toks("x q z w")]]
        got = bleu(cands, refs, max_n=1)[0]
        assert got == pytest.approx(7 / 8)

    def test_errors(self):
        with pytest.raises(ValueError):
            bleu([], [])
        with pytest.raises(ValueError):
            bleu([toks("a")], [[toks("a")]], max_n=5)


class TestRouge:
    def test_identical(self):
        assert rouge_l(toks("a b c"), [toks("a b c")]) == pytest.approx(1.0)

    def test_disjoint(self):
        assert rouge_l(toks("a b c"), [toks("x y")]) == 0.0

    def test_hand(self):
        assert rouge_l(toks("a b c"), [toks("a x c")]) == pytest.approx(2 / 3, abs=1e-12)

    def test_beta_weighting(self):
        # P = 2/2, R = 2/4
        p, r, b2 = 1.0, 0.5, 1.2**2
        want = (1 + b2) * p * r / (r + b2 * p)
        assert rouge_l(toks("a b"), [toks("a b c d")]) == pytest.approx(want, abs=1e-12)

    def test_empty_candidate(self):
        assert rouge_l([], [toks("a")]) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from("abcde"), max_size=30), st.lists(st.sampled_from("abcde"), max_size=30))
def test_lcs_matches_dp_oracle(a, b):
    assert lcs_length(a, b) == oracles.lcs(a, b)


sentences = st.lists(st.sampled_from("abcdef"), min_size=1, max_size=12)


@settings(max_examples=200, deadline=None)
@given(sentences, st.lists(sentences, min_size=1, max_size=3))
def test_single_sentence_bounds_and_power_monotone(cand, refs):
    scores = bleu([cand], [refs])
    assert all(0.0 <= s <= 1.0 for s in scores)
    # BLEU-n itself may rise with n, but BLEU-n ** n gains one factor bp * p_n <= 1 per order
    powered = [s ** (k + 1) for k, s in enumerate(scores)]
    assert all(powered[k + 1] <= powered[k] + 1e-12 for k in range(3))
    assert 0.0 <= rouge_l(cand, refs) <= 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(sentences, st.lists(sentences, min_size=1, max_size=2)), min_size=1, max_size=4),
       st.permutations("abcdef"))
def test_relabeling_invariance(pairs, perm):
    relabel = dict(zip("abcdef", perm))
    cands = [c for c, _ in pairs]
    refs = [r for _, r in pairs]
    cands2 = [[relabel[t] for t in c] for c in cands]
    refs2 = [[[relabel[t] for t in r] for r in rs] for rs in refs]
    assert bleu(cands, refs) == bleu(cands2, refs2)
    assert [rouge_l(c, r) for c, r in zip(cands, refs)] == [rouge_l(c, r) for c, r in zip(cands2, refs2)]


def test_bleu2_can_exceed_bleu1():
    # unigram precision 3/4, bigram precision 3/3
    scores = bleu([list("aaba")], [[list("aa"), list("aba")]], max_n=2)
    assert scores[1] > scores[0]


def test_corpus_bleu_need_not_be_monotone_in_n():
    # a one-token miss adds to the unigram denominator only
    scores = bleu([["z"], ["a", "b"]], [[["q"]], [["a", "b"]]], max_n=2)
    assert scores[1] > scores[0]


def test_smoothed_rows_and_report():
    rep = evaluate_corpus(["i"], [toks("a b")], [[toks("a b")]])
    assert rep.bleu == [1.0, 1.0, 0.0, 0.0]
    row = rep.per_image[0]
    assert row["bleu_4_smoothed"] == pytest.approx(1.0)
    d = rep.to_dict()
    assert [k for k in d if k.startswith("bleu_")] == ["bleu_1", "bleu_2", "bleu_3", "bleu_4"]
    assert sentence_bleu_smoothed(toks("x y"), [toks("a b")])[0] > 0.0
