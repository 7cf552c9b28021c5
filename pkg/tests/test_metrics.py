"""Metric unit fixtures (hand-derived), oracles and fuzz properties."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from empathykit.metrics import (
    MetricVector,
    bleu1,
    distinct1,
    mean_metric_vector,
    meteor,
    normalized_average,
    rouge_l,
    score_multi_reference,
    tokenize,
)
from test_kernels import brute_force_lcs

token_lists = st.lists(st.sampled_from(["a", "b", "c"]), max_size=10)


class TestTokenize:
    def test_cjk_chars_and_ascii_runs(self):
        assert tokenize("你好AI") == ["你", "好", "ai"]

    def test_empty(self):
        assert tokenize("") == []

    def test_ascii_runs_split_on_whitespace(self):
        assert tokenize("abc abc") == ["abc", "abc"]

    def test_punctuation_is_single_tokens(self):
        assert tokenize("好，ok！") == ["好", "，", "ok", "！"]

    def test_nfc_normalization_merges_combining_marks(self):
        # e + combining acute normalizes to a single scalar
        assert tokenize("é") == ["é"]

    def test_no_empty_tokens_and_deterministic(self):
        text = "焦虑anxiety123  \n你"
        tokens = tokenize(text)
        assert tokens == tokenize(text)
        assert all(tokens)


class TestBleu1:
    def test_identity(self):
        assert bleu1(["你", "好"], ["你", "好"]) == 1.0

    def test_two_of_three_overlap(self):
        assert bleu1(["a", "b", "c"], ["a", "b", "d"]) == pytest.approx(2 / 3)

    def test_brevity_penalty(self):
        assert bleu1(["a", "b"], ["a", "b", "c", "d"]) == pytest.approx(math.exp(-1.0))

    def test_empty_hypothesis(self):
        assert bleu1([], ["a"]) == 0.0

    def test_clipping_counts_repeats_once(self):
        assert bleu1(["a", "a", "a"], ["a", "b", "c"]) == pytest.approx(1 / 3)


class TestRougeL:
    def test_identity(self):
        assert rouge_l(["x", "y"], ["x", "y"]) == 1.0

    def test_swap_in_middle(self):
        assert rouge_l(["a", "b", "c", "d"], ["a", "c", "b", "d"]) == pytest.approx(0.75)

    def test_disjoint(self):
        assert rouge_l(["a"], ["b"]) == 0.0

    def test_empty_sides(self):
        assert rouge_l([], ["a"]) == 0.0
        assert rouge_l(["a"], []) == 0.0

    def test_exhaustive_small_alphabet_vs_brute_force(self):
        seqs = [()]
        alphabet = ("a", "b", "c")
        frontier = [()]
        for _ in range(4):
            frontier = [s + (t,) for s in frontier for t in alphabet]
            seqs.extend(frontier)
        for a in seqs:
            for b in seqs:
                expected = brute_force_lcs(a, b)
                if expected == 0:
                    assert rouge_l(a, b) == 0.0
                else:
                    p = expected / len(a)
                    r = expected / len(b)
                    assert rouge_l(a, b) == pytest.approx(2 * p * r / (p + r))

    def test_random_length_10_vs_brute_force(self):
        rng = np.random.default_rng(42)
        alphabet = ("a", "b", "c")
        for _ in range(1000):
            a = tuple(alphabet[i] for i in rng.integers(0, 3, size=rng.integers(0, 11)))
            b = tuple(alphabet[i] for i in rng.integers(0, 3, size=rng.integers(0, 11)))
            expected = brute_force_lcs(a, b)
            if expected == 0:
                assert rouge_l(a, b) == 0.0
            else:
                p = expected / len(a)
                r = expected / len(b)
                assert rouge_l(a, b) == pytest.approx(2 * p * r / (p + r))


class TestMeteor:
    def test_two_token_identity(self):
        assert meteor(["a", "b"], ["a", "b"]) == pytest.approx(0.9375)

    def test_disjoint(self):
        assert meteor(["a"], ["b"]) == 0.0

    def test_single_token_identity(self):
        assert meteor(["a"], ["a"]) == pytest.approx(0.5)

    def test_identity_closed_form(self):
        for m in range(1, 8):
            seq = [f"t{i}" for i in range(m)]
            assert meteor(seq, seq) == pytest.approx(1.0 - 0.5 / m**3)

    def test_alignment_is_one_to_one(self):
        # one 'a' in ref can match only one of the two in hyp
        assert meteor(["a", "a"], ["a"]) == pytest.approx(
            (10 * 0.5 * 1.0 / (1.0 + 9 * 0.5)) * (1 - 0.5)
        )


class TestDistinct1:
    def test_all_unique(self):
        assert distinct1(["a", "b", "c"]) == 1.0

    def test_half_unique(self):
        assert distinct1(["a", "a", "a", "b"]) == 0.5

    def test_empty(self):
        assert distinct1([]) == 0.0


class TestMultiReference:
    def test_duplicated_reference_equals_single(self):
        hyp = "你好呀朋友"
        ref = "你好朋友们"
        single = score_multi_reference(hyp, [ref])
        doubled = score_multi_reference(hyp, [ref, ref])
        assert doubled == single

    def test_mean_of_per_reference_scores(self):
        # ref1 scores b1 = 1.0, ref2 scores b1 = 0.5 (equal lengths, BP = 1)
        vec = score_multi_reference("你好", ["你好", "你坏"])
        assert vec.b1 == pytest.approx(0.75)

    def test_empty_refs_rejected(self):
        with pytest.raises(ValueError):
            score_multi_reference("hi", [])

    def test_reference_permutation_invariance(self):
        refs = ["我明白你的感受", "建议先休息一下", "你可以找人聊聊"]
        hyp = "我明白，你可以先休息"
        a = score_multi_reference(hyp, refs)
        b = score_multi_reference(hyp, list(reversed(refs)))
        assert a == b

    def test_navg_is_plain_mean(self):
        vec = MetricVector.from_scores(0.314, 0.375, 0.045, 0.314)
        assert vec.navg == pytest.approx((0.314 + 0.375 + 0.045 + 0.314) / 4)
        assert round(vec.navg, 3) == 0.262

    def test_mean_metric_vector_macro_average(self):
        v1 = MetricVector.from_scores(1.0, 1.0, 1.0, 1.0)
        v2 = MetricVector.from_scores(0.0, 0.5, 0.0, 0.0)
        avg = mean_metric_vector([v1, v2])
        assert avg.b1 == 0.5 and avg.d1 == 0.75
        assert avg.navg == pytest.approx(normalized_average(0.5, 0.75, 0.5, 0.5))


@given(token_lists, token_lists)
@settings(max_examples=300)
def test_metrics_stay_in_unit_interval(hyp, ref):
    for value in (bleu1(hyp, ref), rouge_l(hyp, ref), meteor(hyp, ref), distinct1(hyp)):
        assert 0.0 <= value <= 1.0


@given(token_lists, token_lists)
@settings(max_examples=200)
def test_rouge_matches_brute_force(hyp, ref):
    expected = brute_force_lcs(tuple(hyp), tuple(ref))
    if expected == 0:
        assert rouge_l(hyp, ref) == 0.0
    else:
        p, r = expected / len(hyp), expected / len(ref)
        assert rouge_l(hyp, ref) == pytest.approx(2 * p * r / (p + r))
