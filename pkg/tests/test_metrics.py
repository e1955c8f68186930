import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from drastoch.errors import DimensionMismatch, InsufficientRuns, UnknownItem
from drastoch.metrics import (
    Level,
    OutputVector,
    answer_discordance,
    l2_normalize,
    mean_pairwise_cosine,
    semantic_vectorize,
    tv_estimate,
    tv_groups,
    tv_jackknife_se,
    tv_leave_one_out,
    tv_result,
    tv_support_size,
)

from oracles import naive_tv, sample_variance


def one_hot(ids, k):
    return [OutputVector.one_hot(i, k) for i in ids]


def omission_pair(m):
    a = np.ones(m)
    b = np.ones(m)
    b[-1] = 0.0
    return [a, b]


binary_runs = st.integers(2, 12).flatmap(
    lambda n: st.integers(1, 20).flatmap(
        lambda d: hnp.arrays(np.float64, (n, d), elements=st.sampled_from([0.0, 1.0]))
    )
)
real_runs = st.integers(2, 10).flatmap(
    lambda n: st.integers(1, 12).flatmap(
        lambda d: hnp.arrays(np.float64, (n, d), elements=st.floats(0, 1, allow_nan=False))
    )
)


class TestNormalize:
    def test_unit_pair(self):
        np.testing.assert_allclose(l2_normalize(np.array([1.0, 1, 0, 0])), [0.70710678, 0.70710678, 0, 0])

    def test_tiny_row_not_zeroed(self):
        x = np.array([[4.4e-162, 0.0], [0.0, 1e-300]])
        from drastoch.metrics import normalize_rows

        np.testing.assert_array_equal(normalize_rows(x), [[1.0, 0.0], [0.0, 1.0]])

    def test_zero_stays_zero(self):
        assert list(l2_normalize(np.zeros(3))) == [0.0, 0.0, 0.0]

    def test_one_hot_fixed_point(self):
        v = OutputVector.one_hot(1, 4)
        assert np.array_equal(l2_normalize(v).entries, v.entries)


class TestTvEstimate:
    def test_one_hot_aab(self):
        assert tv_estimate(one_hot([0, 0, 1], 2)) == pytest.approx(2 / 3, abs=1e-12)

    def test_overlapping_sets(self):
        vs = [OutputVector.from_set({0, 1}, 3), OutputVector.from_set({1, 2}, 3)]
        assert tv_estimate(vs) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 7])
    def test_identical_runs(self, n):
        assert tv_estimate([np.array([1.0, 0, 1])] * n) == 0.0

    @pytest.mark.parametrize("m, expected", [(100, 0.005), (10, 0.051)])
    def test_single_omission(self, m, expected):
        assert round(tv_estimate(omission_pair(m)), 3) == expected

    def test_scale_sensitivity(self):
        vals = [tv_estimate(omission_pair(m)) for m in (5, 10, 20, 50, 100)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_one_run_is_an_error(self):
        with pytest.raises(InsufficientRuns):
            tv_estimate([np.ones(3)])

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionMismatch):
            tv_estimate([np.ones(3), np.ones(4)])

    def test_mixed_levels(self):
        with pytest.raises(DimensionMismatch):
            tv_estimate([OutputVector(Level.ANSWER, np.ones(2)), OutputVector(Level.FINDING, np.ones(2))])

    def test_zero_run_against_unit(self):
        # an empty run sits at distance 1 from any unit vector
        assert tv_estimate([np.zeros(3), np.array([1.0, 0, 0])]) == pytest.approx(0.5)


class TestSupportAndResult:
    def test_two_supports(self):
        vs = [OutputVector.from_set(range(3), 6), OutputVector.from_set(range(5), 6)]
        assert tv_support_size(vs) == pytest.approx(2.0)

    def test_equal_supports(self):
        vs = [OutputVector.from_set({i}, 6) for i in range(3)]
        assert tv_support_size([OutputVector.from_set({0, 1, 2, 3}, 6)] * 3) == 0.0
        assert tv_support_size(vs) == 0.0

    def test_mean_support(self):
        vs = [OutputVector.from_set(range(k), 100) for k in (88, 92, 92)]
        r = tv_result(vs)
        assert r.mean_support == pytest.approx(90.667, abs=1e-3)
        assert r.support_tv == pytest.approx(5.333, abs=1e-3)
        assert r.n_runs == 3

    @given(binary_runs)
    def test_support_tv_is_sample_variance(self, x):
        sizes = [float(np.count_nonzero(r)) for r in x]
        assert tv_support_size(x) == pytest.approx(sample_variance(sizes), abs=1e-9)


class TestDiscordanceAndCosine:
    @pytest.mark.parametrize("labels, expected", [("AAB", 2 / 3), ("AAAA", 0.0), ("ABC", 1.0)])
    def test_discordance(self, labels, expected):
        assert answer_discordance(list(labels)) == pytest.approx(expected, abs=1e-12)

    def test_cosine_examples(self):
        assert mean_pairwise_cosine([OutputVector.from_set({0, 1}, 3), OutputVector.from_set({1, 2}, 3)]) == pytest.approx(0.5)
        assert mean_pairwise_cosine([np.array([0.6, 0.8])] * 3) == pytest.approx(1.0)
        assert mean_pairwise_cosine([np.array([1.0, 0]), np.array([0.0, 1])]) == 0.0

    def test_insufficient(self):
        for fn in (answer_discordance, mean_pairwise_cosine):
            with pytest.raises(InsufficientRuns):
                fn([np.ones(2)] if fn is mean_pairwise_cosine else ["A"])


class TestSemantic:
    SIM = {frozenset({"cat", "dog"}): 0.8}

    def sim(self, a, b):
        return 1.0 if a == b else self.SIM.get(frozenset({a, b}), 0.0)

    def test_cat(self):
        v = semantic_vectorize({"cat"}, ["cat", "dog", "car"], self.sim)
        assert list(v.entries) == [1.0, 0.8, 0.0]

    def test_dog_car(self):
        v = semantic_vectorize({"dog", "car"}, ["cat", "dog", "car"], self.sim)
        assert list(v.entries) == [0.8, 1.0, 1.0]

    def test_identity_similarity_is_binary(self):
        v = semantic_vectorize({"b"}, ["a", "b", "c"], lambda a, b: float(a == b))
        assert list(v.entries) == [0.0, 1.0, 0.0]

    def test_empty_and_unknown(self):
        assert not semantic_vectorize(set(), ["a"], self.sim).entries.any()
        with pytest.raises(UnknownItem):
            semantic_vectorize({"zebra"}, ["a"], self.sim)


class TestProperties:
    @given(real_runs)
    @example(np.array([[0.0], [2.2250738585072014e-308]]))
    def test_matches_naive_loop(self, x):
        assert tv_estimate(x) == pytest.approx(naive_tv(x), abs=1e-12)
        assert tv_estimate(x, normalize=False) == pytest.approx(naive_tv(x, False), rel=1e-12, abs=1e-12)

    @given(real_runs)
    def test_range(self, x):
        assert -1e-15 <= tv_estimate(x) <= 1.0 + 1e-12

    @given(real_runs, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, x, rnd):
        perm = list(range(x.shape[0]))
        rnd.shuffle(perm)
        assert tv_estimate(x[perm]) == tv_estimate(x)
        assert tv_support_size(x[perm]) == tv_support_size(x)

    @given(real_runs)
    def test_cosine_identity(self, x):
        x = x[np.linalg.norm(x, axis=1) > 0]
        if x.shape[0] >= 2:
            assert tv_estimate(x) == pytest.approx(1 - mean_pairwise_cosine(x), abs=1e-12)

    @given(st.lists(st.integers(0, 4), min_size=2, max_size=20))
    def test_discordance_identity(self, labels):
        assert tv_estimate(one_hot(labels, 5)) == pytest.approx(answer_discordance(labels), abs=1e-12)

    @given(st.integers(1, 5).flatmap(lambda g: st.integers(2, 6).flatmap(
        lambda n: hnp.arrays(np.float64, (g, n, 3), elements=st.floats(0, 1)))))
    def test_groups_match_pairwise(self, x):
        got = tv_groups(x)
        for i in range(x.shape[0]):
            assert got[i] == pytest.approx(naive_tv(x[i], False), abs=1e-12)

    @given(st.integers(3, 8).flatmap(lambda n: hnp.arrays(np.float64, (n, 3), elements=st.floats(0, 1))))
    def test_leave_one_out(self, x):
        loo = tv_leave_one_out(x)
        for i in range(x.shape[0]):
            assert loo[i] == pytest.approx(naive_tv(np.delete(x, i, axis=0), False), abs=1e-10)


def test_jackknife_se_positive():
    x = np.random.default_rng(1).random((30, 4))
    se = tv_jackknife_se(x)
    assert 0 < se < tv_estimate(x, normalize=False)
    with pytest.raises(InsufficientRuns):
        tv_jackknife_se(x[:2])


def test_unbiased_small():
    # closed-form trace for a two-point law: p(1-p) * |e1 - e2|^2
    rng = np.random.default_rng(5)
    p = 0.3
    est = []
    for _ in range(3000):
        ids = (rng.random(4) < p).astype(int)
        est.append(tv_estimate(np.eye(2)[ids], normalize=False))
    se = np.std(est, ddof=1) / math.sqrt(len(est))
    assert abs(np.mean(est) - 2 * p * (1 - p)) < 3 * se
