from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import law_moments, random_law, random_sum_fourth_by_enumeration, small_table_pairs
from cmbp import laws


def rng(seed=0):
    return np.random.default_rng(seed)


class TestSample:
    def test_deterministic_always_same(self):
        law = laws.deterministic((3, 0))
        g = rng()
        for _ in range(20):
            assert laws.sample(law, g).tolist() == [3, 0]

    def test_two_point_table_frequency(self):
        law = laws.table([(0, 0), (1, 1)], [0.5, 0.5])
        draws = laws.sample_many(law, 100_000, rng(1))
        freq = np.mean(np.all(draws == 1, axis=1))
        assert abs(freq - 0.5) <= 0.01

    def test_poisson_mean(self):
        draws = laws.sample_many(laws.poisson([2.0]), 100_000, rng(2))
        assert abs(draws.mean() - 2.0) <= 0.03

    def test_same_state_same_draw(self):
        law = laws.shifted(laws.poisson([1.5, 0.2]), (1, 0))
        assert laws.sample(law, rng(5)).tolist() == laws.sample(law, rng(5)).tolist()

    def test_sample_sum_aggregate_and_naive_agree_in_law(self):
        law = laws.table([(0, 1), (2, 0), (1, 1)], [0.2, 0.3, 0.5])
        g1, g2 = rng(3), rng(4)
        agg = np.array([laws.sample_sum(law, 40, g1) for _ in range(4000)])
        naive = np.array([laws.sample_sum(law, 40, g2, aggregate=False) for _ in range(4000)])
        mean = 40 * law.summary.mean
        sd = np.sqrt(40 * np.diag(law.summary.cov))
        for draws in (agg, naive):
            assert np.all(np.abs(draws.mean(axis=0) - mean) <= 6 * sd / np.sqrt(4000))

    def test_sample_sum_of_zero_copies(self):
        assert laws.sample_sum(laws.poisson([3.0, 1.0]), 0, rng()).tolist() == [0, 0]


class TestMoments:
    def test_deterministic(self):
        s = laws.moments(laws.deterministic((3, 0)))
        assert s.mean.tolist() == [3, 0]
        assert not s.cov.any() and not s.fourth_central.any()

    def test_uniform_signed(self):
        s = laws.moments(laws.table([-1, 0, 1], [1 / 3, 1 / 3, 1 / 3]))
        assert s.mean[0] == pytest.approx(0, abs=1e-15)
        assert s.cov[0, 0] == pytest.approx(2 / 3, rel=1e-14)
        assert s.fourth_central[0] == pytest.approx(2 / 3, rel=1e-14)

    def test_poisson_unit_rate_against_truncated_series(self):
        series = sum((k - 1) ** 4 * math.exp(-1) / math.factorial(k) for k in range(51))
        s = laws.moments(laws.poisson([1.0]))
        assert s.mean[0] == 1 and s.cov[0, 0] == 1
        assert s.fourth_central[0] == pytest.approx(series, rel=1e-12)
        assert s.fourth_central[0] == 4

    def test_bernoulli_vector_against_table(self):
        bv = laws.bernoulli_vector((2, 1), 0.3)
        tb = laws.table([(0, 0), (2, 1)], [0.7, 0.3])
        for a, b in zip((bv.summary.mean, bv.summary.cov, bv.summary.fourth_central),
                        (tb.summary.mean, tb.summary.cov, tb.summary.fourth_central)):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_table_with_bad_probs_rejected(self):
        with pytest.raises(ValueError):
            laws.table([0, 1], [0.5, 0.6])
        with pytest.raises(ValueError):
            laws.table([0, 1], [1.5, -0.5])
        with pytest.raises(ValueError):
            laws.table([0.5, 1], [0.5, 0.5])

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            laws.poisson([-1.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_shift_moves_mean_only(seed, dim):
    base = random_law(rng(seed), dim)
    off = rng(seed + 1).integers(-3, 4, size=dim)
    a, b = base.summary, laws.shifted(base, off).summary
    np.testing.assert_allclose(b.mean, a.mean + off, atol=1e-12)
    np.testing.assert_array_equal(b.cov, a.cov)
    np.testing.assert_array_equal(b.fourth_central, a.fourth_central)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_product_covariance_is_diagonal(seed, dim):
    g = rng(seed)
    law = laws.product([random_law(g, 1, depth=1) for _ in range(dim)])
    cov = law.summary.cov
    assert np.all(cov[~np.eye(dim, dtype=bool)] == 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_moment_summary_invariants(seed, dim):
    s = random_law(rng(seed), dim).summary
    np.testing.assert_allclose(s.cov, s.cov.T, atol=1e-12)
    assert np.linalg.eigvalsh(s.cov).min() >= -1e-10
    assert np.all(s.fourth_central >= 0)
    assert np.all(s.fourth_central >= np.diag(s.cov) ** 2 - 1e-10)


def _sample_check(law, n, seed):
    draws = laws.sample_many(law, n, rng(seed)).astype(float)
    s = law.summary
    d = law.dim
    # standard errors of mean, covariance entries and fourth central moments
    se_mean = np.sqrt(np.diag(s.cov) / n)
    assert np.all(np.abs(draws.mean(axis=0) - s.mean) <= 6 * se_mean + 1e-12)
    c = draws - s.mean
    for i in range(d):
        for j in range(d):
            prod = c[:, i] * c[:, j]
            se = prod.std() / np.sqrt(n)
            assert abs(prod.mean() - s.cov[i, j]) <= 6 * se + 1e-9
        q4 = c[:, i] ** 4
        assert abs(q4.mean() - s.fourth_central[i]) <= 6 * q4.std() / np.sqrt(n) + 1e-9


@pytest.mark.parametrize(
    "law",
    [
        laws.deterministic((2, 0, 1)),
        laws.table([(0, 0), (1, 2), (3, 1)], [0.25, 0.5, 0.25]),
        laws.table([-1, 0, 1], [1 / 3, 1 / 3, 1 / 3]),
        laws.poisson([0.5, 4.0]),
        laws.poisson([25.0]),
        laws.bernoulli_vector((2, 1), 0.3),
        laws.product([laws.poisson([1.0]), laws.table([0, 4], [0.75, 0.25])]),
        laws.shifted(laws.poisson([2.0, 0.5]), (0, 1)),
    ],
    ids=["deterministic", "table", "signed-table", "poisson", "poisson-large", "bernoulli", "product", "shifted"],
)
def test_sampled_moments_match_analytic(law):
    _sample_check(law, 1_000_000, 11)


@pytest.mark.parametrize(
    "law",
    [laws.poisson([0.7, 12.0]), laws.table([(0, 1), (2, 0)], [0.4, 0.6]), laws.bernoulli_vector((1, 3), 0.45),
     laws.shifted(laws.product([laws.poisson([0.3]), laws.deterministic([1])]), (1, 0))],
    ids=["poisson", "table", "bernoulli", "shifted-product"],
)
def test_kernel_single_draws_match_analytic(law):
    g = rng(21)
    n = 100_000
    draws = np.array([laws.sample(law, g) for _ in range(n)], dtype=float)
    s = law.summary
    assert np.all(np.abs(draws.mean(axis=0) - s.mean) <= 6 * np.sqrt(np.diag(s.cov) / n) + 1e-12)
    var = draws.var(axis=0)
    c4 = s.fourth_central - np.diag(s.cov) ** 2
    assert np.all(np.abs(var - np.diag(s.cov)) <= 6 * np.sqrt(np.maximum(c4, 0) / n) + 1e-9)


class TestFourthMomentRandomSum:
    def test_fair_sign_two_summands(self):
        assert laws.fourth_moment_random_sum(1, 1, 2, 0) == 8

    def test_fair_sign_random_count(self):
        assert laws.fourth_moment_random_sum(1, 1, 1, 1) == 4

    @pytest.mark.parametrize("mu, gamma", [(0, 0), (3, 2), (10.5, 7)])
    def test_zero_summand(self, mu, gamma):
        assert laws.fourth_moment_random_sum(0, 0, mu, gamma) == 0

    @pytest.mark.parametrize("args", [(-1, 1, 1, 1), (1, 0.5, 1, 1), (1, 1, -1, 1), (1, 1, 1, -0.1)])
    def test_preconditions(self, args):
        with pytest.raises(ValueError):
            laws.fourth_moment_random_sum(*args)

    def test_exhaustive_enumeration_oracle(self):
        pairs = small_table_pairs()
        assert len(pairs) == 200
        for a, b in pairs:
            _, s2, z = law_moments(a)
            mu, gam, _ = law_moments(b)
            got = laws.fourth_moment_random_sum(s2, z, mu, gam)
            assert isinstance(got, Fraction)
            assert got == random_sum_fourth_by_enumeration(a, b)


class TestSerialization:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 3))
    def test_round_trip(self, seed, dim):
        law = random_law(rng(seed), dim)
        back = laws.law_from_dict(law.to_dict())
        assert back.to_dict() == law.to_dict()
        np.testing.assert_array_equal(back.summary.cov, law.summary.cov)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError):
            laws.law_from_dict({"kind": "poisson", "params": {"rates": [1.0], "rate": 2}})
        with pytest.raises(ValueError):
            laws.law_from_dict({"kind": "gaussian", "params": {}})


def test_pad_keeps_moments_and_adds_zeros():
    law = laws.shifted(laws.table([(0, 1), (2, 0)], [0.5, 0.5]), (1, 1))
    padded = laws.pad(law, 3)
    np.testing.assert_allclose(padded.summary.mean, [*law.summary.mean, 0])
    np.testing.assert_allclose(padded.summary.cov[:2, :2], law.summary.cov)
    assert not padded.summary.cov[2].any()
