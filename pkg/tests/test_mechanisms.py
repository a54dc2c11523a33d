import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpsubstr.mechanisms import (BudgetExceededError, InvalidParameterError, NoiseSource,
                                 PrivacyBudget, budget_split, gaussian_max_error,
                                 gaussian_mechanism, gaussian_sample, gaussian_sigma,
                                 keyed_gaussian, laplace_max_error, laplace_mechanism,
                                 laplace_sample, sum_laplace_tail)


class TestNoiseSource:
    def test_replay(self):
        a = laplace_sample(1.0, NoiseSource(7).child("x"), size=50)
        b = laplace_sample(1.0, NoiseSource(7).child("x"), size=50)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = laplace_sample(1.0, NoiseSource(7).child("x"), size=50)
        b = laplace_sample(1.0, NoiseSource(7).child("y"), size=50)
        assert not np.array_equal(a, b)

    def test_keyed_noise_ignores_visit_order(self):
        r = NoiseSource(3).child("stage", 1)
        a = keyed_gaussian(1.0, r, [b"ab", b"ba", b"aa"])
        b = keyed_gaussian(1.0, r, [b"aa", b"ab"])
        assert a[0] == b[1] and a[2] == b[0]


class TestLaplace:
    def test_mean(self):
        x = laplace_sample(1.0, NoiseSource(11), size=100_000)
        # stderr = sqrt(2 / 1e5) ~ 0.0045; tolerance 4 stderr
        assert abs(x.mean()) < 0.02

    def test_scale_equivariance(self):
        a = laplace_sample(1.0, NoiseSource(5), size=100)
        b = laplace_sample(2.0, NoiseSource(5), size=100)
        assert np.allclose(b, 2 * a)

    @pytest.mark.parametrize("b", [0.0, -1.0])
    def test_rejects_bad_scale(self, b):
        with pytest.raises(InvalidParameterError):
            laplace_sample(b, NoiseSource(0))

    def test_zero_noise_identity(self):
        v = np.arange(5.0)
        out = laplace_mechanism(v, 2.0, 1.0, NoiseSource(0, zero_noise=True))
        assert np.array_equal(out, v)

    def test_scale_from_sensitivity(self):
        # 2 * ell with ell = 10 at eps = 1 gives scale 20
        a = laplace_mechanism(np.zeros(4), 20.0, 1.0, NoiseSource(9))
        b = laplace_sample(1.0, NoiseSource(9), size=4)
        assert np.allclose(a, 20 * b)

    def test_max_error_bound_empirical(self):
        k, beta, trials = 8, 0.1, 4000
        x = laplace_sample(1.0, NoiseSource(21), size=(trials, k))
        frac = np.mean(np.abs(x).max(axis=1) > laplace_max_error(k, 1.0, beta))
        assert frac <= beta + 3 * math.sqrt(beta * (1 - beta) / trials)


class TestGaussian:
    def test_variance(self):
        x = gaussian_sample(1.0, NoiseSource(12), size=100_000)
        assert abs(x.var() - 1) < 0.02

    def test_sum_of_normals(self):
        r = NoiseSource(13)
        x = gaussian_sample(1.0, r.child(0), size=100_000) + gaussian_sample(1.0, r.child(1), size=100_000)
        assert abs(x.var() - 2) < 0.04

    def test_tail(self):
        x = np.abs(gaussian_sample(1.0, NoiseSource(14), size=100_000))
        for t in (1.0, 2.0, 3.0):
            assert np.mean(x >= t) <= 2 * math.exp(-t * t / 2)

    def test_sigma_formula(self):
        s = gaussian_sigma(1.0, 0.5, 1e-6)
        expected = 2 * math.sqrt(2 * math.log(1.25e6))
        assert abs(s - expected) <= 2e-6 + 1e-12

    def test_rejects_large_epsilon(self):
        with pytest.raises(InvalidParameterError, match="split the budget"):
            gaussian_sigma(1.0, 1.0, 1e-6)

    def test_zero_noise_identity(self):
        v = np.arange(3.0)
        out = gaussian_mechanism(v, 1.0, 0.5, 1e-5, NoiseSource(0, zero_noise=True))
        assert np.array_equal(out, v)

    def test_max_error_bound_empirical(self):
        k, beta, trials, eps, delta = 8, 0.1, 4000, 0.5, 1e-5
        sigma = gaussian_sigma(1.0, eps, delta)
        x = gaussian_sample(sigma, NoiseSource(22), size=(trials, k))
        frac = np.mean(np.abs(x).max(axis=1) > gaussian_max_error(k, 1.0, eps, delta, beta))
        assert frac <= beta


class TestSumLaplaceTail:
    def test_value(self):
        assert sum_laplace_tail(1, 1.0, 2 / math.e ** 2) == pytest.approx(4 * math.sqrt(2))

    @settings(max_examples=50)
    @given(st.integers(1, 50), st.floats(0.1, 10), st.floats(0.001, 0.5))
    def test_monotone(self, k, b, beta):
        assert sum_laplace_tail(k + 1, b, beta) >= sum_laplace_tail(k, b, beta)
        assert sum_laplace_tail(k, 2 * b, beta) > sum_laplace_tail(k, b, beta)

    def test_empirical(self):
        k, b, beta, trials = 9, 1.0, 0.05, 10_000
        s = laplace_sample(b, NoiseSource(31), size=(trials, k)).sum(axis=1)
        frac = np.mean(np.abs(s) > sum_laplace_tail(k, b, beta))
        assert frac <= beta + 3 * math.sqrt(beta * (1 - beta) / trials)


class TestBudget:
    def test_thirds(self):
        kids = budget_split(PrivacyBudget(3.0), [1 / 3] * 3)
        assert [k.epsilon for k in kids] == pytest.approx([1.0, 1.0, 1.0])

    def test_pure_children_stay_pure(self):
        kids = PrivacyBudget(1.0, 0.0).split([0.5, 0.5])
        assert all(k.delta == 0 for k in kids)

    def test_fourth_spend_rejected(self):
        b = PrivacyBudget(3.0)
        b.split([1 / 3] * 3)
        with pytest.raises(BudgetExceededError):
            b.spend(1.0)

    def test_overspend_child(self):
        c = PrivacyBudget(1.0).split([0.5])[0]
        c.spend(0.5)
        with pytest.raises(BudgetExceededError):
            c.spend(0.01)

    def test_ledger_conservation(self):
        b = PrivacyBudget(2.0, 1e-6)
        b.split([0.25, 0.5])
        assert b.spent_epsilon <= b.epsilon and b.spent_delta <= b.delta

    @pytest.mark.parametrize("kw", [dict(epsilon=0), dict(epsilon=1, delta=1),
                                    dict(epsilon=1, beta=0), dict(epsilon=1, cap=0)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidParameterError):
            PrivacyBudget(**kw)
