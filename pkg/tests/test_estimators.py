import numpy as np
import pytest
from scipy import optimize, stats

from oracles import golden_section, sample_objective
from saabench.distributions import GaussianMixture2, ScaledBeta
from saabench.estimators import (
    BaggingSpec,
    KernelSpec,
    MleFamily,
    bag_decision,
    beta_loglik,
    bootstrap_moments,
    fit_gaussian_mixture,
    fit_scaled_beta,
    kernel_decision,
    kernel_moments,
    mixture_loglik,
    mle_decision,
    sample_kernel_density,
    saa_decision,
    scott_bandwidth,
)
from saabench.exceptions import DegenerateBandwidthError, EmptySampleError
from saabench.quadratic import QuadraticCost, builtin_costs, minimize_moments, sample_moments

MIX = MleFamily(family="gaussian_mixture_2")


class TestSaa:
    def test_empty(self):
        with pytest.raises(EmptySampleError):
            saa_decision([], builtin_costs()[1])

    def test_single_point(self):
        cost = QuadraticCost(0.0, 0.0, 2.0)
        # x^2 + 2*x*y at y = 1 -> x = -1
        assert saa_decision([1.0], cost) == pytest.approx(-1.0)


class TestBagging:
    def test_constant_sample_equals_saa(self):
        cost = builtin_costs()[4]
        s = np.full(10, 0.3)
        x = bag_decision(s, cost, BaggingSpec(), np.random.default_rng(0))
        assert x == saa_decision(s, cost)

    def test_resample_shapes(self):
        m1, m2 = bootstrap_moments(np.arange(10.0), BaggingSpec(B=7), np.random.default_rng(0))
        assert m1.shape == m2.shape == (7,)

    def test_resamples_drawn_from_sample(self):
        s = np.array([0.0, 1.0])
        m1, m2 = bootstrap_moments(s, BaggingSpec(B=200, M=1), np.random.default_rng(1))
        assert set(m1.tolist()) <= {0.0, 1.0}

    def test_without_replacement_full_size_is_saa(self):
        s = np.random.default_rng(2).uniform(-1, 1, 12)
        cost = builtin_costs()[2]
        x = bag_decision(s, cost, BaggingSpec(B=5, with_replacement=False), np.random.default_rng(3))
        assert x == pytest.approx(saa_decision(s, cost), abs=1e-12)

    def test_average_of_resample_solutions(self):
        s = np.random.default_rng(4).uniform(-1, 1, 8)
        cost = builtin_costs()[7]
        spec = BaggingSpec(B=30)
        rng_a, rng_b = np.random.default_rng(5), np.random.default_rng(5)
        x = bag_decision(s, cost, spec, rng_a)
        idx = rng_b.integers(0, s.size, size=(30, s.size))
        ref = []
        for row in idx:
            f = sample_objective(cost.alpha, cost.beta, cost.gamma, s[row])
            ref.append(golden_section(f, -10, 10, tol=1e-12))
        assert x == pytest.approx(np.mean(ref), abs=1e-6)

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            BaggingSpec(B=0)


class TestKernel:
    def test_scott_rule(self):
        s = np.random.default_rng(0).normal(size=32)
        assert scott_bandwidth(s) == pytest.approx(np.std(s, ddof=1) * 32 ** -0.2)

    def test_scott_matches_scipy_factor(self):
        s = np.random.default_rng(1).normal(size=50)
        kde = stats.gaussian_kde(s, bw_method="scott")
        assert scott_bandwidth(s) == pytest.approx(kde.factor * np.std(s, ddof=1))

    def test_degenerate(self):
        with pytest.raises(DegenerateBandwidthError):
            scott_bandwidth(np.ones(5))
        with pytest.raises(DegenerateBandwidthError):
            scott_bandwidth([0.3])

    def test_moment_identity(self):
        s = np.array([-0.5, 0.1, 0.7])
        mom = kernel_moments(s, KernelSpec("fixed", 0.2))
        base = sample_moments(s)
        assert mom.m1 == base.m1
        assert mom.m2 == pytest.approx(base.m2 + 0.04)

    def test_zero_bandwidth_is_saa(self):
        s = np.random.default_rng(2).uniform(-1, 1, 10)
        cost = builtin_costs()[1]
        assert kernel_decision(s, cost, KernelSpec("fixed", 0.0)) == saa_decision(s, cost)

    def test_smoothed_sampler(self):
        s = np.array([-1.0, 1.0])
        y = sample_kernel_density(s, 0.5, 200_000, np.random.default_rng(3))
        assert np.var(y) == pytest.approx(1.25, rel=0.02)

    def test_fixed_needs_h(self):
        with pytest.raises(ValueError):
            KernelSpec("fixed")


class TestBetaMle:
    def test_matches_scipy_when_interior(self):
        y = ScaledBeta(3.0, 4.0).sample(400, np.random.default_rng(0))
        fit = fit_scaled_beta(y)
        a, b, _, _ = stats.beta.fit((y + 1) / 2, floc=0, fscale=1)
        np.testing.assert_allclose([fit.alpha, fit.beta], [a, b], rtol=2e-3)

    def test_constraint_respected(self):
        y = ScaledBeta(0.5, 0.5).sample(200, np.random.default_rng(1))
        fit = fit_scaled_beta(y)
        assert fit.alpha >= 1.0 and fit.beta >= 1.0

    def test_beats_grid(self):
        y = ScaledBeta(2.0, 2.0).sample(10, np.random.default_rng(2))
        fit = fit_scaled_beta(y)
        best = beta_loglik(y, fit.alpha, fit.beta)
        grid = np.linspace(1.0, 15.0, 60)
        assert all(best >= beta_loglik(y, a, b) - 1e-6 for a in grid for b in grid)

    def test_loglik_matches_scipy(self):
        y = np.array([-0.3, 0.2, 0.8])
        ref = np.sum(stats.beta(2.5, 1.5, loc=-1, scale=2).logpdf(y))
        assert beta_loglik(y, 2.5, 1.5) == pytest.approx(ref)

    def test_large_sample_recovery(self):
        y = ScaledBeta(2.0, 5.0).sample(100_000, np.random.default_rng(3))
        fit = fit_scaled_beta(y)
        np.testing.assert_allclose([fit.alpha, fit.beta], [2.0, 5.0], rtol=0.03)


class TestMixtureMle:
    def test_large_sample_recovery(self):
        truth = GaussianMixture2(-0.5, 0.4, 0.15, 0.3, 0.6)
        y = truth.sample(20_000, np.random.default_rng(0))
        fit = fit_gaussian_mixture(y, MIX)
        got = sorted([(fit.mu1, fit.sigma1, fit.rho), (fit.mu2, fit.sigma2, 1 - fit.rho)])
        np.testing.assert_allclose(got[0], (-0.5, 0.15, 0.6), atol=0.03)
        np.testing.assert_allclose(got[1], (0.4, 0.3, 0.4), atol=0.03)

    def test_sigma_floor(self):
        y = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
        fit = fit_gaussian_mixture(y, MIX)
        assert min(fit.sigma1, fit.sigma2) >= 0.1

    def test_not_worse_than_direct_optimiser(self):
        y = GaussianMixture2(-0.1, 0.4, 0.3, 0.1, 0.7).sample(60, np.random.default_rng(1))
        fit = fit_gaussian_mixture(y, MIX)

        def negll(v):
            s1, s2 = 0.1 + np.exp(v[2]), 0.1 + np.exp(v[3])
            r = 1 / (1 + np.exp(-v[4]))
            return -mixture_loglik(y, GaussianMixture2(v[0], v[1], s1, s2, r))

        ref = min(
            (optimize.minimize(negll, x0, method="Nelder-Mead", options={"maxiter": 4000}).fun
             for x0 in ([-0.3, 0.4, -1, -2, 0.5], [0.0, 0.3, -2, -2, 0.0], [-0.5, 0.5, -1, -1, 1.0])),
        )
        assert -mixture_loglik(y, fit) <= ref + 1e-4

    def test_deterministic(self):
        y = np.random.default_rng(2).normal(size=10)
        assert fit_gaussian_mixture(y, MIX) == fit_gaussian_mixture(y, MIX)

    def test_mle_decision(self):
        y = np.random.default_rng(3).normal(size=20) * 0.3
        x = mle_decision(y, builtin_costs()[1], MIX)
        assert -10 <= x <= 10


class TestTwoRunAgreement:
    def test_bagging_independent_seeds(self):
        y = ScaledBeta(2, 2).sample(20, np.random.default_rng(0))
        cost = builtin_costs()[1]
        m1, m2 = bootstrap_moments(y, BaggingSpec(), np.random.default_rng(1))
        xs = minimize_moments(cost, m1, m2)
        se = np.std(xs, ddof=1) / np.sqrt(xs.size)
        a = bag_decision(y, cost, BaggingSpec(), np.random.default_rng(1))
        b = bag_decision(y, cost, BaggingSpec(), np.random.default_rng(2))
        assert abs(a - b) <= 3 * np.sqrt(2) * se
