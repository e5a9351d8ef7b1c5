import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from saabench.distributions import MomentPair
from saabench.estimators import BaggingSpec, KernelSpec, bag_decision, kernel_moments, saa_decision
from saabench.harness import paired_improvement
from saabench.portfolio import min_variance_weights
from saabench.quadratic import DEFAULT_BOX, QuadraticCost, expected_cost, saa_minimize, sample_moments
from saabench.streams import stream

coef = st.floats(-5, 5, allow_nan=False)
costs = st.builds(QuadraticCost, coef, coef, coef)
samples = arrays(np.float64, st.integers(1, 30), elements=st.floats(-1, 1, allow_nan=False))


@given(costs, samples)
def test_closed_form_beats_grid(cost, y):
    mom = sample_moments(y)
    x = saa_minimize(cost, mom)
    grid = np.linspace(DEFAULT_BOX.lo, DEFAULT_BOX.hi, 2001)
    assert DEFAULT_BOX.lo <= x <= DEFAULT_BOX.hi
    f = expected_cost(cost, x, mom)
    assert f <= np.min(expected_cost(cost, grid, mom)) + 1e-9 * (1 + abs(f))


@given(costs, st.floats(-1, 1), st.integers(1, 20), st.integers(0, 2**31))
def test_bagging_constant_sample_is_saa(cost, v, n, seed):
    y = np.full(n, v)
    assert bag_decision(y, cost, BaggingSpec(B=20), np.random.default_rng(seed)) == saa_decision(y, cost)


@given(samples, st.floats(0, 3))
def test_kernel_keeps_mean(y, h):
    mom = kernel_moments(y, KernelSpec("fixed", h))
    base = sample_moments(y)
    assert mom.m1 == base.m1 and mom.m2 >= base.m2


@given(arrays(np.float64, st.integers(2, 40), elements=st.floats(-100, 100)),
       arrays(np.float64, 40, elements=st.floats(-100, 100)))
def test_paired_interval_contains_mean(a, b):
    b = b[: a.size]
    mean, lo, hi = paired_improvement(a, b)
    assert lo <= mean <= hi
    rmean, rlo, rhi = paired_improvement(b, a)
    assert np.isclose(rmean, -mean, atol=1e-9) and np.isclose(hi - lo, rhi - rlo, atol=1e-9)


@settings(max_examples=50)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_min_variance_is_optimal(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d))
    sigma = a @ a.T + 0.1 * np.eye(d)
    w = min_variance_weights(sigma)
    assert abs(w.sum() - 1.0) < 1e-10
    # any feasible perturbation increases the variance
    for _ in range(5):
        p = rng.normal(size=d)
        p -= p.mean()
        v = w + 0.1 * p
        assert v @ sigma @ v >= w @ sigma @ w - 1e-12


@given(st.integers(0, 2**32 - 1), st.lists(st.integers(0, 1000), min_size=1, max_size=4))
def test_streams_depend_only_on_key(seed, key):
    a = stream(seed, *key, role="training").random(3)
    stream(seed, *key, role="bootstrap").random(10)
    b = stream(seed, *key, role="training").random(3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, stream(seed, *key, role="mcmc").random(3))


@given(st.floats(-3, 3), st.floats(0, 3))
def test_moment_pair_variance_nonnegative(m1, v):
    assert MomentPair(m1, m1 * m1 + v).variance >= 0
