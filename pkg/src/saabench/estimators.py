"""Decision procedures for the scalar quadratic problems.

Each procedure turns a sample into moments of some estimate of the
distribution of ``y`` and then solves the moment-form problem:

* SAA        -- empirical moments;
* bagging    -- empirical moments of ``B`` bootstrap resamples, one decision each, averaged;
* kernel     -- moments of the Gaussian kernel density estimate;
* MLE        -- moments of a fitted scaled-beta or two-component mixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from . import _kernels
from .distributions import GaussianMixture2, MomentPair, ScaledBeta
from .exceptions import DegenerateBandwidthError, EmptySampleError, EstimationError
from .quadratic import (
    DEFAULT_BOX,
    DecisionBox,
    QuadraticCost,
    average_decisions,
    minimize_moments,
    saa_minimize,
    sample_moments,
)

MC_PREDICTIVE_DRAWS = 100_000


def _as_sample(s) -> np.ndarray:
    y = np.asarray(s, dtype=float).reshape(-1)
    if y.size == 0:
        raise EmptySampleError("sample is empty")
    return y


@dataclass(frozen=True)
class BaggingSpec:
    """Bootstrap settings; ``M=None`` means resample size equal to ``N``."""

    B: int = 400
    M: int | None = None
    with_replacement: bool = True

    def __post_init__(self):
        if self.B < 1:
            raise ValueError(f"B must be >= 1, got {self.B}")
        if self.M is not None and self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")


@dataclass(frozen=True)
class KernelSpec:
    bandwidth_rule: str = "scott"
    h: float | None = None

    def __post_init__(self):
        if self.bandwidth_rule not in ("scott", "fixed"):
            raise ValueError(f"unknown bandwidth rule {self.bandwidth_rule!r}")
        if self.bandwidth_rule == "fixed" and not (self.h is not None and self.h >= 0):
            raise ValueError("fixed bandwidth needs h >= 0")


@dataclass(frozen=True)
class MleFamily:
    """Parametric family and constraints for maximum likelihood.

    ``scaled_beta`` fits shapes alpha, beta > ``shape_min`` on [-1, 1];
    ``gaussian_mixture_2`` fits all five parameters with sigma_i >= ``sigma_floor``
    using EM from ``restarts`` seeded random starts.
    """

    family: str = "scaled_beta"
    shape_min: float = 1.0
    sigma_floor: float = 0.1
    restarts: int = 10
    max_iter: int = 1000
    beta_max_iter: int = 500
    tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("scaled_beta", "gaussian_mixture_2"):
            raise ValueError(f"unknown MLE family {self.family!r}")
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")
        if self.restarts < 1 or self.max_iter < 1 or self.beta_max_iter < 1:
            raise ValueError("restarts and iteration caps must be >= 1")


# ---------------------------------------------------------------------------
# SAA and bagging


def saa_decision(s, cost: QuadraticCost, box: DecisionBox = DEFAULT_BOX) -> float:
    return saa_minimize(cost, sample_moments(s), box)


def bootstrap_moments(s, spec: BaggingSpec, rng: np.random.Generator):
    """Moments ``(m1[B], m2[B])`` of the ``B`` resamples."""
    y = _as_sample(s)
    n = y.size
    m = n if spec.M is None else spec.M
    if spec.with_replacement:
        idx = rng.integers(0, n, size=(spec.B, m))
    else:
        if m > n:
            raise ValueError(f"subsampling without replacement needs M <= N ({m} > {n})")
        idx = np.argsort(rng.random((spec.B, n)), axis=1)[:, :m]
    ys = y[idx]
    return ys.mean(axis=1), (ys * ys).mean(axis=1)


def bag_decision(
    s, cost: QuadraticCost, spec: BaggingSpec, rng: np.random.Generator, box: DecisionBox = DEFAULT_BOX
) -> float:
    m1, m2 = bootstrap_moments(s, spec, rng)
    return average_decisions(minimize_moments(cost, m1, m2, box))


# ---------------------------------------------------------------------------
# Kernel smoothing


def scott_bandwidth(s, d: int = 1) -> float:
    """``std(s) * N**(-1/(d+4))`` with the unbiased standard deviation."""
    y = np.asarray(s, dtype=float)
    n = y.shape[0]
    if n < 2:
        raise DegenerateBandwidthError("Scott's rule needs at least two points")
    sd = float(np.std(y, ddof=1)) if y.ndim == 1 else float(np.mean(np.std(y, axis=0, ddof=1)))
    if not sd > 0.0:
        raise DegenerateBandwidthError("Scott's rule is undefined for a zero-variance sample")
    return sd * n ** (-1.0 / (d + 4))


def kernel_bandwidth(s, spec: KernelSpec) -> float:
    if spec.bandwidth_rule == "fixed":
        return float(spec.h)
    return scott_bandwidth(s)


def kernel_moments(s, spec: KernelSpec) -> MomentPair:
    """A Gaussian KDE keeps the sample mean and adds ``h^2`` to ``E[y^2]``."""
    mom = sample_moments(s)
    h = kernel_bandwidth(s, spec)
    return MomentPair(mom.m1, mom.m2 + h * h)


def sample_kernel_density(s, h: float, size: int, rng: np.random.Generator) -> np.ndarray:
    y = _as_sample(s)
    centers = y[rng.integers(0, y.size, size=size)]
    return centers + h * rng.standard_normal(size)


def kernel_decision(s, cost: QuadraticCost, spec: KernelSpec, box: DecisionBox = DEFAULT_BOX) -> float:
    return saa_minimize(cost, kernel_moments(s, spec), box)


# ---------------------------------------------------------------------------
# Maximum likelihood


def _beta_suffstats(y):
    u = np.clip((y + 1.0) / 2.0, 0.5e-9, 1.0 - 0.5e-9)  # 1e-9 on the y scale
    return float(np.sum(np.log(u))), float(np.sum(np.log1p(-u)))


def beta_loglik(y, alpha: float, beta: float) -> float:
    y = _as_sample(y)
    s1, s2 = _beta_suffstats(y)
    return (alpha - 1.0) * s1 + (beta - 1.0) * s2 - y.size * (special.betaln(alpha, beta) + math.log(2.0))


def fit_scaled_beta(s, family: MleFamily = MleFamily()) -> ScaledBeta:
    """Constrained beta MLE by Nelder-Mead in ``log(shape - shape_min)`` coordinates."""
    y = _as_sample(s)
    n = y.size
    s1, s2 = _beta_suffstats(y)
    lo = family.shape_min

    def negll(v):
        a = lo + math.exp(min(v[0], 50.0))
        b = lo + math.exp(min(v[1], 50.0))
        return -((a - 1.0) * s1 + (b - 1.0) * s2 - n * special.betaln(a, b))

    # moment-matched start
    u = (y + 1.0) / 2.0
    mu = float(np.mean(u))
    var = float(np.var(u))
    common = mu * (1.0 - mu) / var - 1.0 if var > 0 else 10.0
    a0 = max(mu * common, lo + 0.1)
    b0 = max((1.0 - mu) * common, lo + 0.1)
    res = optimize.minimize(
        negll,
        x0=[math.log(a0 - lo), math.log(b0 - lo)],
        method="Nelder-Mead",
        options={"maxiter": family.beta_max_iter, "fatol": 1e-8, "xatol": 1e-6},
    )
    if not res.success or not np.all(np.isfinite(res.x)):
        raise EstimationError(f"beta MLE did not converge: {res.message}")
    return ScaledBeta(lo + math.exp(min(res.x[0], 50.0)), lo + math.exp(min(res.x[1], 50.0)))


def mixture_loglik(y, dist: GaussianMixture2) -> float:
    return float(np.sum(dist.logpdf(_as_sample(y))))


def fit_gaussian_mixture(s, family: MleFamily = MleFamily(family="gaussian_mixture_2")) -> GaussianMixture2:
    """EM with ``sigma_i >= sigma_floor`` and seeded restarts; best likelihood wins.

    Restarts that hit ``max_iter`` are discarded; if none converged the fit
    fails with :class:`EstimationError`.
    """
    y = _as_sample(s)
    rng = np.random.default_rng(family.seed)
    sd = max(float(np.std(y)), family.sigma_floor)
    best = None
    best_ll = -np.inf
    for _ in range(family.restarts):
        picks = np.sort(y[rng.choice(y.size, size=2, replace=y.size < 2)])
        rho0 = float(rng.uniform(0.2, 0.8))
        params, ll, ok = _kernels.mixture_em(
            y, picks[0], picks[1], sd, sd, rho0, family.sigma_floor, family.max_iter, family.tol
        )
        if ok and ll > best_ll:
            best, best_ll = params, ll
    if best is None:
        raise EstimationError(f"mixture EM failed to converge in {family.restarts} restarts")
    mu1, mu2, s1, s2, rho = (float(v) for v in best)
    return GaussianMixture2(mu1, mu2, max(s1, family.sigma_floor), max(s2, family.sigma_floor), min(max(rho, 0.0), 1.0))


def mle_fit(s, family: MleFamily):
    if family.family == "scaled_beta":
        return fit_scaled_beta(s, family)
    return fit_gaussian_mixture(s, family)


def mle_moments(s, family: MleFamily) -> MomentPair:
    return mle_fit(s, family).moments()


def mle_decision(s, cost: QuadraticCost, family: MleFamily, box: DecisionBox = DEFAULT_BOX) -> float:
    return saa_minimize(cost, mle_moments(s, family), box)


def monte_carlo_moments(draws) -> MomentPair:
    """Moments of a large predictive resample (the sampling route to SAA)."""
    return sample_moments(draws)
