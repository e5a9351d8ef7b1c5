"""Minimum-variance portfolios: covariance estimators and the weight solver.

Every method produces a covariance estimate and the decision is the
closed-form minimum-variance portfolio ``S^-1 1 / (1^T S^-1 1)`` (weights
sum to one, shorting allowed). Bagging is the exception: it averages the
weights solved on bootstrap resamples.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import replace

import numpy as np

from . import bayes
from .estimators import MC_PREDICTIVE_DRAWS, BaggingSpec
from .exceptions import EstimationError, SingularCovarianceError
from .methods import MethodSpec

RIDGE_TRIGGER = 1e-10
RIDGE_SIZE = 1e-8

# Five "true" weekly-return covariances. Generated once with
# numpy.random.default_rng(20190601): LKJ(eta=2) correlations and
# volatilities uniform on [0.02, 0.06]; frozen here as literals.
BUILTIN_COVARIANCES = {
    1: (
        (3.520060e-03, 9.340576e-04, -7.162788e-06, 9.538819e-04, 3.580270e-04),
        (9.340576e-04, 2.254023e-03, -1.430067e-03, 1.218168e-03, -6.632934e-06),
        (-7.162788e-06, -1.430067e-03, 2.474436e-03, -1.258680e-03, -1.065987e-04),
        (9.538819e-04, 1.218168e-03, -1.258680e-03, 2.636208e-03, -3.283920e-04),
        (3.580270e-04, -6.632934e-06, -1.065987e-04, -3.283920e-04, 4.604900e-04),
    ),
    2: (
        (3.590953e-03, -6.092096e-04, 1.297255e-03, 2.968237e-04, -4.674566e-04),
        (-6.092096e-04, 8.399176e-04, -2.808023e-04, -5.625098e-04, 1.291416e-04),
        (1.297255e-03, -2.808023e-04, 1.653881e-03, 8.833544e-04, -6.712385e-05),
        (2.968237e-04, -5.625098e-04, 8.833544e-04, 1.667746e-03, -1.620789e-05),
        (-4.674566e-04, 1.291416e-04, -6.712385e-05, -1.620789e-05, 4.713192e-04),
    ),
    3: (
        (1.368365e-03, 3.243942e-04, 2.312863e-04, 4.530952e-04, -1.053569e-03),
        (3.243942e-04, 2.442537e-03, -4.871170e-04, -1.335438e-04, -1.936724e-04),
        (2.312863e-04, -4.871170e-04, 1.382601e-03, -7.356546e-05, 6.403862e-05),
        (4.530952e-04, -1.335438e-04, -7.356546e-05, 5.274490e-04, -5.631028e-04),
        (-1.053569e-03, -1.936724e-04, 6.403862e-05, -5.631028e-04, 1.374164e-03),
    ),
    4: (
        (2.505926e-03, 5.702340e-04, -9.306562e-04, 5.851291e-04, 2.612268e-04),
        (5.702340e-04, 2.731868e-03, 1.260603e-04, 2.125242e-04, 8.155215e-04),
        (-9.306562e-04, 1.260603e-04, 5.578193e-04, -3.933968e-04, 1.370347e-04),
        (5.851291e-04, 2.125242e-04, -3.933968e-04, 7.597526e-04, -2.709954e-04),
        (2.612268e-04, 8.155215e-04, 1.370347e-04, -2.709954e-04, 1.441214e-03),
    ),
    5: (
        (4.070418e-04, 2.134123e-04, -4.036626e-04, -3.218651e-04, -7.854143e-04),
        (2.134123e-04, 1.173993e-03, -5.942891e-04, 1.605743e-04, 3.755135e-04),
        (-4.036626e-04, -5.942891e-04, 1.768269e-03, 5.367559e-04, -3.520471e-04),
        (-3.218651e-04, 1.605743e-04, 5.367559e-04, 1.306582e-03, 8.096061e-04),
        (-7.854143e-04, 3.755135e-04, -3.520471e-04, 8.096061e-04, 3.208309e-03),
    ),
}


def builtin_covariances() -> dict:
    return {k: np.array(v) for k, v in BUILTIN_COVARIANCES.items()}


def validate_covariance(sigma, name: str = "covariance") -> np.ndarray:
    """Return ``sigma`` as a float array or raise ``ValueError``.

    Rejects non-square, asymmetric (beyond 1e-12 relative) and
    non-positive-semidefinite input.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {sigma.shape}")
    scale = max(float(np.abs(sigma).max()), 1e-300)
    if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * scale):
        raise ValueError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(sigma).min() < -1e-12 * scale:
        raise ValueError(f"{name} is not positive semi-definite")
    return sigma


def sample_covariance(s) -> np.ndarray:
    """Centered covariance with the 1/N divisor."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] < 2:
        raise ValueError(f"need an N x n sample with N >= 2, got shape {s.shape}")
    dev = s - s.mean(axis=0)
    return dev.T @ dev / s.shape[0]


def _batched_covariance(ss: np.ndarray) -> np.ndarray:
    dev = ss - ss.mean(axis=1, keepdims=True)
    return np.einsum("bki,bkj->bij", dev, dev) / ss.shape[1]


def regularize(sigma: np.ndarray):
    """Ridge a near-singular estimate. Returns ``(matrix, ridged)``.

    Triggered when the smallest eigenvalue falls below 1e-10 * trace/n; adds
    1e-8 * trace/n * I (1e-8 * I for a zero matrix).
    """
    n = sigma.shape[-1]
    level = float(np.trace(sigma)) / n
    if level <= 0.0:
        level = 1.0
    if np.linalg.eigvalsh(sigma).min() >= RIDGE_TRIGGER * level:
        return sigma, False
    return sigma + RIDGE_SIZE * level * np.eye(n), True


def min_variance_weights(sigma, counters: Counter | None = None) -> np.ndarray:
    sigma, ridged = regularize(np.asarray(sigma, dtype=float))
    if ridged and counters is not None:
        counters["ridge"] += 1
    try:
        x = np.linalg.solve(sigma, np.ones(sigma.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("covariance singular after ridge") from exc
    total = x.sum()
    if not np.isfinite(total) or total == 0.0:
        raise SingularCovarianceError("covariance singular after ridge")
    return x / total


def out_of_sample_variance(w, true_cov) -> float:
    w = np.asarray(w, dtype=float)
    return float(w @ np.asarray(true_cov, dtype=float) @ w)


def bagged_weights(s, spec: BaggingSpec, rng: np.random.Generator, counters: Counter | None = None) -> np.ndarray:
    """Average of minimum-variance weights over bootstrap resamples.

    Resamples whose covariance stays singular after the ridge are skipped
    and counted under ``counters["excluded_resamples"]``.
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    m = n if spec.M is None else spec.M
    if spec.with_replacement:
        idx = rng.integers(0, n, size=(spec.B, m))
    else:
        idx = np.argsort(rng.random((spec.B, n)), axis=1)[:, :m]
    covs = _batched_covariance(s[idx])
    d = covs.shape[-1]
    level = np.trace(covs, axis1=1, axis2=2) / d
    level = np.where(level > 0.0, level, 1.0)
    ridged = np.linalg.eigvalsh(covs)[:, 0] < RIDGE_TRIGGER * level
    covs[ridged] += (RIDGE_SIZE * level[ridged])[:, None, None] * np.eye(d)
    x = np.linalg.solve(covs, np.ones((spec.B, d, 1)))[..., 0]
    total = x.sum(axis=1)
    ok = np.isfinite(total) & (total != 0.0)
    if counters is not None:
        counters["ridge"] += int(ridged.sum())
        counters["excluded_resamples"] += int((~ok).sum())
    if not ok.any():
        raise EstimationError("every bootstrap resample gave a singular covariance")
    return np.mean(x[ok] / total[ok, None], axis=0)


def kernel_covariance(s, h: float | None = None) -> np.ndarray:
    """Covariance of a spherical Gaussian KDE: ``S + h^2 I``.

    ``h=None`` applies Scott's rule in d dimensions with the average
    marginal standard deviation.
    """
    s = np.asarray(s, dtype=float)
    n, d = s.shape
    if h is None:
        h = float(np.mean(np.std(s, axis=0, ddof=1))) * n ** (-1.0 / (d + 4))
    return sample_covariance(s) + h * h * np.eye(d)


def fit_t_em(s, nu: float = 3.0, max_iter: int = 1000, tol: float = 1e-10):
    """EM for the location and scale of a multivariate t with fixed ``nu``.

    Returns ``(mu, scale)``; raises :class:`EstimationError` if the relative
    change in the scale matrix is still above ``tol`` after ``max_iter``.
    """
    s = np.asarray(s, dtype=float)
    n, d = s.shape
    mu = s.mean(axis=0)
    scale = sample_covariance(s) * ((nu - 2.0) / nu)
    scale, _ = regularize(scale)
    for _ in range(max_iter):
        dev = s - mu
        chol = np.linalg.cholesky(scale)
        q = np.sum(np.linalg.solve(chol, dev.T) ** 2, axis=0)
        w = (nu + d) / (nu + q)
        mu_new = (w @ s) / w.sum()
        dev = s - mu_new
        scale_new = (dev * w[:, None]).T @ dev / n
        scale_new, _ = regularize(0.5 * (scale_new + scale_new.T))
        change = np.abs(scale_new - scale).max() / np.abs(scale_new).max()
        mu, scale = mu_new, scale_new
        if change <= tol:
            return mu, scale
    raise EstimationError(f"t EM did not converge in {max_iter} iterations")


def method_covariance(s, method: MethodSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Covariance estimate used by ``method`` (not defined for bagging)."""
    name = method.name
    if name == "saa":
        return sample_covariance(s)
    if name == "kernel":
        h = method.kernel.h if method.kernel.bandwidth_rule == "fixed" else None
        return kernel_covariance(s, h)
    if name == "mle":
        _, scale = fit_t_em(s, method.t_nu, method.mle.max_iter)
        return scale * (method.t_nu / (method.t_nu - 2.0))
    if name == "bayes":
        prior = method.portfolio_prior
        if prior.n_assets != np.shape(s)[1]:
            prior = replace(prior, n_assets=np.shape(s)[1])
        draws = bayes.posterior_portfolio(s, prior, method.chain, rng)
        if method.mc_predictive:
            return sample_covariance(bayes.sample_predictive_portfolio(draws, MC_PREDICTIVE_DRAWS, rng))
        return bayes.predictive_covariance(draws)
    raise ValueError(f"method {name!r} has no covariance estimate")


def method_weights(
    s, method: MethodSpec, rng: np.random.Generator | None = None, counters: Counter | None = None
) -> np.ndarray:
    if method.name == "bagging":
        return bagged_weights(s, method.bagging, rng, counters)
    return min_variance_weights(method_covariance(s, method, rng), counters)
