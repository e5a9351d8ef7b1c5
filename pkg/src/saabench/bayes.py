"""Posterior sampling and posterior-predictive decisions.

Three models are supported:

* scaled beta with independent uniform priors on both shapes (random-walk
  Metropolis, reflected at the prior bounds);
* a two-component normal mixture with Dirichlet weights and normal-gamma
  component priors (Gibbs sampling);
* the portfolio model: per-asset gamma scales, LKJ correlation Cholesky
  factor, normal mean and multivariate t likelihood (Metropolis within
  Gibbs on an unconstrained parameterisation).

Predictive quantities are computed by averaging the analytic moments of
``f(y; theta)`` over the stored draws, which equals the moments of the
posterior-predictive mixture exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .distributions import GaussianMixture2, MomentPair, ScaledBeta
from .estimators import _beta_suffstats
from .exceptions import EmptySampleError
from .quadratic import DEFAULT_BOX, DecisionBox, QuadraticCost, saa_minimize
from .streams import native_seed

ACCEPTANCE_WARN = (0.05, 0.95)


@dataclass(frozen=True)
class BetaPrior:
    lo: float = 1.0
    hi: float = 7.0

    def __post_init__(self):
        if not 1.0 <= self.lo < self.hi:
            raise ValueError(f"beta prior needs 1 <= lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class MixturePrior:
    """Conjugate mixture prior.

    ``V`` and ``n`` parameterise the one-dimensional Wishart on each
    component precision. Under ``wishart_convention="covariance"`` (default)
    ``V`` is a prior variance scale and the precision is Gamma(n/2, rate=V/2);
    under ``"precision"`` ``V`` is the Wishart scale itself and the precision
    is Gamma(n/2, rate=1/(2V)). ``m=None`` centres the component means on the
    sample mean.
    """

    delta: float = 10.0
    V: float = 0.1
    n: float = 2.0
    alpha_prec: float = 0.1
    m: float | None = None
    wishart_convention: str = "covariance"

    def __post_init__(self):
        for name in ("delta", "V", "n", "alpha_prec"):
            if not getattr(self, name) > 0:
                raise ValueError(f"mixture prior {name} must be positive")
        if self.wishart_convention not in ("covariance", "precision"):
            raise ValueError(f"unknown Wishart convention {self.wishart_convention!r}")

    @property
    def gamma_shape(self) -> float:
        return self.n / 2.0

    @property
    def gamma_rate(self) -> float:
        if self.wishart_convention == "covariance":
            return self.V / 2.0
        return 1.0 / (2.0 * self.V)


@dataclass(frozen=True)
class PortfolioPrior:
    gamma_shape: float = 3.0
    gamma_rate: float = 1.0
    eta: float = 2.0
    n_assets: int = 5
    nu: float = 3.0

    def __post_init__(self):
        if not (self.gamma_shape > 0 and self.gamma_rate > 0 and self.eta > 0):
            raise ValueError("portfolio prior constants must be positive")
        if self.n_assets < 2:
            raise ValueError("portfolio model needs at least two assets")
        if not self.nu > 2:
            raise ValueError("nu must exceed 2")


@dataclass(frozen=True)
class ChainSettings:
    draws: int = 5000
    burn_in: int = 1000
    thin: int = 1
    target_acceptance: float = 0.3

    def __post_init__(self):
        if self.draws < 1 or self.burn_in < 0 or self.thin < 1:
            raise ValueError("chain needs draws >= 1, burn_in >= 0, thin >= 1")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target acceptance must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """Stored draws, one row per draw, columns named by ``names``."""

    family: str
    names: tuple
    draws: np.ndarray
    acceptance_rate: float
    ess: dict = field(default_factory=dict)
    warnings: tuple = ()
    nu: float | None = None

    def __len__(self):
        return self.draws.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]


def effective_sample_size(x) -> float:
    """Geyer initial-positive-sequence ESS of a 1-D chain."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    xc = x - x.mean()
    var = float(np.dot(xc, xc)) / n
    if var == 0.0:
        return float(n)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n] / n
    rho = acov / var
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(n / max(tau, 1e-12 + 1.0 / n))


def _diagnostics(draws: np.ndarray, names) -> dict:
    return {name: effective_sample_size(draws[:, i]) for i, name in enumerate(names)}


def _acceptance_warnings(rate: float, has_data: bool = True) -> tuple:
    lo, hi = ACCEPTANCE_WARN
    if has_data and not lo <= rate <= hi:
        msg = f"acceptance rate {rate:.3f} outside [{lo}, {hi}] after adaptation"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        return (msg,)
    return ()


# ---------------------------------------------------------------------------
# Scaled beta


def posterior_beta(
    s, prior: BetaPrior = BetaPrior(), chain: ChainSettings = ChainSettings(), rng=None
) -> PosteriorDraws:
    y = np.asarray(s, dtype=float).reshape(-1)
    if y.size:
        s1, s2 = _beta_suffstats(y)
        u = (y + 1.0) / 2.0
        mu, var = float(u.mean()), float(u.var())
        common = mu * (1 - mu) / var - 1.0 if var > 0 else 4.0
        a0 = min(max(mu * common, prior.lo), prior.hi)
        b0 = min(max((1 - mu) * common, prior.lo), prior.hi)
    else:
        s1 = s2 = 0.0
        a0 = b0 = 0.5 * (prior.lo + prior.hi)
    rng = np.random.default_rng(rng)
    out, rate = _kernels.beta_metropolis(
        s1, s2, float(y.size), prior.lo, prior.hi, a0, b0,
        chain.draws, chain.burn_in, chain.thin, native_seed(rng), chain.target_acceptance,
    )
    names = ("alpha", "beta")
    return PosteriorDraws(
        "scaled_beta", names, out, float(rate), _diagnostics(out, names), _acceptance_warnings(rate, y.size > 0)
    )


# ---------------------------------------------------------------------------
# Normal mixture


def posterior_mixture(
    s,
    prior: MixturePrior = MixturePrior(),
    chain: ChainSettings = ChainSettings(),
    rng=None,
    *,
    use_likelihood: bool = True,
    n_components: int = 2,
    fixed_sigma: float | None = None,
) -> PosteriorDraws:
    """Gibbs sampler; columns ``rho, mu1, mu2, var1, var2`` with ``mu1 <= mu2``.

    The keyword-only arguments are test hooks: ``use_likelihood=False`` samples
    the prior, ``n_components=1`` with ``fixed_sigma`` reduces the model to a
    known-variance normal with a conjugate prior on its mean.
    """
    y = np.asarray(s, dtype=float).reshape(-1)
    if y.size == 0 and use_likelihood:
        raise EmptySampleError("mixture posterior needs a nonempty sample")
    if n_components not in (1, 2):
        raise ValueError("n_components must be 1 or 2")
    m = prior.m if prior.m is not None else (float(y.mean()) if y.size else 0.0)
    if y.size >= 2:
        q1, q3 = np.quantile(y, [0.25, 0.75])
        v = max(float(y.var()), 1e-4)
    else:
        q1 = q3 = m
        v = 1.0
    init = np.array([0.5, q1, q3, v, v])
    rng = np.random.default_rng(rng)
    out = _kernels.mixture_gibbs(
        y, m, prior.alpha_prec, prior.gamma_shape, prior.gamma_rate, prior.delta, init,
        chain.draws, chain.burn_in, chain.thin, native_seed(rng),
        use_likelihood, n_components, -1.0 if fixed_sigma is None else float(fixed_sigma),
    )
    names = ("rho", "mu1", "mu2", "var1", "var2")
    return PosteriorDraws("gaussian_mixture_2", names, out, 1.0, _diagnostics(out, names))


# ---------------------------------------------------------------------------
# Portfolio model


def _cpc_from_corr_cholesky(Lr: np.ndarray) -> np.ndarray:
    d = Lr.shape[0]
    z = []
    for i in range(1, d):
        rem = 1.0
        for j in range(i):
            c = Lr[i, j] / math.sqrt(rem) if rem > 0 else 0.0
            c = min(max(c, -0.999), 0.999)
            z.append(c)
            rem -= Lr[i, j] ** 2
    return np.array(z)


def corr_cholesky_from_cpc(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    d = int(round((1 + math.sqrt(1 + 8 * z.size)) / 2))
    return _kernels.cpc_to_corr_cholesky(z, d)


def sample_lkj_cholesky(d: int, eta: float, rng: np.random.Generator) -> np.ndarray:
    """LKJ(eta) correlation Cholesky factor via canonical partial correlations."""
    z = []
    for i in range(1, d):
        for j in range(i):
            b = eta + 0.5 * (d - 2 - j)
            z.append(2.0 * rng.beta(b, b) - 1.0)
    return _kernels.cpc_to_corr_cholesky(np.array(z), d)


def _unpack_portfolio(x: np.ndarray, d: int):
    npc = d * (d - 1) // 2
    sig = np.exp(x[:d])
    Lr = _kernels.cpc_to_corr_cholesky(np.tanh(x[d:d + npc]), d)
    return sig, Lr, x[d + npc:]


def posterior_portfolio(
    s,
    prior: PortfolioPrior = PortfolioPrior(),
    chain: ChainSettings = ChainSettings(),
    rng=None,
    *,
    use_likelihood: bool = True,
) -> PosteriorDraws:
    """Columns: ``sigma_i``, ``z_ij`` (CPCs), ``mu_i``; the scale matrix of
    draw ``k`` is ``L L^T`` with ``L = diag(sigma) Lr(z)``."""
    s = np.asarray(s, dtype=float)
    d = prior.n_assets
    if use_likelihood:
        if s.ndim != 2 or s.shape[1] != d:
            raise ValueError(f"portfolio sample must be N x {d}, got {s.shape}")
        if s.shape[0] < 2:
            raise ValueError("portfolio posterior needs N >= 2")
        n = s.shape[0]
        cov = np.cov(s, rowvar=False) * ((prior.nu - 2.0) / prior.nu)
        sd = np.sqrt(np.diag(cov))
        corr = cov / np.outer(sd, sd)
        try:
            Lr = np.linalg.cholesky(corr + 1e-6 * np.eye(d))
            Lr /= np.linalg.norm(Lr, axis=1)[:, None]
        except np.linalg.LinAlgError:
            Lr = np.eye(d)
        z0 = _cpc_from_corr_cholesky(Lr)
        x0 = np.concatenate([np.log(sd), np.arctanh(z0), s.mean(axis=0)])
        steps = np.array([
            2.38 / math.sqrt(d) / math.sqrt(2.0 * n),
            2.38 / math.sqrt(z0.size) / math.sqrt(n),
            2.38 / math.sqrt(d) * float(np.mean(sd)) / math.sqrt(n),
        ])
        data = np.ascontiguousarray(s)
    else:
        x0 = np.concatenate([np.full(d, math.log(prior.gamma_shape / prior.gamma_rate)),
                             np.zeros(d * (d - 1) // 2), np.zeros(d)])
        steps = np.array([0.5, 0.5, 1.0])
        data = np.zeros((0, d))
    rng = np.random.default_rng(rng)
    raw, rates = _kernels.portfolio_mwg(
        data, x0, steps, prior.gamma_shape, prior.gamma_rate, prior.eta, prior.nu,
        chain.draws, chain.burn_in, chain.thin, native_seed(rng), use_likelihood, chain.target_acceptance,
    )
    npc = d * (d - 1) // 2
    out = np.concatenate([np.exp(raw[:, :d]), np.tanh(raw[:, d:d + npc]), raw[:, d + npc:]], axis=1)
    names = (
        tuple(f"sigma{i + 1}" for i in range(d))
        + tuple(f"z{i + 1}{j + 1}" for i in range(1, d) for j in range(i))
        + tuple(f"mu{i + 1}" for i in range(d))
    )
    rate = float(np.mean(rates))
    return PosteriorDraws("portfolio", names, out, rate, _diagnostics(out, names),
                          _acceptance_warnings(rate, use_likelihood), nu=prior.nu)


def portfolio_scale_matrices(draws: PosteriorDraws) -> np.ndarray:
    """Scale matrices ``L L^T`` for every stored draw, shape ``(K, d, d)``."""
    d = sum(1 for n in draws.names if n.startswith("sigma"))
    npc = d * (d - 1) // 2
    sig = draws.draws[:, :d]
    z = draws.draws[:, d:d + npc]
    out = np.empty((len(draws), d, d))
    for k in range(len(draws)):
        L = sig[k][:, None] * _kernels.cpc_to_corr_cholesky(z[k], d)
        out[k] = L @ L.T
    return out


def portfolio_means(draws: PosteriorDraws) -> np.ndarray:
    d = sum(1 for n in draws.names if n.startswith("sigma"))
    return draws.draws[:, -d:]


# ---------------------------------------------------------------------------
# Predictive quantities


def _draw_moments(draws: PosteriorDraws, family: str):
    if family == "scaled_beta":
        a, b = draws.column("alpha"), draws.column("beta")
        eu = a / (a + b)
        eu2 = a * (a + 1.0) / ((a + b) * (a + b + 1.0))
        return 2.0 * eu - 1.0, 4.0 * eu2 - 4.0 * eu + 1.0
    if family == "gaussian_mixture_2":
        r, m1, m2 = draws.column("rho"), draws.column("mu1"), draws.column("mu2")
        v1, v2 = draws.column("var1"), draws.column("var2")
        return r * m1 + (1 - r) * m2, r * (m1 * m1 + v1) + (1 - r) * (m2 * m2 + v2)
    raise ValueError(f"no univariate predictive for family {family!r}")


def predictive_moments_1d(draws: PosteriorDraws, family: str | None = None) -> MomentPair:
    if len(draws) == 0:
        raise EmptySampleError("no posterior draws")
    m1, m2 = _draw_moments(draws, family or draws.family)
    return MomentPair(float(np.mean(m1)), float(np.mean(m2)))


def sample_predictive_1d(draws: PosteriorDraws, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from the posterior predictive: pick a stored draw, then ``y``."""
    pick = rng.integers(0, len(draws), size=size)
    if draws.family == "scaled_beta":
        a, b = draws.column("alpha")[pick], draws.column("beta")[pick]
        return 2.0 * rng.beta(a, b) - 1.0
    r = draws.column("rho")[pick]
    first = rng.random(size) < r
    z = rng.standard_normal(size)
    mu = np.where(first, draws.column("mu1")[pick], draws.column("mu2")[pick])
    sd = np.sqrt(np.where(first, draws.column("var1")[pick], draws.column("var2")[pick]))
    return mu + sd * z


def predictive_density_1d(draws: PosteriorDraws, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    total = np.zeros_like(y)
    if draws.family == "scaled_beta":
        for a, b in draws.draws:
            total += ScaledBeta(a, b).pdf(y)
    else:
        for r, m1, m2, v1, v2 in draws.draws:
            total += GaussianMixture2(m1, m2, math.sqrt(v1), math.sqrt(v2), r).pdf(y)
    return total / len(draws)


def predictive_second_moment_matrix(draws: PosteriorDraws) -> np.ndarray:
    """Average of ``nu/(nu-2) Sigma_k + mu_k mu_k^T`` over draws."""
    nu = draws.nu if draws.nu is not None else 3.0
    scales = portfolio_scale_matrices(draws)
    mu = portfolio_means(draws)
    out = scales.mean(axis=0) * (nu / (nu - 2.0)) + (mu.T @ mu) / len(draws)
    return 0.5 * (out + out.T)


def predictive_covariance(draws: PosteriorDraws) -> np.ndarray:
    mbar = portfolio_means(draws).mean(axis=0)
    return predictive_second_moment_matrix(draws) - np.outer(mbar, mbar)


def sample_predictive_portfolio(draws: PosteriorDraws, size: int, rng: np.random.Generator) -> np.ndarray:
    nu = draws.nu if draws.nu is not None else 3.0
    scales = portfolio_scale_matrices(draws)
    mu = portfolio_means(draws)
    pick = rng.integers(0, len(draws), size=size)
    chol = np.linalg.cholesky(scales)
    g = rng.standard_normal((size, mu.shape[1]))
    w = rng.chisquare(nu, size=size) / nu
    return mu[pick] + np.einsum("kij,kj->ki", chol[pick], g) / np.sqrt(w)[:, None]


# ---------------------------------------------------------------------------
# Decisions


def posterior_1d(s, family: str, beta_prior=BetaPrior(), mixture_prior=MixturePrior(),
                 chain=ChainSettings(), rng=None) -> PosteriorDraws:
    if family == "scaled_beta":
        return posterior_beta(s, beta_prior, chain, rng)
    if family == "gaussian_mixture_2":
        return posterior_mixture(s, mixture_prior, chain, rng)
    raise ValueError(f"unknown family {family!r}")


def bayes_decision_quadratic(
    s,
    cost: QuadraticCost,
    prior,
    chain: ChainSettings = ChainSettings(),
    rng=None,
    box: DecisionBox = DEFAULT_BOX,
) -> float:
    """Minimise the expected cost under the posterior predictive.

    ``prior`` selects the model: :class:`BetaPrior` or :class:`MixturePrior`.
    """
    if isinstance(prior, BetaPrior):
        draws = posterior_beta(s, prior, chain, rng)
    elif isinstance(prior, MixturePrior):
        draws = posterior_mixture(s, prior, chain, rng)
    else:
        raise TypeError(f"unsupported prior {type(prior).__name__}")
    return saa_minimize(cost, predictive_moments_1d(draws), box)
