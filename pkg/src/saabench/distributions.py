"""True and fitted distributions used by the benchmark.

Three families are supported: a beta distribution rescaled to [-1, 1],
a two-component univariate Gaussian mixture, and a multivariate Student t.
All objects are immutable; sampling takes an explicit generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .exceptions import UnsupportedDistributionError


@dataclass(frozen=True)
class MomentPair:
    """First and second raw moments ``E[y]`` and ``E[y^2]``."""

    m1: float
    m2: float

    def __post_init__(self):
        if not (math.isfinite(self.m1) and math.isfinite(self.m2)):
            raise ValueError(f"moments must be finite, got ({self.m1}, {self.m2})")
        # rounding slack for m2 computed as mean of squares
        if self.m2 < self.m1**2 - 1e-12 * max(1.0, abs(self.m2)):
            raise ValueError(f"m2={self.m2} < m1^2={self.m1**2}: negative variance")

    @property
    def variance(self) -> float:
        return max(self.m2 - self.m1**2, 0.0)


@dataclass(frozen=True)
class ScaledBeta:
    """Beta(alpha, beta) mapped affinely from [0, 1] onto [-1, 1]."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"beta shapes must be positive, got ({self.alpha}, {self.beta})")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return 2.0 * rng.beta(self.alpha, self.beta, size=n) - 1.0

    def logpdf(self, y):
        y = np.asarray(y, dtype=float)
        u = (y + 1.0) / 2.0
        inside = (u > 0.0) & (u < 1.0)
        uc = np.where(inside, u, 0.5)
        val = (
            (self.alpha - 1.0) * np.log(uc)
            + (self.beta - 1.0) * np.log1p(-uc)
            - special.betaln(self.alpha, self.beta)
            - math.log(2.0)
        )
        return np.where(inside, val, -np.inf)

    def pdf(self, y):
        return np.exp(self.logpdf(y))

    def moments(self) -> MomentPair:
        a, b = self.alpha, self.beta
        eu = a / (a + b)
        eu2 = a * (a + 1.0) / ((a + b) * (a + b + 1.0))
        return MomentPair(2.0 * eu - 1.0, 4.0 * eu2 - 4.0 * eu + 1.0)


@dataclass(frozen=True)
class GaussianMixture2:
    """Two-component Gaussian mixture; ``rho`` weights the first component."""

    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError("mixture scales must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"mixing weight must lie in [0, 1], got {self.rho}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        first = rng.random(n) < self.rho
        z = rng.standard_normal(n)
        return np.where(first, self.mu1 + self.sigma1 * z, self.mu2 + self.sigma2 * z)

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        return self.rho * stats.norm.pdf(y, self.mu1, self.sigma1) + (
            1.0 - self.rho
        ) * stats.norm.pdf(y, self.mu2, self.sigma2)

    def logpdf(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.logaddexp(
                math.log(self.rho) + stats.norm.logpdf(y, self.mu1, self.sigma1)
                if self.rho > 0
                else -np.inf,
                math.log1p(-self.rho) + stats.norm.logpdf(y, self.mu2, self.sigma2)
                if self.rho < 1
                else -np.inf,
            )

    def moments(self) -> MomentPair:
        r = self.rho
        m1 = r * self.mu1 + (1.0 - r) * self.mu2
        m2 = r * (self.mu1**2 + self.sigma1**2) + (1.0 - r) * (self.mu2**2 + self.sigma2**2)
        return MomentPair(m1, m2)


@dataclass(frozen=True, eq=False)
class MultivariateT:
    """Multivariate Student t with location ``mu``, scale matrix and ``nu`` dof."""

    mu: np.ndarray
    scale: np.ndarray
    nu: float
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        scale = np.array(self.scale, dtype=float)
        if scale.shape != (mu.size, mu.size):
            raise ValueError(f"scale must be {mu.size}x{mu.size}, got {scale.shape}")
        if not np.allclose(scale, scale.T, rtol=0, atol=1e-12 * np.abs(scale).max()):
            raise ValueError("scale matrix must be symmetric")
        if not self.nu > 2:
            raise ValueError(f"nu must exceed 2 for a finite covariance, got {self.nu}")
        try:
            chol = np.linalg.cholesky(scale)
        except np.linalg.LinAlgError as exc:
            raise ValueError("scale matrix must be positive definite") from exc
        mu.flags.writeable = False
        scale.flags.writeable = False
        chol.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self) -> int:
        return self.mu.size

    @property
    def covariance(self) -> np.ndarray:
        return self.scale * (self.nu / (self.nu - 2.0))

    @classmethod
    def from_covariance(cls, mu, cov, nu) -> "MultivariateT":
        return cls(mu, np.asarray(cov, dtype=float) * ((nu - 2.0) / nu), nu)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        g = rng.standard_normal((n, self.dim))
        w = rng.chisquare(self.nu, size=n) / self.nu
        return self.mu + (g @ self.chol.T) / np.sqrt(w)[:, None]

    def logpdf(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        d, nu = self.dim, self.nu
        dev = np.linalg.solve(self.chol, (y - self.mu).T)
        q = np.sum(dev**2, axis=0)
        logdet = np.sum(np.log(np.diag(self.chol)))
        return (
            special.gammaln((nu + d) / 2.0)
            - special.gammaln(nu / 2.0)
            - 0.5 * d * math.log(nu * math.pi)
            - logdet
            - 0.5 * (nu + d) * np.log1p(q / nu)
        )

    def pdf(self, y):
        return np.exp(self.logpdf(y))


def sample(dist, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    return dist.sample(n, rng)


def pdf(dist, y):
    return dist.pdf(y)


def analytic_moments(dist) -> MomentPair:
    if isinstance(dist, (ScaledBeta, GaussianMixture2)):
        return dist.moments()
    raise UnsupportedDistributionError(
        f"analytic moments are defined for univariate families only, not {type(dist).__name__}"
    )


BUILTIN_DISTRIBUTIONS = {
    1: ScaledBeta(2.0, 2.0),
    2: ScaledBeta(5.0, 5.0),
    3: ScaledBeta(2.0, 5.0),
    4: GaussianMixture2(mu1=-0.5, mu2=0.4, sigma1=0.15, sigma2=0.3, rho=0.6),
    5: GaussianMixture2(mu1=-0.1, mu2=0.4, sigma1=0.3, sigma2=0.1, rho=0.7),
}


def builtin_distributions() -> dict:
    return dict(BUILTIN_DISTRIBUTIONS)
