"""Reference computations that share no code with the package.

Each oracle solves the same problem by a different route: direct search
instead of closed forms, quadrature instead of MCMC, a KKT solve instead of
the inverse-covariance formula.
"""

import math

import numpy as np
from scipy import special

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol=1e-10, max_iter=500):
    """Minimise a unimodal ``f`` on ``[lo, hi]``."""
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    # the box endpoints can beat the interior bracket for concave objectives
    return min((x, lo, hi), key=f)


def sample_objective(alpha, beta, gamma, y):
    """Empirical mean cost as an explicit average over the sample."""
    y = np.asarray(y, dtype=float)

    def f(x):
        return float(np.mean(x * x + alpha * x * x * y + beta * x * y * y + gamma * x * y))

    return f


def beta_posterior_grid(y, lo=1.0, hi=7.0, n=200):
    """Posterior mean of (alpha, beta) for a [-1, 1]-scaled beta sample under
    a uniform prior on ``[lo, hi]^2``, by midpoint quadrature."""
    u = (np.asarray(y, dtype=float) + 1.0) / 2.0
    h = (hi - lo) / n
    grid = lo + h * (np.arange(n) + 0.5)
    a, b = np.meshgrid(grid, grid, indexing="ij")
    s1 = np.sum(np.log(u))
    s2 = np.sum(np.log1p(-u))
    loglik = (a - 1.0) * s1 + (b - 1.0) * s2 - u.size * special.betaln(a, b)
    w = np.exp(loglik - loglik.max())
    w /= w.sum()
    return float(np.sum(w * a)), float(np.sum(w * b))


def normal_known_variance_posterior(y, m, kappa, sigma):
    """Mean and variance of mu given y ~ N(mu, sigma^2) and
    mu ~ N(m, sigma^2 / kappa)."""
    y = np.asarray(y, dtype=float)
    n = y.size
    post_prec = (kappa + n) / sigma**2
    post_mean = (kappa * m + y.sum()) / (kappa + n)
    return post_mean, 1.0 / post_prec


def min_variance_qp(sigma):
    """Solve min w'Sw s.t. 1'w = 1 through the null space of the
    constraint: w = e1 + Z v with Z spanning {v : 1'v = 0}."""
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[0]
    ones = np.ones((1, d))
    # orthonormal basis of the null space of 1'
    _, _, vt = np.linalg.svd(ones)
    z = vt[1:].T
    w0 = np.full(d, 1.0 / d)
    # stationarity: Z'S(w0 + Z v) = 0
    v = np.linalg.lstsq(z.T @ sigma @ z, -z.T @ sigma @ w0, rcond=None)[0]
    return w0 + z @ v


def random_spd(d, rng, cond_max=1e4):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = np.exp(rng.uniform(0.0, math.log(cond_max), size=d)) * 1e-4
    return (q * eig) @ q.T


def scaled_beta_moments(a, b):
    """Raw moments of 2U - 1 with U ~ Beta(a, b), from the beta moments."""
    eu = a / (a + b)
    eu2 = a * (a + 1.0) / ((a + b) * (a + b + 1.0))
    return 2.0 * eu - 1.0, 4.0 * eu2 - 4.0 * eu + 1.0


def mixture_moments(mu1, mu2, s1, s2, rho):
    m1 = rho * mu1 + (1 - rho) * mu2
    m2 = rho * (mu1**2 + s1**2) + (1 - rho) * (mu2**2 + s2**2)
    return m1, m2
