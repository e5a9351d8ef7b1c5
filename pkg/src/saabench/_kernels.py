"""Compiled inner loops for EM and the MCMC samplers.

Each sampler seeds numba's internal generator from an explicit 32-bit seed
at entry, so output is a pure function of the arguments.
"""

import math

import numpy as np
from numba import njit

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@njit(cache=True)
def _norm_logpdf(y, mu, var):
    d = y - mu
    return -0.5 * d * d / var - 0.5 * math.log(var) - _LOG_SQRT_2PI


# ---------------------------------------------------------------------------
# Gaussian mixture EM with a floor on the component scales

@njit(cache=True)
def mixture_em(y, mu1, mu2, s1, s2, rho, sigma_floor, max_iter, tol):
    """One EM run from the given start. Returns (params, loglik, converged)."""
    n = y.size
    var_floor = sigma_floor * sigma_floor
    v1 = max(s1 * s1, var_floor)
    v2 = max(s2 * s2, var_floor)
    r = np.empty(n)
    ll_old = -np.inf
    converged = False
    ll = -np.inf
    for _ in range(max_iter):
        ll = 0.0
        lr = math.log(rho) if rho > 0.0 else -np.inf
        lr2 = math.log1p(-rho) if rho < 1.0 else -np.inf
        for i in range(n):
            a = lr + _norm_logpdf(y[i], mu1, v1)
            b = lr2 + _norm_logpdf(y[i], mu2, v2)
            m = max(a, b)
            lse = m + math.log(math.exp(a - m) + math.exp(b - m))
            ll += lse
            r[i] = math.exp(a - lse)
        if abs(ll - ll_old) <= tol * (1.0 + abs(ll)):
            converged = True
            break
        ll_old = ll
        n1 = 0.0
        sy1 = 0.0
        sy2 = 0.0
        for i in range(n):
            n1 += r[i]
            sy1 += r[i] * y[i]
            sy2 += (1.0 - r[i]) * y[i]
        n2 = n - n1
        rho = n1 / n
        if n1 > 0.0:
            mu1 = sy1 / n1
        if n2 > 0.0:
            mu2 = sy2 / n2
        ss1 = 0.0
        ss2 = 0.0
        for i in range(n):
            ss1 += r[i] * (y[i] - mu1) ** 2
            ss2 += (1.0 - r[i]) * (y[i] - mu2) ** 2
        v1 = max(ss1 / n1, var_floor) if n1 > 0.0 else var_floor
        v2 = max(ss2 / n2, var_floor) if n2 > 0.0 else var_floor
    out = np.array([mu1, mu2, math.sqrt(v1), math.sqrt(v2), rho])
    return out, ll, converged


# ---------------------------------------------------------------------------
# Random-walk Metropolis for the scaled-beta model, uniform box prior

@njit(cache=True)
def _beta_logpost(a, b, s1, s2, n):
    return (a - 1.0) * s1 + (b - 1.0) * s2 - n * (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


@njit(cache=True)
def _reflect(x, lo, hi):
    """Fold ``x`` back into [lo, hi] by repeated mirror reflection."""
    width = hi - lo
    t = (x - lo) % (2.0 * width)
    if t > width:
        t = 2.0 * width - t
    return lo + t


@njit(cache=True)
def beta_metropolis(s1, s2, n, lo, hi, a0, b0, n_draws, burn_in, thin, seed, target):
    """Diagonal random walk with per-coordinate reflection into [lo, hi]^2.

    During burn-in the global step is tuned by a Robbins-Monro rule towards
    ``target`` acceptance and the per-coordinate shape is set from the
    running standard deviation of the burn-in path.
    """
    np.random.seed(seed)
    a, b = a0, b0
    lp = _beta_logpost(a, b, s1, s2, n)
    width = hi - lo
    log_scale = math.log(0.5 * width / 6.0 * 2.38 / math.sqrt(2.0))
    max_log_scale = math.log(width)
    shape = np.ones(2)
    out = np.empty((n_draws, 2))
    # Welford accumulators over burn-in
    cnt = 0
    mean = np.zeros(2)
    m2 = np.zeros(2)
    accepted = 0
    total = burn_in + n_draws * thin
    k = 0
    for it in range(total):
        step = math.exp(log_scale)
        pa = _reflect(a + step * shape[0] * np.random.standard_normal(), lo, hi)
        pb = _reflect(b + step * shape[1] * np.random.standard_normal(), lo, hi)
        plp = _beta_logpost(pa, pb, s1, s2, n)
        acc = 0.0
        if math.log(np.random.random()) < plp - lp:
            a, b, lp = pa, pb, plp
            acc = 1.0
        if it < burn_in:
            log_scale = min(log_scale + (acc - target) / math.sqrt(it + 1.0), max_log_scale)
            cnt += 1
            for j in range(2):
                v = a if j == 0 else b
                d = v - mean[j]
                mean[j] += d / cnt
                m2[j] += d * (v - mean[j])
            if cnt >= 50 and cnt % 50 == 0:
                sa = math.sqrt(m2[0] / (cnt - 1))
                sb = math.sqrt(m2[1] / (cnt - 1))
                g = math.sqrt(sa * sb)
                if g > 0.0:
                    shape[0] = sa / g
                    shape[1] = sb / g
        else:
            accepted += int(acc)
            if (it - burn_in) % thin == 0:
                out[k, 0] = a
                out[k, 1] = b
                k += 1
    rate = accepted / max(total - burn_in, 1)
    return out, rate


# ---------------------------------------------------------------------------
# Gibbs sampler for the conjugate two-component normal mixture

@njit(cache=True)
def mixture_gibbs(
    y, m, alpha_prec, a0, b0, delta, init, n_draws, burn_in, thin, seed,
    use_likelihood, n_components, fixed_sigma,
):
    """Returns draws with columns (rho, mu1, mu2, var1, var2), mu1 <= mu2.

    Prior per component: precision ~ Gamma(a0, rate b0),
    mean | precision ~ N(m, 1 / (alpha_prec * precision)), weights ~ Dir(delta).
    ``n_components == 1`` puts every point in component 1; ``fixed_sigma > 0``
    pins both standard deviations (conjugate-recovery test hook).
    """
    np.random.seed(seed)
    n = y.size
    rho, mu1, mu2, v1, v2 = init[0], init[1], init[2], init[3], init[4]
    if fixed_sigma > 0.0:
        v1 = fixed_sigma * fixed_sigma
        v2 = v1
    z = np.zeros(n, dtype=np.int64)
    out = np.empty((n_draws, 5))
    total = burn_in + n_draws * thin
    k = 0
    mus = np.empty(2)
    vs = np.empty(2)
    for it in range(total):
        # latent assignments
        if n_components == 2 and use_likelihood:
            lr = math.log(rho) if rho > 0.0 else -np.inf
            lr2 = math.log1p(-rho) if rho < 1.0 else -np.inf
            for i in range(n):
                la = lr + _norm_logpdf(y[i], mu1, v1)
                lb = lr2 + _norm_logpdf(y[i], mu2, v2)
                p1 = 1.0 / (1.0 + math.exp(lb - la)) if la > -np.inf else 0.0
                z[i] = 0 if np.random.random() < p1 else 1
        else:
            for i in range(n):
                z[i] = 0
        cnt = np.zeros(2)
        sy = np.zeros(2)
        if use_likelihood:
            for i in range(n):
                cnt[z[i]] += 1.0
                sy[z[i]] += y[i]
        ybar = np.zeros(2)
        ss = np.zeros(2)
        for c in range(2):
            if cnt[c] > 0:
                ybar[c] = sy[c] / cnt[c]
        if use_likelihood:
            for i in range(n):
                ss[z[i]] += (y[i] - ybar[z[i]]) ** 2
        # weights
        if n_components == 2:
            g1 = np.random.gamma(delta + cnt[0], 1.0)
            g2 = np.random.gamma(delta + cnt[1], 1.0)
            rho = g1 / (g1 + g2)
        else:
            rho = 1.0
        # normal-gamma block per component
        for c in range(2):
            beta_n = alpha_prec + cnt[c]
            m_n = (alpha_prec * m + cnt[c] * ybar[c]) / beta_n
            if fixed_sigma > 0.0:
                prec = 1.0 / (fixed_sigma * fixed_sigma)
            else:
                a_n = a0 + 0.5 * cnt[c]
                b_n = b0 + 0.5 * ss[c] + alpha_prec * cnt[c] * (ybar[c] - m) ** 2 / (2.0 * beta_n)
                prec = np.random.gamma(a_n, 1.0 / b_n)
            vs[c] = 1.0 / prec
            mus[c] = m_n + np.random.standard_normal() / math.sqrt(beta_n * prec)
        mu1, mu2, v1, v2 = mus[0], mus[1], vs[0], vs[1]
        if it >= burn_in and (it - burn_in) % thin == 0:
            if n_components == 2 and mu2 < mu1:
                out[k, 0] = 1.0 - rho
                out[k, 1] = mu2
                out[k, 2] = mu1
                out[k, 3] = v2
                out[k, 4] = v1
            else:
                out[k, 0] = rho
                out[k, 1] = mu1
                out[k, 2] = mu2
                out[k, 3] = v1
                out[k, 4] = v2
            k += 1
    return out


# ---------------------------------------------------------------------------
# Portfolio model: t likelihood, LKJ-Cholesky prior with gamma scales

@njit(cache=True)
def cpc_to_corr_cholesky(zv, d):
    """Lower Cholesky factor of a correlation matrix from canonical partial
    correlations ``zv`` laid out row by row over the strict lower triangle."""
    L = np.zeros((d, d))
    L[0, 0] = 1.0
    p = 0
    for i in range(1, d):
        rem = 1.0
        for j in range(i):
            L[i, j] = zv[p] * math.sqrt(rem)
            rem -= L[i, j] * L[i, j]
            p += 1
        L[i, i] = math.sqrt(max(rem, 0.0))
    return L


@njit(cache=True)
def _portfolio_logpost(x, s, d, gshape, grate, eta, nu, use_likelihood):
    npc = d * (d - 1) // 2
    lp = 0.0
    sig = np.empty(d)
    for i in range(d):
        sig[i] = math.exp(x[i])
        # Gamma(shape, rate) on sigma plus log-Jacobian of sigma = exp(x)
        lp += gshape * x[i] - grate * sig[i]
    zv = np.empty(npc)
    p = 0
    for i in range(1, d):
        for j in range(i):
            t = math.tanh(x[d + p])
            zv[p] = t
            one_m = 1.0 - t * t
            if one_m <= 0.0:
                return -np.inf
            # LKJ: CPC at column j ~ Beta(b, b) on (-1, 1) with
            # b = eta + (d - 2 - j) / 2; the tanh Jacobian adds one power.
            b = eta + 0.5 * (d - 2 - j)
            lp += b * math.log(one_m)
            p += 1
    Lr = cpc_to_corr_cholesky(zv, d)
    logdet = 0.0
    for i in range(d):
        if Lr[i, i] <= 1e-12:
            return -np.inf
        logdet += math.log(Lr[i, i]) + x[i]
    L = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            L[i, j] = sig[i] * Lr[i, j]
    mu = x[d + npc:]
    # mu ~ N(0, L L^T)
    w = np.empty(d)
    q = 0.0
    for i in range(d):
        acc = mu[i]
        for j in range(i):
            acc -= L[i, j] * w[j]
        w[i] = acc / L[i, i]
        q += w[i] * w[i]
    lp += -0.5 * q - logdet
    if use_likelihood:
        n = s.shape[0]
        half = 0.5 * (nu + d)
        ll = 0.0
        for k in range(n):
            q = 0.0
            for i in range(d):
                acc = s[k, i] - mu[i]
                for j in range(i):
                    acc -= L[i, j] * w[j]
                w[i] = acc / L[i, i]
                q += w[i] * w[i]
            ll -= half * math.log1p(q / nu)
        lp += ll - n * logdet
    return lp


@njit(cache=True)
def portfolio_mwg(
    s, x0, init_steps, gshape, grate, eta, nu, n_draws, burn_in, thin, seed,
    use_likelihood, target,
):
    """Metropolis-within-Gibbs over three blocks: log scales, CPC logits, mean.

    Returns (draws of the unconstrained vector, per-block acceptance rates).
    """
    np.random.seed(seed)
    d = s.shape[1]
    npc = d * (d - 1) // 2
    starts = np.array([0, d, d + npc])
    stops = np.array([d, d + npc, d + npc + d])
    x = x0.copy()
    lp = _portfolio_logpost(x, s, d, gshape, grate, eta, nu, use_likelihood)
    log_step = np.log(init_steps)
    total = burn_in + n_draws * thin
    out = np.empty((n_draws, x.size))
    acc_post = np.zeros(3)
    k = 0
    prop = x.copy()
    for it in range(total):
        for blk in range(3):
            step = math.exp(log_step[blk])
            for i in range(x.size):
                prop[i] = x[i]
            for i in range(starts[blk], stops[blk]):
                prop[i] = x[i] + step * np.random.standard_normal()
            plp = _portfolio_logpost(prop, s, d, gshape, grate, eta, nu, use_likelihood)
            acc = 0.0
            if math.log(np.random.random()) < plp - lp:
                for i in range(starts[blk], stops[blk]):
                    x[i] = prop[i]
                lp = plp
                acc = 1.0
            if it < burn_in:
                log_step[blk] += (acc - target) / math.sqrt(it + 1.0)
            else:
                acc_post[blk] += acc
        if it >= burn_in and (it - burn_in) % thin == 0:
            out[k, :] = x
            k += 1
    return out, acc_post / max(total - burn_in, 1)
