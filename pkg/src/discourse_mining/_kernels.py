"""Compiled inner loops: collapsed Gibbs sweeps and elastic-net coordinate descent.

Everything here runs under ``numba.njit`` (nopython), so only plain numpy
arrays and scalars cross the boundary.  Randomness never originates in this
module: callers pass pre-drawn uniforms from a seeded ``numpy`` generator,
which keeps the samplers reproducible bit for bit.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# LDA
# ---------------------------------------------------------------------------


@njit(cache=True)
def gibbs_conditional(n_wk_row, n_kv_col, n_k, alpha, beta, vbeta, out):
    """Unnormalized p(z = k | rest) for one token, written into *out*.

    Counts must already exclude the token being resampled.
    """
    for k in range(out.shape[0]):
        out[k] = (n_wk_row[k] + alpha) * (n_kv_col[k] + beta) / (n_k[k] + vbeta)
    return out


@njit(cache=True)
def _draw(weights, u):
    total = 0.0
    for k in range(weights.shape[0]):
        total += weights[k]
    r = u * total
    acc = 0.0
    for k in range(weights.shape[0]):
        acc += weights[k]
        if r < acc:
            return k
    return weights.shape[0] - 1


@njit(cache=True)
def gibbs_sweep(words, docs, z, n_wk, n_kv, n_k, alpha, beta, u):
    """Resample every token's topic once, in token order, updating counts in place."""
    K = n_k.shape[0]
    vbeta = n_kv.shape[1] * beta
    p = np.empty(K)
    for i in range(words.shape[0]):
        d = docs[i]
        v = words[i]
        k = z[i]
        n_wk[d, k] -= 1
        n_kv[k, v] -= 1
        n_k[k] -= 1
        gibbs_conditional(n_wk[d], n_kv[:, v], n_k, alpha, beta, vbeta, p)
        k = _draw(p, u[i])
        z[i] = k
        n_wk[d, k] += 1
        n_kv[k, v] += 1
        n_k[k] += 1


@njit(cache=True)
def fold_in_sweep(words, docs, z, n_wk, phi, alpha, u):
    """Gibbs sweep over held-out tokens with the topic-word distributions frozen."""
    K = phi.shape[0]
    p = np.empty(K)
    for i in range(words.shape[0]):
        d = docs[i]
        v = words[i]
        n_wk[d, z[i]] -= 1
        for k in range(K):
            p[k] = (n_wk[d, k] + alpha) * phi[k, v]
        k = _draw(p, u[i])
        z[i] = k
        n_wk[d, k] += 1


# ---------------------------------------------------------------------------
# Elastic-net logistic regression
# ---------------------------------------------------------------------------


@njit(cache=True)
def sigmoid(t):
    if t >= 0.0:
        e = math.exp(-t)
        return 1.0 / (1.0 + e)
    e = math.exp(t)
    return e / (1.0 + e)


@njit(cache=True)
def soft_threshold(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def coordinate_update(z, norm, lam, mix):
    """Minimizer of the per-coordinate quadratic majorizer plus the elastic-net penalty."""
    denom = norm + lam * (1.0 - mix)
    if denom <= 0.0:
        return 0.0
    return soft_threshold(z, lam * mix) / denom


@njit(cache=True)
def penalized_objective(eta, y, s, s_total, w, lam, mix):
    loss = 0.0
    for i in range(eta.shape[0]):
        t = eta[i]
        loss += s[i] * (max(t, 0.0) + math.log1p(math.exp(-abs(t))) - y[i] * t)
    loss /= s_total
    l1 = 0.0
    l2 = 0.0
    for j in range(w.shape[0]):
        l1 += abs(w[j])
        l2 += w[j] * w[j]
    return loss + lam * (mix * l1 + 0.5 * (1.0 - mix) * l2)


@njit(cache=True)
def _cd_sweep(X, y, s, s_total, col_norm, w, eta, b, lam, mix, active_only):
    n, p = X.shape
    max_delta = 0.0
    for j in range(p):
        if active_only and w[j] == 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += s[i] * X[i, j] * (sigmoid(eta[i]) - y[i])
        g /= s_total
        new = coordinate_update(col_norm[j] * w[j] - g, col_norm[j], lam, mix)
        delta = new - w[j]
        if delta != 0.0:
            for i in range(n):
                eta[i] += delta * X[i, j]
            w[j] = new
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    # unpenalized intercept; the logistic curvature is bounded by 1/4
    g = 0.0
    for i in range(n):
        g += s[i] * (sigmoid(eta[i]) - y[i])
    g /= s_total
    delta = -4.0 * g
    if delta != 0.0:
        for i in range(n):
            eta[i] += delta
        b += delta
        if abs(delta) > max_delta:
            max_delta = abs(delta)
    return max_delta, b


@njit(cache=True)
def elastic_net_cd(X, y, s, w, b, lam, mix, max_sweeps, tol, trace):
    """Cyclic coordinate descent for penalized binomial deviance.

    *w* is updated in place.  ``trace[t]`` receives the objective after sweep
    *t* (``trace[0]`` is the starting point).  Full sweeps alternate with
    sweeps over the nonzero coordinates; convergence is only declared after a
    full sweep whose largest update is below *tol*.

    Returns ``(intercept, sweeps_run, converged)``.
    """
    n, p = X.shape
    s_total = 0.0
    for i in range(n):
        s_total += s[i]
    col_norm = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += s[i] * X[i, j] * X[i, j]
        col_norm[j] = acc / (4.0 * s_total)
    eta = X @ w + b
    trace[0] = penalized_objective(eta, y, s, s_total, w, lam, mix)

    sweeps = 0
    converged = False
    active_only = False
    while sweeps < max_sweeps:
        max_delta, b = _cd_sweep(X, y, s, s_total, col_norm, w, eta, b, lam, mix, active_only)
        sweeps += 1
        trace[sweeps] = penalized_objective(eta, y, s, s_total, w, lam, mix)
        if max_delta < tol:
            if not active_only:
                converged = True
                break
            active_only = False
        else:
            active_only = True
    return b, sweeps, converged
