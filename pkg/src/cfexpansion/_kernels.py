"""Compiled per-transition kernels used by the inference code.

The numpy functions elsewhere in the package are vectorised over many
independent transitions; MCMC on hidden paths instead needs many cheap
evaluations of short sequential stretches.  These kernels repeat the same
computations for one transition at a time under numba.

A model is encoded as ``(kind, p, A, b, S)``: for the FitzHugh-Nagumo kinds
``p = (eps, gamma, beta, sigma, s)`` and ``A, b, S`` are unused; for the
linear kind the drift is ``A x + b`` and the diffusion matrix is ``S``.
"""

from __future__ import annotations

import math
import types

import numba
import numpy as np

from . import fhn_coefficients as fc
from .ldl import _van_loan_single

KIND_FHN = 0
KIND_FHN_PARTIAL = 1
KIND_LINEAR = 2

_LOG_2PI = math.log(2.0 * math.pi)



def _rebind(fn, namespace):
    return numba.njit(cache=True)(types.FunctionType(fn.__code__, namespace, fn.__name__))


# compile the coefficient functions with their module helpers swapped for
# compiled versions, so the formulas live in exactly one place
_ns = dict(vars(fc))
_ns["_c"] = _rebind(fc._c, _ns)
_ns["_g"] = _rebind(fc._g, _ns)
_full_e3 = _rebind(fc.full_e3, _ns)
_full_e4 = _rebind(fc.full_e4, _ns)
_full_e5 = _rebind(fc.full_e5, _ns)
_partial_e3 = _rebind(fc.partial_e3, _ns)
_partial_e4 = _rebind(fc.partial_e4, _ns)
_partial_e5 = _rebind(fc.partial_e5, _ns)


@numba.njit(cache=True)
def coefficients(kind, p, A, b, S, x):
    """Linearisation ``(A_x, b_x, a)`` at ``x``."""
    if kind == KIND_LINEAR:
        return A.copy(), b.copy(), S @ S.T
    eps, gam, beta, sig, s = p[0], p[1], p[2], p[3], p[4]
    v, u = x[0], x[1]
    Ax = np.empty((2, 2))
    Ax[0, 0] = (1.0 - 3.0 * v * v) / eps
    Ax[0, 1] = -1.0 / eps
    Ax[1, 0] = gam if kind == KIND_FHN else 0.0
    Ax[1, 1] = -1.0
    bx = np.empty(2)
    bx[0] = (v - v**3 - u - s) / eps - Ax[0, 0] * v - Ax[0, 1] * u
    bx[1] = gam * v - u + beta - Ax[1, 0] * v - Ax[1, 1] * u
    a = np.zeros((2, 2))
    a[1, 1] = sig * sig
    return Ax, bx, a


@numba.njit(cache=True)
def cholesky(C):
    """Lower Cholesky factor and a success flag (no exceptions)."""
    n = C.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        d = C[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if not d > 0.0:
            return L, False
        L[j, j] = math.sqrt(d)
        for i in range(j + 1, n):
            t = C[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    return L, True


@numba.njit(cache=True)
def forward_solve(L, r):
    n = r.shape[0]
    w = np.empty(n)
    for i in range(n):
        t = r[i]
        for k in range(i):
            t -= L[i, k] * w[k]
        w[i] = t / L[i, i]
    return w


@numba.njit(cache=True)
def backward_solve_t(L, r):
    """Solve ``L^T z = r``."""
    n = r.shape[0]
    z = np.empty(n)
    for i in range(n - 1, -1, -1):
        t = r[i]
        for k in range(i + 1, n):
            t -= L[k, i] * z[k]
        z[i] = t / L[i, i]
    return z


@numba.njit(cache=True)
def transition(kind, p, A, b, S, x, dt):
    """``(mean, L, M, ok)`` of the LDL Gaussian from ``x``."""
    Ax, bx, a = coefficients(kind, p, A, b, S, x)
    mean, cov, M = _van_loan_single(Ax, a, bx, x, dt)
    cov = 0.5 * (cov + cov.T)
    L, ok = cholesky(cov)
    return mean, L, M, ok


@numba.njit(cache=True)
def log_taylor(pi, order):
    out = 0.0
    power = 1.0
    for j in range(1, order + 1):
        power *= pi
        if j % 2 == 1:
            out += power / j
        else:
            out -= power / j
    return out


@numba.njit(cache=True)
def correction_pi(kind, p, x, y, dt, mean, L, M, order_j):
    if kind == KIND_LINEAR or order_j < 3:
        return 0.0
    w = forward_solve(L, y - mean)
    LM = np.empty((2, 2))
    for j in range(2):
        LM[:, j] = forward_solve(L, np.ascontiguousarray(M[:, j]))
    h = LM.T @ w
    C = LM.T @ LM
    R = np.empty(9)
    R[0] = h[0]
    R[1] = h[1]
    R[2] = h[0] * h[0] - C[0, 0]
    R[3] = h[0] * h[1] - C[0, 1]
    R[4] = h[1] * h[1] - C[1, 1]
    R[5] = h[0] ** 3 - 3.0 * h[0] * C[0, 0]
    R[6] = h[0] * h[0] * h[1] - h[1] * C[0, 0] - 2.0 * h[0] * C[0, 1]
    R[7] = h[0] * h[1] * h[1] - h[0] * C[1, 1] - 2.0 * h[1] * C[0, 1]
    R[8] = h[1] ** 3 - 3.0 * h[1] * C[1, 1]
    eps, gam, beta, sig, s = p[0], p[1], p[2], p[3], p[4]
    v, u = x[0], x[1]
    pi = 0.0
    if kind == KIND_FHN:
        pi += dt**1.5 * _full_e3(dt, v, u, eps, gam, beta, sig, s, R)
        if order_j >= 4:
            pi += dt**2 * _full_e4(dt, v, u, eps, gam, beta, sig, s, R)
        if order_j >= 5:
            pi += dt**2.5 * _full_e5(dt, v, u, eps, gam, beta, sig, s, R)
    else:
        pi += dt**1.5 * _partial_e3(dt, v, u, eps, gam, beta, sig, s, R)
        if order_j >= 4:
            pi += dt**2 * _partial_e4(dt, v, u, eps, gam, beta, sig, s, R)
        if order_j >= 5:
            pi += dt**2.5 * _partial_e5(dt, v, u, eps, gam, beta, sig, s, R)
    return pi


@numba.njit(cache=True)
def log_proxy_given(kind, p, x, y, dt, mean, L, M, order_j, taylor):
    """``log p~(x, y)`` from precomputed LDL moments of the transition."""
    w = forward_solve(L, y - mean)
    n = y.shape[0]
    lp = -0.5 * np.dot(w, w) - 0.5 * n * _LOG_2PI
    for i in range(n):
        lp -= math.log(L[i, i])
    return lp + log_taylor(correction_pi(kind, p, x, y, dt, mean, L, M, order_j), taylor)


@numba.njit(cache=True)
def log_proxy(kind, p, A, b, S, x, y, dt, order_j, taylor):
    """``(log p~(x, y), ok)`` for one transition."""
    mean, L, M, ok = transition(kind, p, A, b, S, x, dt)
    if not ok:
        return -np.inf, False
    return log_proxy_given(kind, p, x, y, dt, mean, L, M, order_j, taylor), True


@numba.njit(cache=True)
def chain_log_proxy(kind, p, A, b, S, X, dt, order_j, taylor):
    """Per-transition ``log p~`` along a path ``X`` of shape ``(K + 1, N)``."""
    K = X.shape[0] - 1
    out = np.empty(K)
    for k in range(K):
        lp, ok = log_proxy(kind, p, A, b, S, X[k], X[k + 1], dt, order_j, taylor)
        out[k] = lp if ok else -np.inf
    return out


@numba.njit(cache=True)
def obs_loglik(X, Y, stride, tau):
    out = 0.0
    for k in range(Y.shape[0]):
        r = Y[k] - X[k * stride, 0]
        out += -0.5 * r * r / (tau * tau) - math.log(tau) - 0.5 * _LOG_2PI
    return out


@numba.njit(cache=True)
def init_loglik(x0, m0, s0):
    out = 0.0
    for i in range(x0.shape[0]):
        r = (x0[i] - m0[i]) / s0[i]
        out += -0.5 * r * r - math.log(s0[i]) - 0.5 * _LOG_2PI
    return out


@numba.njit(cache=True)
def log_target_centred(kind, p, A, b, S, X, dt, order_j, taylor, Y, stride, tau, m0, s0):
    """Hidden-path posterior terms in state coordinates (parameter prior excluded)."""
    lp = init_loglik(X[0], m0, s0) + obs_loglik(X, Y, stride, tau)
    for k in range(X.shape[0] - 1):
        t, ok = log_proxy(kind, p, A, b, S, X[k], X[k + 1], dt, order_j, taylor)
        if not ok:
            return -np.inf
        lp += t
    return lp


@numba.njit(cache=True)
def path_from_latents(kind, p, A, b, S, eta, dt, m0, s0):
    """Non-centred map: ``X_0 = m0 + s0 eta_0``, ``X_k = mean_k + L_k eta_k``."""
    K1, n = eta.shape
    X = np.empty((K1, n))
    for i in range(n):
        X[0, i] = m0[i] + s0[i] * eta[0, i]
    for k in range(1, K1):
        mean, L, M, ok = transition(kind, p, A, b, S, X[k - 1], dt)
        if not ok:
            return X, False
        X[k] = mean + L @ eta[k]
        for i in range(n):
            if not np.isfinite(X[k, i]):
                return X, False
    return X, True


@numba.njit(cache=True)
def latents_from_path(kind, p, A, b, S, X, dt, m0, s0):
    K1, n = X.shape
    eta = np.empty((K1, n))
    for i in range(n):
        eta[0, i] = (X[0, i] - m0[i]) / s0[i]
    for k in range(1, K1):
        mean, L, M, ok = transition(kind, p, A, b, S, X[k - 1], dt)
        if not ok:
            return eta, False
        eta[k] = forward_solve(L, X[k] - mean)
    return eta, True


@numba.njit(cache=True)
def log_target_noncentred(kind, p, A, b, S, eta, dt, order_j, taylor, Y, stride, tau, m0, s0):
    """Posterior terms in latent-noise coordinates (parameter prior excluded).

    The baseline density and the Jacobian of the non-centred map cancel, leaving
    standard normal latents, the correction factors and the observation terms.
    """
    X, ok = path_from_latents(kind, p, A, b, S, eta, dt, m0, s0)
    if not ok:
        return -np.inf, X
    lp = -0.5 * np.sum(eta * eta) - 0.5 * eta.size * _LOG_2PI + obs_loglik(X, Y, stride, tau)
    if (kind != KIND_LINEAR) and order_j >= 3:
        for k in range(X.shape[0] - 1):
            mean, L, M, ok = transition(kind, p, A, b, S, X[k], dt)
            lp += log_taylor(correction_pi(kind, p, X[k], X[k + 1], dt, mean, L, M, order_j), taylor)
    return lp, X


# ---------------------------------------------------------------- window moves


@numba.njit(cache=True)
def window_gaussian(X, a, e, off, tmean, tL, tM, Y, stride, tau, m0, s0):
    """Gaussian approximation to the states ``X[a..e]`` given everything else.

    Transitions are linearised around the current values in ``X``; their LDL
    moments for transition ``k`` (from ``X[k-1]``) are ``tmean[k - off]``,
    ``tL[k - off]`` and ``tM[k - off]``.  Returns the mean, the lower
    Cholesky factor of the precision and a success flag.
    """
    n = X.shape[1]
    K = X.shape[0] - 1
    w = e - a + 1
    D = n * w
    Q = np.zeros((D, D))
    lvec = np.zeros(D)
    if a == 0:
        for i in range(n):
            Q[i, i] += 1.0 / (s0[i] * s0[i])
            lvec[i] += m0[i] / (s0[i] * s0[i])
    for k in range(max(a, 1), min(e + 1, K) + 1):
        mean = tmean[k - off]
        Linv = _lower_inverse(tL[k - off])
        P = Linv.T @ Linv
        prev_free = k - 1 >= a
        next_free = k <= e
        if prev_free:
            # frozen-coefficient slope of the mean; the MH step corrects the rest
            Jm = tM[k - off].copy()
            c = mean - Jm @ X[k - 1]
        else:
            Jm = np.zeros((n, n))
            c = mean.copy()
        PJ = P @ Jm
        ik = (k - a) * n
        ip = (k - 1 - a) * n
        if next_free:
            Q[ik:ik + n, ik:ik + n] += P
            lvec[ik:ik + n] += P @ c
            if prev_free:
                Q[ik:ik + n, ip:ip + n] -= PJ
                Q[ip:ip + n, ik:ik + n] -= PJ.T
        if prev_free:
            Q[ip:ip + n, ip:ip + n] += Jm.T @ PJ
            if next_free:
                lvec[ip:ip + n] -= PJ.T @ c
            else:
                lvec[ip:ip + n] += PJ.T @ (X[k] - c)
    inv_t2 = 1.0 / (tau * tau)
    for k in range(a, e + 1):
        if k % stride == 0:
            i = (k - a) * n
            Q[i, i] += inv_t2
            lvec[i] += Y[k // stride] * inv_t2
    R, ok = cholesky(Q)
    if not ok:
        return lvec, Q, False
    mu = backward_solve_t(R, forward_solve(R, lvec))
    return mu, R, True


@numba.njit(cache=True)
def gaussian_precision_logpdf(z, mu, R):
    """Log-density of ``N(mu, (R R^T)^{-1})`` at ``z``."""
    d = z - mu
    q = R.T @ d
    out = -0.5 * np.dot(q, q) - 0.5 * z.shape[0] * _LOG_2PI
    for i in range(z.shape[0]):
        out += math.log(R[i, i])
    return out


@numba.njit(cache=True)
def _window_local_terms(X, a, e, Y, stride, tau, m0, s0):
    lp = 0.0
    if a == 0:
        lp += init_loglik(X[0], m0, s0)
    for k in range(a, e + 1):
        if k % stride == 0:
            r = Y[k // stride] - X[k, 0]
            lp += -0.5 * r * r / (tau * tau)
    return lp


@numba.njit(cache=True)
def path_transitions(kind, p, A, b, S, X, dt, order_j, taylor):
    """LDL moments and ``log p~`` of every transition along ``X`` (index ``k`` = into ``X[k]``)."""
    n = X.shape[1]
    K = X.shape[0] - 1
    tmean = np.zeros((K + 1, n))
    tL = np.zeros((K + 1, n, n))
    tM = np.zeros((K + 1, n, n))
    tlp = np.zeros(K + 1)
    for k in range(1, K + 1):
        mean, L, M, ok = transition(kind, p, A, b, S, X[k - 1], dt)
        if not ok:
            return tmean, tL, tM, tlp, False
        tmean[k] = mean
        tL[k] = L
        tM[k] = M
        tlp[k] = log_proxy_given(kind, p, X[k - 1], X[k], dt, mean, L, M, order_j, taylor)
    return tmean, tL, tM, tlp, True


@numba.njit(cache=True)
def latent_sweep(kind, p, A, b, S, X, starts, width, normals, log_u, dt, order_j, taylor, Y, stride, tau, m0, s0):
    """Metropolis-Hastings updates of state windows with linearised Gaussian proposals.

    ``normals`` has shape ``(len(starts), width * N)`` and ``log_u`` holds one
    log-uniform per window.  ``X`` is updated in place; returns acceptances.
    """
    n = X.shape[1]
    K = X.shape[0] - 1
    accepted = 0
    tmean, tL, tM, tlp, ok = path_transitions(kind, p, A, b, S, X, dt, order_j, taylor)
    if not ok:
        return 0
    for t in range(starts.shape[0]):
        a = starts[t]
        e = min(a + width - 1, K)
        w = e - a + 1
        D = w * n
        mu, R, ok = window_gaussian(X, a, e, 0, tmean, tL, tM, Y, stride, tau, m0, s0)
        if not ok:
            continue
        z_old = X[a:e + 1].copy().ravel()
        z_new = mu + backward_solve_t(R, normals[t, :D])
        lo = max(a, 1)
        hi = min(e + 1, K)
        lt_old = _window_local_terms(X, a, e, Y, stride, tau, m0, s0)
        for k in range(lo, hi + 1):
            lt_old += tlp[k]
        X[a:e + 1] = z_new.reshape((w, n))
        # moments of the affected transitions at the proposed states
        nm = np.zeros((hi - lo + 1, n))
        nL = np.zeros((hi - lo + 1, n, n))
        nM = np.zeros((hi - lo + 1, n, n))
        nlp = np.zeros(hi - lo + 1)
        good = True
        for k in range(lo, hi + 1):
            if k - 1 >= a:
                mean, L, M, ok = transition(kind, p, A, b, S, X[k - 1], dt)
                if not ok:
                    good = False
                    break
            else:
                mean, L, M = tmean[k], tL[k], tM[k]
            nm[k - lo] = mean
            nL[k - lo] = L
            nM[k - lo] = M
            nlp[k - lo] = log_proxy_given(kind, p, X[k - 1], X[k], dt, mean, L, M, order_j, taylor)
        lt_new = -np.inf
        if good:
            mu_r, R_r, ok_r = window_gaussian(X, a, e, lo, nm, nL, nM, Y, stride, tau, m0, s0)
            if ok_r:
                lt_new = _window_local_terms(X, a, e, Y, stride, tau, m0, s0) + np.sum(nlp)
        if np.isfinite(lt_new):
            log_ratio = (
                lt_new - lt_old
                + gaussian_precision_logpdf(z_old, mu_r, R_r)
                - gaussian_precision_logpdf(z_new, mu, R)
            )
            if log_u[t] < log_ratio:
                tmean[lo:hi + 1] = nm
                tL[lo:hi + 1] = nL
                tM[lo:hi + 1] = nM
                tlp[lo:hi + 1] = nlp
                accepted += 1
                continue
        X[a:e + 1] = z_old.reshape((w, n))
    return accepted


# ------------------------------------------------- whole-path Gaussian approximation


@numba.njit(cache=True)
def _lower_inverse(L):
    n = L.shape[0]
    out = np.empty((n, n))
    for j in range(n):
        ej = np.zeros(n)
        ej[j] = 1.0
        out[:, j] = forward_solve(L, ej)
    return out


@numba.njit(cache=True)
def path_gaussian(kind, p, A, b, S, Xref, dt, Y, stride, tau, m0, s0):
    """Gaussian approximation of the whole path given the data.

    Transitions are linearised around ``Xref``.  The precision is block
    tridiagonal; its block Cholesky factor is returned as diagonal blocks
    ``Ld[k]`` and sub-diagonal blocks ``Ls[k]`` (row ``k``, column ``k - 1``),
    together with the mean and a success flag.
    """
    n = Xref.shape[1]
    K = Xref.shape[0] - 1
    Qd = np.zeros((K + 1, n, n))
    Qs = np.zeros((K + 1, n, n))
    lv = np.zeros((K + 1, n))
    for i in range(n):
        Qd[0, i, i] += 1.0 / (s0[i] * s0[i])
        lv[0, i] += m0[i] / (s0[i] * s0[i])
    for k in range(1, K + 1):
        mean, L, M, ok = transition(kind, p, A, b, S, Xref[k - 1], dt)
        if not ok:
            return lv, Qd, Qs, False
        Li = _lower_inverse(L)
        P = Li.T @ Li
        c = mean - M @ Xref[k - 1]
        PM = P @ M
        Qd[k] += P
        lv[k] += P @ c
        Qs[k] -= PM
        Qd[k - 1] += M.T @ PM
        lv[k - 1] -= PM.T @ c
    inv_t2 = 1.0 / (tau * tau)
    for k in range(0, K + 1, stride):
        Qd[k, 0, 0] += inv_t2
        lv[k, 0] += Y[k // stride] * inv_t2
    Ld = np.zeros((K + 1, n, n))
    Ls = np.zeros((K + 1, n, n))
    y = np.zeros((K + 1, n))
    for k in range(K + 1):
        D = Qd[k].copy()
        r = lv[k].copy()
        if k > 0:
            # Ls[k] = Qs[k] Ld[k-1]^{-T}
            Ls[k] = Qs[k] @ _lower_inverse(Ld[k - 1]).T
            D -= Ls[k] @ Ls[k].T
            r -= Ls[k] @ y[k - 1]
        Lk, ok = cholesky(0.5 * (D + D.T))
        if not ok:
            return lv, Qd, Qs, False
        Ld[k] = Lk
        y[k] = forward_solve(Lk, r)
    mu = path_from_standard(Ld, Ls, np.zeros((K + 1, n)), y)
    return mu, Ld, Ls, True


@numba.njit(cache=True)
def path_from_standard(Ld, Ls, mu, zeta):
    """``X = mu + R^{-T} zeta`` for the block factor ``R`` of the precision."""
    K = Ld.shape[0] - 1
    n = Ld.shape[1]
    d = np.zeros((K + 1, n))
    for k in range(K, -1, -1):
        r = zeta[k].copy()
        if k < K:
            r -= Ls[k + 1].T @ d[k + 1]
        d[k] = backward_solve_t(Ld[k], r)
    return mu + d


@numba.njit(cache=True)
def standard_from_path(Ld, Ls, mu, X):
    """Inverse of :func:`path_from_standard`, ``zeta = R^T (X - mu)``."""
    K = Ld.shape[0] - 1
    d = X - mu
    z = np.zeros_like(d)
    for k in range(K + 1):
        z[k] = Ld[k].T @ d[k]
        if k < K:
            z[k] += Ls[k + 1].T @ d[k + 1]
    return z


@numba.njit(cache=True)
def block_log_det(Ld):
    out = 0.0
    for k in range(Ld.shape[0]):
        for i in range(Ld.shape[1]):
            out += math.log(Ld[k, i, i])
    return out
