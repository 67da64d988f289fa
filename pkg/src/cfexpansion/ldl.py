"""Gaussian transition law of the local drift linearisation (LDL) scheme.

Freezing the drift's first-order Taylor expansion and the diffusion at the
start point ``x`` gives the linear SDE

    dX = (A_x X + b_x) dt + sigma(x) dB,

whose transition over ``dt`` is Gaussian with

    mean = e^{dt A} x + int_0^dt e^{(dt-s) A} b ds
    cov  = int_0^dt e^{(dt-s) A} a e^{(dt-s) A^T} ds,      a = sigma sigma^T.

Both integrals come out of one exponential of the block matrix

    [[A, a, b], [0, -A^T, 0], [0, 0, 0]] * dt

(Van Loan's construction): the (1,2) block times ``e^{dt A^T}`` is the
covariance and the (1,3) block is the drift integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .models import SdeModel, _as_state


class DegenerateMomentsError(ArithmeticError):
    """The LDL covariance is not positive definite."""

    def __init__(self, message, smallest_eigenvalue=None, index=None):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue
        self.index = index


_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152
_THETA_LOW = (1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1, 2.097847961257068)
_PADE3 = np.array([120.0, 60.0, 12.0, 1.0])
_PADE5 = np.array([30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0])
_PADE7 = np.array([17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0])
_PADE9 = np.array([17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0,
                   110880.0, 3960.0, 90.0, 1.0])


@numba.njit(cache=True)
def _mm(X, Y):
    # explicit loops beat a BLAS call for the tiny matrices used here
    n, m, p = X.shape[0], X.shape[1], Y.shape[1]
    out = np.zeros((n, p))
    for i in range(n):
        for k in range(m):
            xik = X[i, k]
            for j in range(p):
                out[i, j] += xik * Y[k, j]
    return out


@numba.njit(cache=True)
def _solve(A, B):
    """Gaussian elimination with partial pivoting for ``A X = B``."""
    n = A.shape[0]
    A = A.copy()
    B = B.copy()
    for c in range(n):
        piv = c
        for r in range(c + 1, n):
            if abs(A[r, c]) > abs(A[piv, c]):
                piv = r
        if piv != c:
            for j in range(n):
                A[c, j], A[piv, j] = A[piv, j], A[c, j]
            for j in range(B.shape[1]):
                B[c, j], B[piv, j] = B[piv, j], B[c, j]
        d = A[c, c]
        for r in range(c + 1, n):
            f = A[r, c] / d
            if f != 0.0:
                for j in range(c, n):
                    A[r, j] -= f * A[c, j]
                for j in range(B.shape[1]):
                    B[r, j] -= f * B[c, j]
    for c in range(n - 1, -1, -1):
        for j in range(B.shape[1]):
            t = B[c, j]
            for k in range(c + 1, n):
                t -= A[c, k] * B[k, j]
            B[c, j] = t / A[c, c]
    return B


@numba.njit(cache=True)
def _pade_low(As, b, m):
    """Pade approximant of degree ``m`` in (3, 5, 7, 9) without scaling."""
    n = As.shape[0]
    ident = np.eye(n)
    A2 = _mm(As, As)
    Upoly = b[1] * ident
    Vpoly = b[0] * ident
    P = ident
    for k in range(1, m // 2 + 1):
        P = _mm(P, A2)
        Upoly = Upoly + b[2 * k + 1] * P
        Vpoly = Vpoly + b[2 * k] * P
    U = _mm(As, Upoly)
    return _solve(Vpoly - U, Vpoly + U)


@numba.njit(cache=True)
def _expm_single(A):
    # degree selection and scaling follow Higham (2005)
    n = A.shape[0]
    norm = 0.0
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += abs(A[i, j])
        norm = max(norm, col)
    if norm <= _THETA_LOW[0]:
        return _pade_low(A, _PADE3, 3)
    if norm <= _THETA_LOW[1]:
        return _pade_low(A, _PADE5, 5)
    if norm <= _THETA_LOW[2]:
        return _pade_low(A, _PADE7, 7)
    if norm <= _THETA_LOW[3]:
        return _pade_low(A, _PADE9, 9)
    b = _PADE13
    s = 0
    if norm > _THETA13:
        s = int(math.ceil(math.log2(norm / _THETA13)))
    As = A / (2.0**s)
    ident = np.eye(n)
    A2 = _mm(As, As)
    A4 = _mm(A2, A2)
    A6 = _mm(A4, A2)
    U = _mm(As, _mm(A6, b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = _mm(A6, b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    R = _solve(V - U, V + U)
    for _ in range(s):
        R = _mm(R, R)
    return R


@numba.njit(cache=True)
def _expm_stack(A):
    out = np.empty_like(A)
    for k in range(A.shape[0]):
        out[k] = _expm_single(np.ascontiguousarray(A[k]))
    return out


def mat_exp(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with Pade approximants of degree 3 to 13.

    Accepts a single ``(n, n)`` matrix or a stack ``(..., n, n)``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"mat_exp needs square matrices, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("mat_exp input contains non-finite entries")
    if A.ndim == 2:
        return _expm_single(np.ascontiguousarray(A))
    flat = np.ascontiguousarray(A.reshape((-1,) + A.shape[-2:]))
    return _expm_stack(flat).reshape(A.shape)


@numba.njit(cache=True)
def _van_loan_single(A, a, b, x, dt):
    n = A.shape[0]
    C = np.zeros((2 * n + 1, 2 * n + 1))
    for i in range(n):
        for j in range(n):
            C[i, j] = A[i, j] * dt
            C[i, n + j] = a[i, j] * dt
            C[n + i, n + j] = -A[j, i] * dt
        C[i, 2 * n] = b[i] * dt
    E = _expm_single(C)
    M = np.ascontiguousarray(E[:n, :n])
    G = np.ascontiguousarray(E[:n, n : 2 * n])
    cov = _mm(G, np.ascontiguousarray(M.T))
    mean = np.empty(n)
    for i in range(n):
        t = E[i, 2 * n]
        for j in range(n):
            t += M[i, j] * x[j]
        mean[i] = t
    return mean, cov, M


@numba.njit(cache=True)
def _van_loan_stack(A, a, b, x, dt):
    K, n = x.shape
    means = np.empty((K, n))
    covs = np.empty((K, n, n))
    Ms = np.empty((K, n, n))
    for k in range(K):
        m, c, M = _van_loan_single(
            np.ascontiguousarray(A[k]), np.ascontiguousarray(a[k]), np.ascontiguousarray(b[k]),
            np.ascontiguousarray(x[k]), dt,
        )
        means[k] = m
        covs[k] = c
        Ms[k] = M
    return means, covs, Ms


def linear_gaussian_moments(A, a, b, x, dt):
    """Exact mean, covariance and transition matrix of dX=(AX+b)dt+dM, <M>=a dt.

    All arguments may carry one common leading batch dimension.
    """
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return _van_loan_single(
            np.ascontiguousarray(A), np.ascontiguousarray(a, dtype=float),
            np.ascontiguousarray(b, dtype=float), np.ascontiguousarray(x), float(dt),
        )
    K = x.shape[0]
    n = x.shape[1]
    A = np.ascontiguousarray(np.broadcast_to(A, (K, n, n)))
    a = np.ascontiguousarray(np.broadcast_to(np.asarray(a, dtype=float), (K, n, n)))
    b = np.ascontiguousarray(np.broadcast_to(np.asarray(b, dtype=float), (K, n)))
    return _van_loan_stack(A, a, b, np.ascontiguousarray(x), float(dt))


@dataclass(frozen=True)
class LdlMoments:
    """Gaussian LDL transition law; fields may carry a leading batch dimension."""

    mean: np.ndarray
    cov: np.ndarray
    transition: np.ndarray
    chol: np.ndarray
    log_det: np.ndarray | float

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    @property
    def chol_inv(self) -> np.ndarray:
        return np.linalg.inv(self.chol)

    def __getitem__(self, k) -> "LdlMoments":
        return LdlMoments(self.mean[k], self.cov[k], self.transition[k], self.chol[k], self.log_det[k])


def factorize(cov: np.ndarray):
    """Symmetrise and Cholesky-factorise ``cov`` (single or stacked).

    A failed factorisation is retried once with a jitter of
    ``1e-12 * trace / N`` on the failing matrices; a second failure raises.
    """
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    if not np.all(np.isfinite(cov)):
        raise DegenerateMomentsError("LDL covariance has non-finite entries")
    try:
        return cov, np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    n = cov.shape[-1]
    stack = cov.reshape((-1, n, n)).copy()
    eig = np.linalg.eigvalsh(stack)
    bad = eig[:, 0] <= 0.0
    if not np.any(bad):
        bad = np.ones(len(stack), dtype=bool)
    jitter = 1e-12 * np.trace(stack[bad], axis1=-2, axis2=-1) / n
    stack[bad] += jitter[:, None, None] * np.eye(n)
    try:
        chol = np.linalg.cholesky(stack)
    except np.linalg.LinAlgError:
        idx = int(np.argmin(eig[:, 0]))
        raise DegenerateMomentsError(
            f"LDL covariance not positive definite (smallest eigenvalue {eig[idx, 0]:.3e}"
            + (f" at transition {idx})" if cov.ndim > 2 else ")"),
            smallest_eigenvalue=float(eig[idx, 0]),
            index=idx if cov.ndim > 2 else None,
        ) from None
    return stack.reshape(cov.shape), chol.reshape(cov.shape)


def moments_from_arrays(mean, cov, transition) -> LdlMoments:
    cov, chol = factorize(cov)
    log_det = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1)
    return LdlMoments(mean, cov, transition, chol, log_det)


def ldl_moments(model: SdeModel, x, dt: float) -> LdlMoments:
    """LDL transition law from ``x`` over ``dt``.

    ``x`` may be a single state ``(N,)`` or a batch ``(K, N)``; the result is
    batched accordingly.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = _as_state(x, model.n_total)
    A, b = model.linearisation(x)
    sig = model.diffusion(x)
    a = sig @ np.swapaxes(sig, -1, -2)
    mean, cov, M = linear_gaussian_moments(A, a, b, x, dt)
    return moments_from_arrays(mean, cov, M)


def gaussian_logpdf(m: LdlMoments, y) -> np.ndarray:
    """Multivariate normal log-density; ``y`` broadcasts against the moments."""
    y = np.asarray(y, dtype=float)
    r = y - m.mean
    w = np.einsum("...ij,...j->...i", m.chol_inv, r)
    n = m.dim
    return -0.5 * np.sum(w * w, axis=-1) - 0.5 * m.log_det - 0.5 * n * math.log(2.0 * math.pi)


def gaussian_sample(m: LdlMoments, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw ``mean + L z`` with ``z`` standard normal."""
    shape = (m.dim,) if size is None else tuple(np.atleast_1d(size)) + (m.dim,)
    z = rng.standard_normal(shape)
    return m.mean + np.einsum("...ij,...j->...i", m.chol, z)
