"""Finite-difference oracle for derivatives of the frozen LDL density.

With the linearisation held at ``x0`` the density of ``y`` is a Gaussian
whose mean is affine in the start point, ``mean(x) = M x + d``.  Its partial
derivatives in ``x`` are taken by ``mpmath.diff`` at 40 significant digits,
so the finite-difference error is far below the tolerance under test.
"""

from __future__ import annotations

import mpmath
import numpy as np

from cfexpansion.ldl import linear_gaussian_moments


def frozen_density(model, x0, y, dt):
    A, b = model.linearisation(np.asarray(x0, dtype=float))
    sig = model.diffusion(np.asarray(x0, dtype=float))
    mean0, cov, M = linear_gaussian_moments(A, sig @ sig.T, b, np.asarray(x0, dtype=float), dt)
    d = mean0 - M @ np.asarray(x0, dtype=float)
    P = np.linalg.inv(cov)
    n = len(x0)
    Mm = [[mpmath.mpf(M[i, j]) for j in range(n)] for i in range(n)]
    Pm = [[mpmath.mpf(P[i, j]) for j in range(n)] for i in range(n)]
    dm = [mpmath.mpf(v) for v in d]
    ym = [mpmath.mpf(v) for v in y]

    def f(*x):
        r = [ym[i] - dm[i] - sum(Mm[i][j] * x[j] for j in range(n)) for i in range(n)]
        q = sum(r[i] * Pm[i][j] * r[j] for i in range(n) for j in range(n))
        return mpmath.exp(-q / 2)

    return f


def fd_ratio(model, x0, y, dt, alpha):
    """``d_alpha p / p`` at ``x0``; ``alpha`` lists 0-based coordinates."""
    n = len(x0)
    orders = tuple(sum(1 for a in alpha if a == i) for i in range(n))
    f = frozen_density(model, x0, y, dt)
    with mpmath.workdps(40):
        point = [mpmath.mpf(v) for v in x0]
        return float(mpmath.diff(f, point, orders) / f(*point))
