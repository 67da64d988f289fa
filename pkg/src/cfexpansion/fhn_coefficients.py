"""Correction coefficients e_3, e_4, e_5 for the FitzHugh-Nagumo model.

Coordinates are ``x = (v, u)`` with ``v`` smooth.  ``H`` maps 0-based sorted
multi-indices to Hermite ratios of the frozen LDL density, e.g. ``R[3]``
is ``d_v d_u p / p``.  Explicit powers of ``dt`` sit inside each e_k; the
caller assembles ``sum_k dt^{k/2} e_k``.

The drift is ``((v - v^3 - u - s)/eps, gamma v - u + beta)``, and
``c = s - v + v^3 + u`` is minus ``eps`` times its first component.

``full_*`` pair with the full linearisation (Jacobian frozen at x), and
``partial_*`` with the linearisation that drops the ``gamma`` entry.
"""

from __future__ import annotations

RATIO_ORDER = ((0,), (1,), (0, 0), (0, 1), (1, 1), (0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1))


def _c(v, u, s):
    return s - v + v**3 + u


def full_e3(dt, v, u, eps, gam, beta, sig, s, R):
    c = _c(v, u, s)
    return -(dt**1.5 / 6.0) * (6.0 * v * c**2 / eps**3) * R[0]


def full_e4(dt, v, u, eps, gam, beta, sig, s, R):
    c = _c(v, u, s)
    return (
        -(dt**2 / 24.0) * (18.0 * sig**2 * v * c / eps**3) * R[3]
        - (dt**3 / 120.0) * (24.0 * sig**2 * v * c / eps**4) * R[2]
    )


def full_e5(dt, v, u, eps, gam, beta, sig, s, R):
    c = _c(v, u, s)
    w1 = 6.0 * (-3.0 * v * eps * c * (beta + gam * v - u) + c**3 - sig**2 * v * eps) / eps**4
    return (
        (dt**1.5 / 24.0) * w1 * R[0]
        - (dt**2.5 / 120.0) * (18.0 * v * sig**4 / eps**3) * R[7]
        - (dt**3.5 / 720.0) * (60.0 * v * sig**4 / eps**4) * R[6]
        - (dt**4.5 / 5040.0) * (60.0 * v * sig**4 / eps**5) * R[5]
    )


def partial_e3(dt, v, u, eps, gam, beta, sig, s, R):
    c = _c(v, u, s)
    return (
        -(dt**0.5 / 2.0) * (c * gam / eps) * R[1]
        - (dt**1.5 / 6.0) * ((6.0 * v * c**2 + 2.0 * c * gam * eps) / eps**3) * R[0]
    )


def partial_e4(dt, v, u, eps, gam, beta, sig, s, R):
    c = _c(v, u, s)
    return (
        -(dt / 6.0) * (gam * sig**2 / eps) * R[4]
        - (dt**2 / 24.0) * (2.0 * sig**2 * (9.0 * v * c + 2.0 * gam * eps) / eps**3) * R[3]
        - (dt**3 / 120.0) * (4.0 * sig**2 * (6.0 * v * c + gam * eps) / eps**4) * R[2]
    )


def _g(v, u, eps, gam, beta, sig, s):
    q = v**3 - v + u
    inner = (
        beta * gam * eps**2
        - 2.0 * s**3
        - 6.0 * s**2 * q
        + s * (gam * eps**2 - 6.0 * q**2 + 6.0 * v * eps * (beta + gam * v - u))
        - 2.0 * v**9
        + 6.0 * v**7
        - 6.0 * v**6 * u
        + 6.0 * v**5 * (gam * eps - 1.0)
        + 6.0 * v**4 * (beta * eps - u * (eps - 2.0))
        + v**3 * (gam * (eps - 6.0) * eps - 6.0 * u**2 + 2.0)
        + 6.0 * v**2 * (u * (gam * eps + eps - 1.0) - beta * eps)
        + v * (eps * ((gam - 1.0) * gam * eps + 2.0 * sig**2) - 6.0 * u**2 * (eps - 1.0) + 6.0 * beta * u * eps)
        - 2.0 * u**3
    )
    return -3.0 / eps**4 * inner


def partial_e5(dt, v, u, eps, gam, beta, sig, s, R):
    c = _c(v, u, s)
    w2 = (
        gam * (3.0 * v**2 - 1.0) * c
        - gam * eps * (beta + 2.0 * s + 2.0 * v**3 + (gam - 2.0) * v + u)
    ) / eps**2
    return (
        (dt**0.5 / 6.0) * w2 * R[1]
        + (dt**1.5 / 24.0) * _g(v, u, eps, gam, beta, sig, s) * R[0]
        - (dt**2.5 / 120.0) * (18.0 * v * sig**4 / eps**3) * R[7]
        - (dt**3.5 / 720.0) * (60.0 * v * sig**4 / eps**4) * R[6]
        - (dt**4.5 / 5040.0) * (60.0 * v * sig**4 / eps**5) * R[5]
    )


FULL = {3: full_e3, 4: full_e4, 5: full_e5}
PARTIAL = {3: partial_e3, 4: partial_e4, 5: partial_e5}
