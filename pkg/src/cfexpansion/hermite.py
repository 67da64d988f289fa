"""Hermite ratios of the frozen LDL density.

With the linearisation point held fixed, the LDL mean is affine in the start
state with slope ``M = e^{dt A}``, so derivatives of the log-density in ``x``
are polynomial in

    h = M^T Sigma^{-1} (y - mean),      C = M^T Sigma^{-1} M,

and ``d_alpha p / p`` for ``|alpha| <= 3`` follows from ``dh/dx = -C``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .ldl import LdlMoments


class UnsupportedOrderError(ValueError):
    pass


@dataclass(frozen=True)
class HermiteContext:
    h: np.ndarray  # (..., N)
    C: np.ndarray  # (N, N) or broadcastable batch

    @property
    def dim(self) -> int:
        return self.h.shape[-1]


def hermite_context(m: LdlMoments, y) -> HermiteContext:
    y = np.asarray(y, dtype=float)
    Linv = m.chol_inv
    w = np.einsum("...ij,...j->...i", Linv, y - m.mean)
    LM = Linv @ m.transition
    h = np.einsum("...ji,...j->...i", LM, w)
    C = np.swapaxes(LM, -1, -2) @ LM
    return HermiteContext(h, C)


def hermite_ratio(ctx: HermiteContext, alpha) -> np.ndarray:
    """``d_alpha p / p`` for a multi-index given as a tuple of 0-based coordinates."""
    alpha = tuple(int(i) for i in alpha)
    h, C = ctx.h, ctx.C
    if len(alpha) == 1:
        (i,) = alpha
        return h[..., i]
    if len(alpha) == 2:
        i, j = alpha
        return h[..., i] * h[..., j] - C[..., i, j]
    if len(alpha) == 3:
        i, j, k = alpha
        return (
            h[..., i] * h[..., j] * h[..., k]
            - h[..., i] * C[..., j, k]
            - h[..., j] * C[..., i, k]
            - h[..., k] * C[..., i, j]
        )
    raise UnsupportedOrderError(f"Hermite ratios implemented for 1 <= |alpha| <= 3, got {alpha}")


def all_ratios(ctx: HermiteContext, max_order: int = 3) -> dict[tuple[int, ...], np.ndarray]:
    """Every distinct ratio up to ``max_order``, keyed by sorted multi-index."""
    out = {}
    for order in range(1, max_order + 1):
        for alpha in combinations_with_replacement(range(ctx.dim), order):
            out[alpha] = hermite_ratio(ctx, alpha)
    return out
