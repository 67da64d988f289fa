"""Closed-form transition-density proxy around the LDL Gaussian.

The expansion reads

    p(x, y) ~ pbar(x, y) * (1 + pi),      pi = sum_{k=3}^J dt^{k/2} e_k,

with ``e_1 = e_2 = 0`` for additive noise.  Since ``1 + pi`` can go negative,
the positive proxy ``pbar * exp(T(pi))`` is used in practice, where ``T`` is
the Taylor polynomial of ``log(1 + xi)`` truncated at an even order.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from . import fhn_coefficients
from .hermite import all_ratios, hermite_context
from .ldl import LdlMoments, gaussian_logpdf, ldl_moments
from .models import FitzHughNagumo, LinearSde, OrnsteinUhlenbeck, SdeModel, UnderdampedLangevin


class Variant(str, enum.Enum):
    FULL = "DE-I"
    PARTIAL = "DE-II"
    LINEAR = "exact-linear"


class PairingError(ValueError):
    """The correction variant does not match the model."""


_LINEAR_MODELS = (LinearSde, OrnsteinUhlenbeck, UnderdampedLangevin)


@dataclass(frozen=True)
class CorrectionSpec:
    order_j: int = 5
    taylor_order: int = 2
    variant: Variant = Variant.FULL

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 2 <= self.order_j <= 5:
            raise ValueError(f"order_j must be in 2..5, got {self.order_j}")
        if self.taylor_order < 2 or self.taylor_order % 2:
            raise ValueError(f"taylor_order must be even and >= 2, got {self.taylor_order}")

    def with_order(self, order_j: int) -> "CorrectionSpec":
        return CorrectionSpec(order_j, self.taylor_order, self.variant)


def default_variant(model: SdeModel) -> Variant:
    if isinstance(model, FitzHughNagumo):
        return Variant.PARTIAL if model.partial else Variant.FULL
    return Variant.LINEAR


def check_pairing(spec: CorrectionSpec, model: SdeModel) -> None:
    if spec.variant is Variant.LINEAR:
        ok = isinstance(model, _LINEAR_MODELS)
    else:
        ok = isinstance(model, FitzHughNagumo) and model.partial == (spec.variant is Variant.PARTIAL)
    if not ok:
        raise PairingError(f"variant {spec.variant.value} cannot be used with model {model.name}")


@dataclass(frozen=True)
class ExpansionResult:
    """Fields broadcast over the evaluation points."""

    log_baseline: np.ndarray
    pi: np.ndarray
    log_proxy: np.ndarray
    raw: np.ndarray

    @property
    def proxy(self) -> np.ndarray:
        return np.exp(self.log_proxy)

    @property
    def negative_raw_count(self) -> int:
        return int(np.sum(self.raw < 0))


def log_taylor(pi, taylor_order: int = 2):
    """``sum_{j=1}^{J'} (-1)^{j+1} pi^j / j``."""
    pi = np.asarray(pi, dtype=float)
    out = np.zeros_like(pi)
    power = np.ones_like(pi)
    for j in range(1, taylor_order + 1):
        power = power * pi
        out = out + (1.0 if j % 2 else -1.0) * power / j
    return out if out.ndim else float(out)


def coefficient_terms(spec: CorrectionSpec, model: SdeModel, x, moments: LdlMoments, y, dt: float):
    """``{k: dt^{k/2} e_k}`` for ``3 <= k <= J``; empty for the linear variant."""
    check_pairing(spec, model)
    if spec.variant is Variant.LINEAR or spec.order_j < 3:
        return {}
    H = all_ratios(hermite_context(moments, y))
    R = [H[a] for a in fhn_coefficients.RATIO_ORDER]
    x = np.asarray(x, dtype=float)
    v, u = x[..., 0], x[..., 1]
    table = fhn_coefficients.PARTIAL if spec.variant is Variant.PARTIAL else fhn_coefficients.FULL
    args = (dt, v, u, model.epsilon, model.gamma, model.beta, model.sigma, model.s, R)
    return {k: dt ** (k / 2.0) * table[k](*args) for k in range(3, spec.order_j + 1)}


def _pi_from_terms(terms, shape):
    pi = np.zeros(shape)
    for k in sorted(terms):
        pi = pi + terms[k]
    return pi


def _check_dt(dt):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt >= 1:
        warnings.warn(f"dt={dt} lies outside (0, 1) where the expansion is meaningful", stacklevel=3)


def _evaluate(spec, model, x, y, dt, moments):
    log_base = gaussian_logpdf(moments, y)
    terms = coefficient_terms(spec, model, x, moments, y, dt)
    pi = _pi_from_terms(terms, np.shape(log_base))
    log_proxy = log_base + log_taylor(pi, spec.taylor_order)
    raw = np.exp(log_base) * (1.0 + pi)
    return ExpansionResult(log_base, pi, log_proxy, raw)


def correction_pi(spec: CorrectionSpec, model: SdeModel, x, y, dt: float):
    """The correction sum ``pi^{[J]}`` at end point(s) ``y`` from ``x``."""
    _check_dt(dt)
    m = ldl_moments(model, x, dt)
    terms = coefficient_terms(spec, model, x, m, y, dt)
    return _pi_from_terms(terms, np.broadcast_shapes(np.shape(y)[:-1], np.shape(m.mean)[:-1]))


def density_proxy(spec: CorrectionSpec, model: SdeModel, x, y, dt: float, moments: LdlMoments | None = None) -> ExpansionResult:
    """Baseline, correction, raw expansion and positive proxy.

    ``x`` is one start state with ``y`` any stack of end points, or ``x`` and
    ``y`` are matching ``(K, N)`` batches of transitions.
    """
    _check_dt(dt)
    x = np.asarray(x, dtype=float)
    if moments is None:
        moments = ldl_moments(model, x, dt)
    return _evaluate(spec, model, x, np.asarray(y, dtype=float), dt, moments)


def transition_log_proxy(spec: CorrectionSpec, model: SdeModel, xs, ys, dt: float) -> np.ndarray:
    """``log p~`` for each transition ``xs[k] -> ys[k]``."""
    return density_proxy(spec, model, xs, ys, dt).log_proxy
