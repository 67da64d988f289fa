"""SDE model definitions.

A model carries its parameter vector and exposes the drift ``V0``, the
diffusion matrix ``sigma = [V1, ..., Vd]`` and the drift Jacobian used by the
local drift linearisation.  Every method accepts states with arbitrary
leading batch dimensions, i.e. arrays of shape ``(..., N)``.

Class H models order their coordinates smooth-first: rows ``0..n_smooth-1``
of the diffusion matrix are identically zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import ClassVar

import numpy as np


class ModelInputError(ValueError):
    """Raised for malformed states or parameter vectors."""


def _as_state(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != n:
        raise ModelInputError(f"expected state(s) with trailing dimension {n}, got shape {x.shape}")
    return x


class SdeModel:
    """Base class: dX = V0(X) dt + sigma(X) dB with X in R^N, B in R^d."""

    name: ClassVar[str] = "abstract"
    param_names: ClassVar[tuple[str, ...]] = ()
    n_total: int
    n_smooth: int
    n_noise: int
    additive_noise: ClassVar[bool] = True

    @property
    def n_rough(self) -> int:
        return self.n_total - self.n_smooth

    @property
    def hypoelliptic(self) -> bool:
        return self.n_smooth > 0

    @property
    def theta(self) -> np.ndarray:
        return np.array([getattr(self, p) for p in self.param_names], dtype=float)

    @property
    def positive(self) -> tuple[bool, ...]:
        """Which entries of ``theta`` are constrained to be positive."""
        return tuple(True for _ in self.param_names)

    def with_theta(self, theta) -> "SdeModel":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(self.param_names),):
            raise ModelInputError(
                f"{self.name}: expected {len(self.param_names)} parameters "
                f"{self.param_names}, got shape {theta.shape}"
            )
        return replace(self, **{p: float(v) for p, v in zip(self.param_names, theta)})

    def drift(self, x) -> np.ndarray:
        raise NotImplementedError

    def diffusion(self, x) -> np.ndarray:
        raise NotImplementedError

    def drift_jacobian(self, x) -> np.ndarray:
        """Exact analytic Jacobian of the drift."""
        raise NotImplementedError

    def linearisation_matrix(self, x) -> np.ndarray:
        """Matrix ``A_x`` frozen by the local drift linearisation."""
        return self.drift_jacobian(x)

    def linearisation(self, x):
        """Return ``(A_x, b_x)`` with ``b_x = V0(x) - A_x x``."""
        x = _as_state(x, self.n_total)
        A = self.linearisation_matrix(x)
        b = self.drift(x) - np.einsum("...ij,...j->...i", A, x)
        return A, b


@dataclass(frozen=True)
class FitzHughNagumo(SdeModel):
    """Stochastic FitzHugh-Nagumo neuron model (V smooth, U rough).

    dV = (V - V^3 - U - s)/epsilon dt,   dU = (gamma V - U + beta) dt + sigma dB.

    With ``partial=True`` the linearisation matrix drops the ``gamma`` coupling
    of the Jacobian (entry (2, 1) set to zero), giving an upper-triangular
    matrix; the drift itself is unchanged.
    """

    epsilon: float = 0.1
    gamma: float = 1.2
    beta: float = 0.3
    sigma: float = 0.8
    s: float = 0.0
    partial: bool = False
    n_total: int = field(default=2, init=False)
    n_smooth: int = field(default=1, init=False)
    n_noise: int = field(default=1, init=False)

    param_names: ClassVar[tuple[str, ...]] = ("epsilon", "gamma", "beta", "sigma")

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ModelInputError("FitzHugh-Nagumo requires epsilon > 0")
        if self.sigma < 0:
            raise ModelInputError("FitzHugh-Nagumo requires sigma >= 0")

    @property
    def name(self) -> str:  # type: ignore[override]
        return "fhn-partial" if self.partial else "fhn"

    def drift(self, x):
        x = _as_state(x, 2)
        v, u = x[..., 0], x[..., 1]
        return np.stack(
            [(v - v**3 - u - self.s) / self.epsilon, self.gamma * v - u + self.beta], axis=-1
        )

    def diffusion(self, x):
        x = _as_state(x, 2)
        out = np.zeros(x.shape[:-1] + (2, 1))
        out[..., 1, 0] = self.sigma
        return out

    def drift_jacobian(self, x):
        x = _as_state(x, 2)
        out = np.empty(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = (1.0 - 3.0 * x[..., 0] ** 2) / self.epsilon
        out[..., 0, 1] = -1.0 / self.epsilon
        out[..., 1, 0] = self.gamma
        out[..., 1, 1] = -1.0
        return out

    def linearisation_matrix(self, x):
        out = self.drift_jacobian(x)
        if self.partial:
            out[..., 1, 0] = 0.0
        return out


@dataclass(frozen=True)
class UnderdampedLangevin(SdeModel):
    """dQ = P dt, dP = (-k Q - alpha P) dt + sigma dB  (potential k q^2 / 2)."""

    alpha: float = 1.0
    sigma: float = 1.0
    stiffness: float = 1.0
    n_total: int = field(default=2, init=False)
    n_smooth: int = field(default=1, init=False)
    n_noise: int = field(default=1, init=False)

    name: ClassVar[str] = "langevin"
    param_names: ClassVar[tuple[str, ...]] = ("alpha", "sigma")

    def drift(self, x):
        x = _as_state(x, 2)
        q, p = x[..., 0], x[..., 1]
        return np.stack([p, -self.stiffness * q - self.alpha * p], axis=-1)

    def diffusion(self, x):
        x = _as_state(x, 2)
        out = np.zeros(x.shape[:-1] + (2, 1))
        out[..., 1, 0] = self.sigma
        return out

    def drift_jacobian(self, x):
        x = _as_state(x, 2)
        A = np.array([[0.0, 1.0], [-self.stiffness, -self.alpha]])
        return np.broadcast_to(A, x.shape[:-1] + (2, 2)).copy()


@dataclass(frozen=True, eq=False)
class LinearSde(SdeModel):
    """dX = (A X + b) dt + sigma dB with constant coefficients.

    ``theta`` is the row-major flattening of ``(A, b, sigma)``.  The smooth
    block is inferred from the leading zero rows of ``sigma``.
    """

    A: np.ndarray = None
    b: np.ndarray = None
    sigma: np.ndarray = None

    name: ClassVar[str] = "linear"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ModelInputError(f"A must be square, got {A.shape}")
        b = np.zeros(n) if self.b is None else np.asarray(self.b, dtype=float).reshape(n)
        sig = np.asarray(self.sigma, dtype=float)
        sig = sig.reshape(n, -1)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sigma", sig)

    @property
    def n_total(self) -> int:  # type: ignore[override]
        return self.A.shape[0]

    @property
    def n_noise(self) -> int:  # type: ignore[override]
        return self.sigma.shape[1]

    @property
    def n_smooth(self) -> int:  # type: ignore[override]
        zero_rows = ~np.any(self.sigma != 0.0, axis=1)
        k = 0
        while k < self.n_total and zero_rows[k]:
            k += 1
        return 0 if k == self.n_total else k

    @property
    def param_names(self) -> tuple[str, ...]:  # type: ignore[override]
        n, d = self.n_total, self.n_noise
        return (
            tuple(f"A{i}{j}" for i in range(n) for j in range(n))
            + tuple(f"b{i}" for i in range(n))
            + tuple(f"sigma{i}{j}" for i in range(n) for j in range(d))
        )

    @property
    def theta(self) -> np.ndarray:  # type: ignore[override]
        return np.concatenate([self.A.ravel(), self.b, self.sigma.ravel()])

    @property
    def positive(self) -> tuple[bool, ...]:  # type: ignore[override]
        return tuple(False for _ in self.param_names)

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        n, d = self.n_total, self.n_noise
        if theta.shape != (n * n + n + n * d,):
            raise ModelInputError(f"linear model expects {n * n + n + n * d} parameters")
        return LinearSde(theta[: n * n].reshape(n, n), theta[n * n : n * n + n], theta[n * n + n :].reshape(n, d))

    @classmethod
    def from_theta(cls, theta, dim: int, n_noise: int) -> "LinearSde":
        stub = cls(np.zeros((dim, dim)), np.zeros(dim), np.zeros((dim, n_noise)))
        return stub.with_theta(theta)

    def drift(self, x):
        x = _as_state(x, self.n_total)
        return x @ self.A.T + self.b

    def diffusion(self, x):
        x = _as_state(x, self.n_total)
        return np.broadcast_to(self.sigma, x.shape[:-1] + self.sigma.shape).copy()

    def drift_jacobian(self, x):
        x = _as_state(x, self.n_total)
        return np.broadcast_to(self.A, x.shape[:-1] + self.A.shape).copy()


@dataclass(frozen=True)
class OrnsteinUhlenbeck(SdeModel):
    """Scalar mean-reverting process dX = kappa (mu - X) dt + sigma dB."""

    kappa: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    n_total: int = field(default=1, init=False)
    n_smooth: int = field(default=0, init=False)
    n_noise: int = field(default=1, init=False)

    name: ClassVar[str] = "ou"
    param_names: ClassVar[tuple[str, ...]] = ("kappa", "mu", "sigma")

    @property
    def positive(self):
        return (True, False, True)

    def as_linear(self) -> LinearSde:
        return LinearSde([[-self.kappa]], [self.kappa * self.mu], [[self.sigma]])

    def drift(self, x):
        x = _as_state(x, 1)
        return self.kappa * (self.mu - x)

    def diffusion(self, x):
        x = _as_state(x, 1)
        return np.full(x.shape[:-1] + (1, 1), self.sigma)

    def drift_jacobian(self, x):
        x = _as_state(x, 1)
        return np.full(x.shape[:-1] + (1, 1), -self.kappa)


MODEL_NAMES = ("fhn", "fhn-partial", "langevin", "linear", "ou")


def make_model(name: str, theta, *, s: float = 0.0, dim: int | None = None, n_noise: int | None = None) -> SdeModel:
    """Build a built-in model from its name and parameter vector."""
    theta = np.asarray(theta, dtype=float)
    if name in ("fhn", "fhn-partial"):
        return FitzHughNagumo(s=s, partial=name == "fhn-partial").with_theta(theta)
    if name == "langevin":
        return UnderdampedLangevin().with_theta(theta)
    if name == "ou":
        return OrnsteinUhlenbeck().with_theta(theta)
    if name == "linear":
        if dim is None or n_noise is None:
            raise ModelInputError("linear model needs 'dim' and 'n_noise'")
        return LinearSde.from_theta(theta, dim, n_noise)
    raise ModelInputError(f"unknown model {name!r}; choose from {MODEL_NAMES}")


@dataclass(frozen=True)
class HormanderReport:
    rank_rough: int
    rank_full: int
    satisfied: bool
    vector_fields: np.ndarray  # columns: V_1..V_d, then [V0~, V_j] for class H


def _numerical_rank(mat: np.ndarray, tol: float) -> int:
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def stratonovich_drift(model: SdeModel, x, h: float = 1e-6) -> np.ndarray:
    """V0~ = V0 - 1/2 sum_j (dV_j) V_j; equal to V0 for additive noise."""
    x = _as_state(x, model.n_total)
    v0 = model.drift(x)
    if model.additive_noise:
        return v0
    sig = model.diffusion(x)
    corr = np.zeros_like(v0)
    for i in range(model.n_total):
        e = np.zeros(model.n_total)
        e[i] = h
        dsig = (model.diffusion(x + e) - model.diffusion(x - e)) / (2 * h)
        corr += np.einsum("j,kj->k", sig[i], dsig)
    return v0 - 0.5 * corr


def check_hormander(model: SdeModel, x, tol: float = 1e-10) -> HormanderReport:
    """Numerical rank diagnostic for the (weak) Hormander span conditions.

    The bracket follows the vector-field convention
    ``[V0~, V_j] = (dV_j) V0~ - (dV0~) V_j``; for additive noise the first
    term vanishes.  ``tol`` is relative to the largest singular value.
    """
    x = _as_state(x, model.n_total)
    sig = model.diffusion(x)
    if not model.hypoelliptic:
        r = _numerical_rank(sig, tol)
        return HormanderReport(r, r, r == model.n_total, sig.copy())

    v0t = stratonovich_drift(model, x)
    if model.additive_noise:
        brackets = -model.drift_jacobian(x) @ sig
    else:
        h = 1e-6
        cols = []
        for j in range(model.n_noise):
            dv0 = np.empty((model.n_total, model.n_total))
            dvj = np.empty((model.n_total, model.n_total))
            for i in range(model.n_total):
                e = np.zeros(model.n_total)
                e[i] = h
                dv0[:, i] = (stratonovich_drift(model, x + e) - stratonovich_drift(model, x - e)) / (2 * h)
                dvj[:, i] = (model.diffusion(x + e)[:, j] - model.diffusion(x - e)[:, j]) / (2 * h)
            cols.append(dvj @ v0t - dv0 @ sig[:, j])
        brackets = np.stack(cols, axis=1)

    rank_rough = _numerical_rank(sig[model.n_smooth :], tol)
    fields = np.concatenate([sig, brackets], axis=1)
    rank_full = _numerical_rank(fields, tol)
    return HormanderReport(
        rank_rough, rank_full, rank_rough == model.n_rough and rank_full == model.n_total, fields
    )
