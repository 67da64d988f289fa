"""Likelihood-based inference with the closed-form transition proxy.

Fully observed chains are fitted by Nelder-Mead on log-parameters.  For a
noisily observed first coordinate the hidden path is sampled jointly with the
parameters.  The posterior is written in non-centred form, with the hidden
states generated from standard normal latents through the LDL baseline,

    X_0 = m0 + s0 * eta_0,        X_k = mean(X_{k-1}) + L(X_{k-1}) eta_k,

so that the baseline density and the Jacobian of the map cancel and the
correction ``exp(T(pi))`` enters as a likelihood weight.

The sampler is Metropolis-within-Gibbs:

* a random-walk move on the (log) parameters with the latents held fixed,
* a random-walk move on the parameters with the states held fixed,
* Metropolis-Hastings moves on overlapping windows of states, proposing from
  the Gaussian obtained by linearising the window's transitions.

Each move leaves the same joint posterior invariant; proposal scales adapt
(Robbins-Monro towards 0.234) during warm-up only.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _kernels as K
from .benchmark import simulate_path
from .diagnostics import summarize
from .expansion import CorrectionSpec, check_pairing, transition_log_proxy
from .ldl import DegenerateMomentsError
from .models import FitzHughNagumo, LinearSde, ModelInputError, OrnsteinUhlenbeck, SdeModel, UnderdampedLangevin

TARGET_ACCEPT = 0.234


class ObservationMode(str, enum.Enum):
    FULL = "full-state"
    NOISY = "noisy-first-coordinate"


class FitError(RuntimeError):
    pass


class StartupError(RuntimeError):
    pass


@dataclass(frozen=True)
class ObservationSet:
    """Equidistant observations; ``values`` is ``(n+1, N)`` or ``(n+1,)`` when noisy."""

    times: np.ndarray
    values: np.ndarray
    mode: ObservationMode = ObservationMode.FULL
    noise_sd: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", ObservationMode(self.mode))
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        if self.mode is ObservationMode.NOISY:
            v = v.reshape(-1) if v.ndim == 2 and v.shape[1] == 1 else v
            if v.ndim != 1:
                raise ValueError("noisy observations must be one value per time")
            if not (self.noise_sd is not None and self.noise_sd > 0):
                raise ValueError("noisy observations need a positive noise_sd")
        elif v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "values", v)
        if len(t) != len(v):
            raise ValueError("times and values differ in length")
        if len(t) < 3:
            raise ValueError("need at least two transitions (n >= 2)")
        steps = np.diff(t)
        if not np.all(steps > 0) or np.max(np.abs(steps - steps[0])) > 1e-9 * abs(steps[0]) + 1e-12:
            raise ValueError("observation times must be increasing with constant spacing")

    @property
    def dt(self) -> float:
        return float((self.times[-1] - self.times[0]) / (len(self.times) - 1))

    @property
    def n(self) -> int:
        return len(self.times) - 1

    def to_csv(self) -> str:
        cols = self.values[:, None] if self.values.ndim == 1 else self.values
        header = "t," + ",".join(f"y{i + 1}" for i in range(cols.shape[1]))
        buf = io.StringIO()
        buf.write(header + "\n")
        for t, row in zip(self.times, cols):
            buf.write(",".join(repr(float(a)) for a in (t, *row)) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path, mode=ObservationMode.FULL, noise_sd=None) -> "ObservationSet":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        values = data[:, 1:]
        if ObservationMode(mode) is ObservationMode.NOISY:
            values = values[:, 0]
        return cls(data[:, 0], values, mode, noise_sd)


# ------------------------------------------------------------------ likelihood


def simulate_observations(model: SdeModel, x0, dt: float, n: int, substeps: int, seed: int,
                          noise_sd: float | None = None) -> tuple[ObservationSet, np.ndarray]:
    """Simulate ``n`` steps of the SDE; returns observations and the hidden path.

    With ``noise_sd`` the first coordinate is observed with Gaussian noise from
    a stream separate from the path's.
    """
    path = simulate_path(model, x0, dt, n, substeps, seed)
    times = np.arange(n + 1) * dt
    if noise_sd is None:
        return ObservationSet(times, path, ObservationMode.FULL), path
    noise = np.random.default_rng([seed, 1]).standard_normal(n + 1)
    return ObservationSet(times, path[:, 0] + noise_sd * noise, ObservationMode.NOISY, noise_sd), path


def log_likelihood(spec: CorrectionSpec, model: SdeModel, obs: ObservationSet) -> float:
    """Sum of ``log p~`` over consecutive fully observed states."""
    if obs.mode is not ObservationMode.FULL:
        raise ValueError("log_likelihood needs full-state observations")
    X = obs.values
    return float(np.sum(transition_log_proxy(spec, model, X[:-1], X[1:], obs.dt)))


def to_unconstrained(model: SdeModel, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    pos = np.array(model.positive)
    if np.any(theta[pos] <= 0):
        bad = [n for n, p, t in zip(model.param_names, pos, theta) if p and t <= 0]
        raise ModelInputError(f"parameters {bad} must be positive")
    return np.where(pos, np.log(np.where(pos, theta, 1.0)), theta)


def to_natural(model: SdeModel, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return np.where(np.array(model.positive), np.exp(phi), phi)


@dataclass(frozen=True)
class MleResult:
    theta_hat: np.ndarray
    loglik: float
    evals: int
    converged: bool


def mle_fit(spec: CorrectionSpec, model: SdeModel, obs: ObservationSet, init, budget: int = 2000,
            xatol: float = 1e-6, initial_step: float = 0.1) -> MleResult:
    """Nelder-Mead on log-parameters; converged when the simplex diameter < ``xatol``."""
    check_pairing(spec, model)
    phi0 = to_unconstrained(model, init)
    n_bad = 0

    def objective(phi):
        nonlocal n_bad
        try:
            with np.errstate(all="ignore"):
                val = log_likelihood(spec, model.with_theta(to_natural(model, phi)), obs)
        except (DegenerateMomentsError, ModelInputError, np.linalg.LinAlgError):
            n_bad += 1
            return np.inf
        return -val if np.isfinite(val) else np.inf

    d = len(phi0)
    simplex = np.vstack([phi0] + [phi0 + initial_step * np.eye(d)[i] for i in range(d)])
    if all(not np.isfinite(objective(v)) for v in simplex):
        raise FitError("the log-likelihood is degenerate at every vertex of the initial simplex")
    res = optimize.minimize(
        objective, phi0, method="Nelder-Mead",
        options={"initial_simplex": simplex, "maxfev": budget, "xatol": xatol, "fatol": np.inf},
    )
    theta = to_natural(model, res.x)
    return MleResult(theta, float(-res.fun), int(res.nfev), bool(res.status == 0))


# ------------------------------------------------------------------- posterior


@dataclass(frozen=True)
class Priors:
    """Normal priors on the unconstrained parameters and on the initial state."""

    param_mean: np.ndarray
    param_sd: np.ndarray
    init_mean: np.ndarray
    init_sd: np.ndarray

    def log_density(self, phi) -> float:
        z = (np.asarray(phi) - self.param_mean) / self.param_sd
        return float(-0.5 * np.sum(z * z) - np.sum(np.log(self.param_sd)) - 0.5 * len(z) * math.log(2 * math.pi))

    def to_dict(self) -> dict:
        return {k: [float(a) for a in getattr(self, k)] for k in ("param_mean", "param_sd", "init_mean", "init_sd")}

    @classmethod
    def from_dict(cls, d) -> "Priors":
        return cls(*(np.asarray(d[k], dtype=float) for k in ("param_mean", "param_sd", "init_mean", "init_sd")))


def default_priors(model: SdeModel) -> Priors:
    """Standard normal on log-parameters; for FitzHugh-Nagumo V0 ~ N(0, 0.1^2), U0 ~ N(0, 0.2^2)."""
    d = len(model.param_names)
    if isinstance(model, FitzHughNagumo):
        init_mean, init_sd = np.zeros(2), np.array([0.1, 0.2])
    else:
        init_mean, init_sd = np.zeros(model.n_total), np.ones(model.n_total)
    return Priors(np.zeros(d), np.ones(d), init_mean, init_sd)


def _encode(model: SdeModel):
    """Model -> ``(kind, p, A, b, S)`` for the compiled kernels."""
    if isinstance(model, FitzHughNagumo):
        kind = K.KIND_FHN_PARTIAL if model.partial else K.KIND_FHN
        p = np.array([model.epsilon, model.gamma, model.beta, model.sigma, model.s])
        z = np.zeros((1, 1))
        return kind, p, z, np.zeros(1), z
    if isinstance(model, OrnsteinUhlenbeck):
        model = model.as_linear()
    if isinstance(model, UnderdampedLangevin):
        zero = np.zeros(2)
        A, b, S = model.drift_jacobian(zero), model.drift(zero), model.diffusion(zero)
    elif isinstance(model, LinearSde):
        A, b, S = model.A, model.b, model.sigma
    else:
        raise TypeError(f"no compiled kernel for model {model.name}")
    return K.KIND_LINEAR, np.zeros(1), *(np.ascontiguousarray(a, dtype=float) for a in (A, b, S))


@dataclass
class ChainState:
    log_theta: np.ndarray  # unconstrained parameters (log for positive entries)
    latents: np.ndarray  # (K + 1, N) standard-normal innovations
    log_post: float
    step_scales: np.ndarray = field(default_factory=lambda: np.ones(2))


@dataclass(frozen=True)
class Posterior:
    """Augmented posterior for noisy first-coordinate observations.

    ``augmentation`` inserts ``augmentation - 1`` unobserved states between
    consecutive observations, each transition then spanning ``dt / augmentation``.
    """

    spec: CorrectionSpec
    model: SdeModel
    obs: ObservationSet
    priors: Priors
    augmentation: int = 1

    def __post_init__(self):
        check_pairing(self.spec, self.model)
        if self.obs.mode is not ObservationMode.NOISY:
            raise ValueError("the augmented posterior needs noisy first-coordinate observations")
        if self.augmentation < 1:
            raise ValueError("augmentation must be >= 1")

    @property
    def step(self) -> float:
        return self.obs.dt / self.augmentation

    @property
    def n_states(self) -> int:
        return self.obs.n * self.augmentation + 1

    def _args(self, phi):
        return _encode(self.model.with_theta(to_natural(self.model, phi)))

    def _obs_args(self):
        return (np.ascontiguousarray(self.obs.values), self.augmentation, float(self.obs.noise_sd),
                self.priors.init_mean, self.priors.init_sd)

    def path(self, phi, eta):
        X, ok = K.path_from_latents(*self._args(phi), eta, self.step, self.priors.init_mean, self.priors.init_sd)
        return X, ok

    def latents(self, phi, X):
        eta, ok = K.latents_from_path(*self._args(phi), X, self.step, self.priors.init_mean, self.priors.init_sd)
        return eta, ok

    def log_post_noncentred(self, phi, eta):
        """Returns ``(log posterior, path)``; ``-inf`` for invalid states."""
        try:
            args = self._args(phi)
        except ModelInputError:
            return -np.inf, None
        with np.errstate(all="ignore"):
            lp, X = K.log_target_noncentred(*args, eta, self.step, self.spec.order_j, self.spec.taylor_order,
                                            *self._obs_args())
        lp += self.priors.log_density(phi)
        return (lp if np.isfinite(lp) else -np.inf), X

    def log_post_centred(self, phi, X) -> float:
        try:
            args = self._args(phi)
        except ModelInputError:
            return -np.inf
        with np.errstate(all="ignore"):
            lp = K.log_target_centred(*args, X, self.step, self.spec.order_j, self.spec.taylor_order,
                                      *self._obs_args())
        lp += self.priors.log_density(phi)
        return lp if np.isfinite(lp) else -np.inf

    def path_gaussian(self, phi, passes: int = 1):
        """Gaussian approximation of the hidden path given the data at ``phi``.

        Linearised around the data-driven path and refined by Gauss-Newton
        passes; a deterministic function of ``phi``.  Returns
        ``(mean, Ld, Ls)`` or ``None`` when a factorisation fails.
        """
        try:
            args = self._args(phi)
        except ModelInputError:
            return None
        X = initial_path(self, phi)
        with np.errstate(all="ignore"):
            for _ in range(passes):
                mu, Ld, Ls, ok = K.path_gaussian(*args, X, self.step, *self._obs_args())
                if not ok or not np.all(np.isfinite(mu)):
                    return None
                X = mu
        return mu, Ld, Ls

    def sweep(self, phi, X, rng, width):
        """Window moves over the whole path; returns the number accepted and proposed."""
        n_dim = X.shape[1]
        last = X.shape[0] - 1
        stride = max(1, width // 2)
        offset = int(rng.integers(0, stride))
        starts = np.arange(-offset, last + 1, stride)
        starts = np.unique(np.clip(starts, 0, last)).astype(np.int64)
        normals = rng.standard_normal((len(starts), width * n_dim))
        log_u = np.log(rng.random(len(starts)))
        with np.errstate(all="ignore"):
            acc = K.latent_sweep(*self._args(phi), X, starts, width, normals, log_u, self.step,
                                 self.spec.order_j, self.spec.taylor_order, *self._obs_args())
        return acc, len(starts)


def log_posterior(spec: CorrectionSpec, model: SdeModel, obs: ObservationSet, state: ChainState,
                  priors: Priors | None = None, augmentation: int = 1) -> float:
    """Non-centred log-posterior of ``state``; ``-inf`` if anything is non-finite."""
    post = Posterior(spec, model, obs, priors or default_priors(model), augmentation)
    return post.log_post_noncentred(np.asarray(state.log_theta, dtype=float), np.asarray(state.latents, dtype=float))[0]


# --------------------------------------------------------------------- sampler


@dataclass(frozen=True)
class SamplerConfig:
    n_iters: int = 4000
    n_warmup: int = 2000
    n_chains: int = 2
    window: int = 10
    augmentation: int = 1
    seed: int = 0
    init_theta: tuple | None = None
    theta_moves: int = 1
    path_moves: int = 3

    def __post_init__(self):
        if not 0 <= self.n_warmup < self.n_iters:
            raise ValueError("need 0 <= n_warmup < n_iters")
        if self.n_chains < 1 or self.window < 1:
            raise ValueError("n_chains and window must be positive")


@dataclass
class ChainRecord:
    theta: np.ndarray  # (n_kept, d) natural scale
    log_post: np.ndarray
    accept_theta_nc: float
    accept_theta_c: float
    accept_theta_path: float
    accept_latent: float
    warmup_scales: np.ndarray
    final_state: ChainState
    states_mean: np.ndarray


@dataclass
class McmcResult:
    param_names: tuple
    chains: list
    diagnostics: dict

    @property
    def draws(self) -> np.ndarray:
        """``(n_chains, n_kept, d)`` natural-scale parameter draws."""
        return np.stack([c.theta for c in self.chains])

    @property
    def converged(self) -> bool:
        return all(v["r_hat"] < 1.01 for v in self.diagnostics.values())

    def chains_csv(self) -> str:
        buf = io.StringIO()
        buf.write("chain,iteration," + ",".join(self.param_names) + "\n")
        for c, rec in enumerate(self.chains):
            for i, row in enumerate(rec.theta):
                buf.write(f"{c},{i}," + ",".join(repr(float(a)) for a in row) + "\n")
        return buf.getvalue()

    def diagnostics_dict(self) -> dict:
        return {
            "parameters": self.diagnostics,
            "converged": self.converged,
            "warning": None if self.converged else "r_hat >= 1.01 for at least one parameter",
            "acceptance": [
                {"theta_noncentred": c.accept_theta_nc, "theta_tied": c.accept_theta_c,
                 "theta_path": c.accept_theta_path, "latent": c.accept_latent}
                for c in self.chains
            ],
        }


def initial_path(post: Posterior, phi) -> np.ndarray:
    """Hidden path guessed from the data.

    The observed coordinate is interpolated onto the state grid.  For
    FitzHugh-Nagumo the rough coordinate is recovered by inverting the smooth
    equation, ``U = V - V^3 - s - eps dV/dt``; other models leave it at zero.
    """
    m = post.model.with_theta(to_natural(post.model, phi))
    t_obs = np.arange(post.obs.n + 1, dtype=float)
    t_fine = np.arange(post.n_states, dtype=float) / post.augmentation
    X = np.zeros((post.n_states, m.n_total))
    X[:, 0] = np.interp(t_fine, t_obs, post.obs.values)
    if isinstance(m, FitzHughNagumo):
        v = X[:, 0]
        dv = np.gradient(v, post.step)
        X[:, 1] = v - v**3 - m.s - m.epsilon * dv
    return X


def _conditional_mode(post: Posterior, phi, X, budget):
    """Maximise the state-conditional posterior over the parameters."""
    res = optimize.minimize(
        lambda q: -post.log_post_centred(q, X), phi, method="Nelder-Mead",
        options={"maxfev": budget, "xatol": 1e-4, "fatol": 1e-6},
    )
    return res.x if np.isfinite(res.fun) else phi


def _profile_start(post: Posterior, starts, budget: int):
    """Best parameters when the path is rebuilt from the data at each trial point."""
    best_phi, best = None, np.inf
    for q0 in starts:
        res = optimize.minimize(
            lambda q: -post.log_post_centred(q, initial_path(post, q)), q0, method="Nelder-Mead",
            options={"maxfev": budget, "xatol": 1e-4, "fatol": 1e-6},
        )
        if res.fun < best:
            best_phi, best = res.x, res.fun
    return best_phi


# multiplicative offsets tried on the first (time-scale) parameter
_START_SCALES = (1.0, 0.3, 0.1, 0.03)


def _initial_state(post: Posterior, rng, init_theta, rounds: int = 3, width: int = 10):
    d = len(post.model.param_names)
    if init_theta is None:
        starts = []
        for c in _START_SCALES:
            q = post.priors.param_mean.copy()
            q[0] += math.log(c)
            starts.append(q)
    else:
        starts = [to_unconstrained(post.model, init_theta)]
    phi = _profile_start(post, starts, budget=400 * d)
    if phi is not None:
        phi = phi + 0.1 * post.priors.param_sd * rng.standard_normal(d)
        X = initial_path(post, phi)
    if phi is None or not np.isfinite(post.log_post_centred(phi, X)):
        for _ in range(100):
            phi = post.priors.param_mean + post.priors.param_sd * rng.standard_normal(d)
            eta = rng.standard_normal((post.n_states, post.model.n_total))
            lp, X = post.log_post_noncentred(phi, eta)
            if np.isfinite(lp):
                break
        else:
            raise StartupError("could not find a finite initial posterior value in 100 draws")
    for _ in range(rounds):
        for _ in range(5):
            post.sweep(phi, X, rng, width)
        phi = _conditional_mode(post, phi, X, budget=200 * d)
    return phi, X


def _tied_path(post: Posterior, phi, prop, X):
    """Path that follows a parameter move, with the log-Jacobian of the map.

    For FitzHugh-Nagumo the rough coordinate is shifted so that
    ``U + eps dV/dt`` stays fixed along the current smooth path.  The shift
    depends on ``V`` only, which the move leaves unchanged, so the map is a
    translation with unit Jacobian.  Other models keep the path as is.
    """
    if not isinstance(post.model, FitzHughNagumo):
        return X, 0.0
    d_eps = math.exp(prop[0]) - math.exp(phi[0])
    dv = np.diff(X[:, 0]) / post.step
    dv = np.append(dv, dv[-1])
    X_new = X.copy()
    X_new[:, 1] -= d_eps * dv
    return X_new, 0.0


def _run_chain(post: Posterior, cfg: SamplerConfig, rng: np.random.Generator) -> ChainRecord:
    d = len(post.model.param_names)
    phi, X = _initial_state(post, rng, cfg.init_theta, width=cfg.window)
    cov = np.diag(post.priors.param_sd**2) * 0.01
    log_scale = np.zeros(3)  # non-centred, tied and path-standardised theta moves
    chol = np.linalg.cholesky(cov)
    base = 2.38 / math.sqrt(d)
    kept_theta, kept_lp = [], []
    acc = np.zeros(4)
    tries = np.zeros(4)
    warm_hist = []
    states_sum = np.zeros_like(X)
    for it in range(cfg.n_iters):
        warm = it < cfg.n_warmup
        # theta move with latents fixed
        eta, ok = post.latents(phi, X)
        lp_cur, _ = post.log_post_noncentred(phi, eta) if ok else (-np.inf, None)
        prop = phi + math.exp(log_scale[0]) * base * chol @ rng.standard_normal(d)
        lp_new, X_new = post.log_post_noncentred(prop, eta)
        a0 = 0.0
        if np.isfinite(lp_new):
            a0 = min(1.0, math.exp(min(0.0, lp_new - lp_cur))) if np.isfinite(lp_cur) else 1.0
        if math.log(rng.random()) < lp_new - lp_cur:
            phi, X = prop, X_new
        # theta moves with the path tied to the data: X shifts by the change of
        # the data-driven path, a translation with unit Jacobian
        a1 = 0.0
        lp_cur = post.log_post_centred(phi, X)
        for _ in range(cfg.theta_moves):
            prop = phi + math.exp(log_scale[1]) * base * chol @ rng.standard_normal(d)
            X_new, log_jac = _tied_path(post, phi, prop, X)
            lp_new = post.log_post_centred(prop, X_new) + log_jac
            if np.isfinite(lp_new):
                a1 += (min(1.0, math.exp(min(0.0, lp_new - lp_cur))) if np.isfinite(lp_cur) else 1.0) / cfg.theta_moves
            if math.log(rng.random()) < lp_new - lp_cur:
                phi, X, lp_cur = prop, X_new, lp_new - log_jac
        # theta moves with the path held in the standardised coordinates of its
        # data-conditioned Gaussian approximation
        a2 = 0.0
        cur = post.path_gaussian(phi)
        if cur is not None and cfg.path_moves:
            zeta = K.standard_from_path(cur[1], cur[2], cur[0], X)
            lp_cur = post.log_post_centred(phi, X)
            for _ in range(cfg.path_moves):
                prop = phi + math.exp(log_scale[2]) * base * chol @ rng.standard_normal(d)
                new_g = post.path_gaussian(prop)
                lp_new, log_jac = -np.inf, 0.0
                if new_g is not None:
                    X_new = K.path_from_standard(new_g[1], new_g[2], new_g[0], zeta)
                    log_jac = K.block_log_det(cur[1]) - K.block_log_det(new_g[1])
                    lp_new = post.log_post_centred(prop, X_new) + log_jac
                if np.isfinite(lp_new):
                    a2 += (min(1.0, math.exp(min(0.0, lp_new - lp_cur))) if np.isfinite(lp_cur) else 1.0) / cfg.path_moves
                if math.log(rng.random()) < lp_new - lp_cur:
                    phi, X, cur, lp_cur = prop, X_new, new_g, lp_new - log_jac
        # state windows
        n_acc, n_prop = post.sweep(phi, X, rng, cfg.window)
        if warm:
            gain = (it + 1) ** -0.6
            log_scale[0] += gain * (a0 - TARGET_ACCEPT)
            log_scale[1] += gain * (a1 - TARGET_ACCEPT)
            log_scale[2] += gain * (a2 - TARGET_ACCEPT)
            if it >= cfg.n_warmup // 4:
                warm_hist.append(phi.copy())
            if len(warm_hist) >= 50 and (it + 1) % 50 == 0:
                emp = np.cov(np.array(warm_hist).T).reshape(d, d) + 1e-8 * np.eye(d)
                chol = np.linalg.cholesky(emp)
        else:
            acc += (a0, a1, a2, n_acc / max(n_prop, 1))
            tries += 1
            kept_theta.append(to_natural(post.model, phi))
            kept_lp.append(post.log_post_centred(phi, X))
            states_sum += X
    n_kept = max(len(kept_theta), 1)
    eta, _ = post.latents(phi, X)
    final = ChainState(phi.copy(), eta, post.log_post_noncentred(phi, eta)[0], log_scale.copy())
    return ChainRecord(
        np.array(kept_theta), np.array(kept_lp), *(acc / np.maximum(tries, 1)),
        warmup_scales=np.exp(log_scale), final_state=final, states_mean=states_sum / n_kept,
    )


def rwm_sample(spec: CorrectionSpec, model: SdeModel, obs: ObservationSet, priors: Priors | None = None,
               cfg: SamplerConfig = SamplerConfig()) -> McmcResult:
    """Run ``cfg.n_chains`` independent chains and compute diagnostics."""
    post = Posterior(spec, model, obs, priors or default_priors(model), cfg.augmentation)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    chains = [_run_chain(post, cfg, np.random.default_rng(s)) for s in seeds]
    names = tuple(model.param_names)
    diag = summarize(np.stack([c.theta for c in chains]), names)
    return McmcResult(names, chains, diag)
