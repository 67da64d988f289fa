"""Experiment configuration: one JSON file per run, validated strictly.

Every section is a frozen dataclass.  Unknown keys anywhere raise
:class:`ConfigError`, so a typo never silently falls back to a default.
:func:`resolved_dict` gives the fully populated configuration, which loads
back to an identical :class:`ExperimentConfig`.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .benchmark import GridSpec, SimConfig
from .expansion import CorrectionSpec, Variant, check_pairing, default_variant
from .inference import Priors, SamplerConfig, default_priors
from .models import MODEL_NAMES, ModelInputError, SdeModel, make_model


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ModelConfig:
    name: str = "fhn"
    theta: tuple = (0.1, 1.2, 0.3, 0.8)
    s: float = 0.0
    dim: int | None = None
    n_noise: int | None = None

    def build(self) -> SdeModel:
        return make_model(self.name, self.theta, s=self.s, dim=self.dim, n_noise=self.n_noise)


@dataclass(frozen=True)
class DataConfig:
    """Observations for ``mle`` and ``mcmc``: read from ``path`` or simulated.

    ``noise_sd`` set selects noisy first-coordinate observations.
    """

    path: str | None = None
    n: int = 500
    substeps: int = 100
    noise_sd: float | None = None


@dataclass(frozen=True)
class InferenceConfig:
    init: tuple | None = None
    budget: int = 2000
    priors: dict | None = None
    n_iters: int = 4000
    n_warmup: int = 2000
    n_chains: int = 2
    window: int = 10
    augmentation: int = 1
    theta_moves: int = 1
    path_moves: int = 6


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    variant: str | None = None
    order_j: int = 5
    taylor_order: int = 2
    orders: tuple = (2, 3, 4, 5)
    dt: float = 0.1
    x0: tuple = (-0.1, 0.2)
    grid: GridSpec = field(default_factory=GridSpec)
    simulation: SimConfig = field(default_factory=SimConfig)
    data: DataConfig = field(default_factory=DataConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    benchmark_path: str | None = None
    doubling_test: bool = False
    seed: int = 0
    output_dir: str = "out"

    # ---------------------------------------------------------------- builders

    def build_model(self) -> SdeModel:
        return self.model.build()

    def correction(self, order_j: int | None = None) -> CorrectionSpec:
        model = self.build_model()
        variant = Variant(self.variant) if self.variant is not None else default_variant(model)
        return CorrectionSpec(self.order_j if order_j is None else order_j, self.taylor_order, variant)

    def sim_config(self) -> SimConfig:
        """Simulation settings with the experiment seed."""
        return dataclasses.replace(self.simulation, seed=self.seed)

    def sampler_config(self) -> SamplerConfig:
        inf = self.inference
        return SamplerConfig(
            n_iters=inf.n_iters, n_warmup=inf.n_warmup, n_chains=inf.n_chains, window=inf.window,
            augmentation=inf.augmentation, seed=self.seed, init_theta=inf.init,
            theta_moves=inf.theta_moves, path_moves=inf.path_moves,
        )

    def priors(self) -> Priors:
        if self.inference.priors is None:
            return default_priors(self.build_model())
        return Priors.from_dict(self.inference.priors)


_NESTED = {
    "model": ModelConfig,
    "grid": GridSpec,
    "simulation": SimConfig,
    "data": DataConfig,
    "inference": InferenceConfig,
}
_TUPLES = {"theta", "orders", "x0", "x_range", "y_range", "init"}
_PRIOR_KEYS = ("param_mean", "param_sd", "init_mean", "init_sd")


def _freeze(key, value):
    if key in _TUPLES and value is not None:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key!r} must be a list")
        return tuple(float(v) if key != "orders" else v for v in value)
    return value


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if cls is ExperimentConfig and key in _NESTED:
            kwargs[key] = _build(_NESTED[key], value, key)
        else:
            kwargs[key] = _freeze(key, value)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def _check_int(name, value, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{name} must be >= {lo}, got {value}")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Cross-field checks; raises :class:`ConfigError`."""
    if cfg.model.name not in MODEL_NAMES:
        raise ConfigError(f"unknown model {cfg.model.name!r}; choose from {MODEL_NAMES}")
    try:
        model = cfg.build_model()
    except ModelInputError as exc:
        raise ConfigError(str(exc)) from exc
    _check_int("seed", cfg.seed, 0)
    if not isinstance(cfg.doubling_test, bool):
        raise ConfigError("doubling_test must be true or false")
    if cfg.seed >= 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    for name in ("order_j", "taylor_order"):
        _check_int(name, getattr(cfg, name))
    if not cfg.orders:
        raise ConfigError("orders must not be empty")
    for j in cfg.orders:
        _check_int("orders entry", j)
    try:
        for j in {cfg.order_j, *cfg.orders}:
            check_pairing(cfg.correction(j), model)
        if cfg.variant is not None:
            Variant(cfg.variant)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not (isinstance(cfg.dt, (int, float)) and cfg.dt > 0):
        raise ConfigError(f"dt must be a positive number, got {cfg.dt!r}")
    if len(cfg.x0) != model.n_total:
        raise ConfigError(f"x0 needs {model.n_total} entries for model {model.name}")
    for name in ("n_x", "n_y"):
        _check_int(f"grid.{name}", getattr(cfg.grid, name), 2)
    for rng in (cfg.grid.x_range, cfg.grid.y_range):
        if rng is not None and (len(rng) != 2 or not rng[0] < rng[1]):
            raise ConfigError("grid ranges must be [low, high] with low < high")
    _check_int("simulation.n_paths", cfg.simulation.n_paths, 1)
    _check_int("simulation.substeps", cfg.simulation.substeps, 1)
    _check_int("data.n", cfg.data.n, 2)
    _check_int("data.substeps", cfg.data.substeps, 1)
    if cfg.data.noise_sd is not None and not cfg.data.noise_sd > 0:
        raise ConfigError("data.noise_sd must be positive when given")
    inf = cfg.inference
    if inf.init is not None and len(inf.init) != len(model.param_names):
        raise ConfigError(f"inference.init needs {len(model.param_names)} entries {model.param_names}")
    if inf.priors is not None:
        missing = [k for k in _PRIOR_KEYS if k not in inf.priors]
        extra = sorted(set(inf.priors) - set(_PRIOR_KEYS))
        if missing or extra:
            raise ConfigError(f"inference.priors needs exactly the keys {_PRIOR_KEYS}")
    try:
        cfg.sampler_config()
    except ValueError as exc:
        raise ConfigError(f"inference: {exc}") from exc
    return cfg


def from_dict(data: dict) -> ExperimentConfig:
    """Parse a config mapping; the model section must name the model and its parameters."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    model = data.get("model")
    if not isinstance(model, dict) or "name" not in model or "theta" not in model:
        raise ConfigError("config needs a 'model' section with 'name' and 'theta'")
    if isinstance(data.get("simulation"), dict) and "seed" in data["simulation"]:
        raise ConfigError("simulation.seed is not configurable; use the top-level 'seed'")
    return validate(_build(ExperimentConfig, data, ""))


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return from_dict(data)


def _plain(value):
    if isinstance(value, SimConfig):
        # the simulation seed always comes from the top-level seed
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value) if f.name != "seed"}
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value) if f.init}
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, np.generic):
        return value.item()
    return value


def resolved_dict(cfg: ExperimentConfig) -> dict:
    """All fields with defaults filled in; ``from_dict`` of this is ``cfg``."""
    return _plain(cfg)


def dumps(cfg: ExperimentConfig) -> str:
    return json.dumps(resolved_dict(cfg), indent=2, sort_keys=True) + "\n"
