"""Reproducible studies behind the acceptance checks and the scripts.

* :func:`density_study` compares the proxy for several orders against a
  simulation benchmark at several step sizes.
* :func:`mle_study` repeats full-state maximum-likelihood fits over seeds.
* :func:`posterior_study` compares approximate posteriors with a
  fine-augmentation reference posterior.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .benchmark import GridSpec, SimConfig, doubling_test
from .expansion import CorrectionSpec, density_proxy
from .inference import SamplerConfig, mle_fit, rwm_sample, simulate_observations
from .metrics import l1_distance, normalization_check
from .models import FitzHughNagumo

FHN_THETA = (0.1, 1.2, 0.3, 0.8)


# ----------------------------------------------------------------- densities


@dataclass(frozen=True)
class DensityStudyConfig:
    theta: tuple = FHN_THETA
    s: float = 0.01
    x0: tuple = (-0.1, 0.2)
    dts: tuple = (0.1, 0.05, 0.02)
    orders: tuple = (2, 3, 4, 5)
    sim: SimConfig = field(default_factory=SimConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    threads: int = 1


@dataclass
class DensityRow:
    dt: float
    l1: dict  # order -> L1 distance to the benchmark
    mass: dict  # order -> Riemann mass of the proxy
    negative_raw: dict
    noise_floor: float  # L1 distance between the n- and 2n-path benchmarks
    mass_change: float  # change of benchmark mass when doubling the paths


def density_study(cfg: DensityStudyConfig = DensityStudyConfig()) -> list[DensityRow]:
    model = FitzHughNagumo(*cfg.theta, s=cfg.s)
    x0 = np.asarray(cfg.x0, dtype=float)
    rows = []
    for dt in cfg.dts:
        rep = doubling_test(model, x0, dt, cfg.sim, cfg.grid, cfg.threads)
        bench = rep.grid
        l1, mass, neg = {}, {}, {}
        for j in cfg.orders:
            res = density_proxy(CorrectionSpec(j, 2, "DE-I"), model, x0, bench.points, dt)
            proxy = bench.with_values(res.proxy)
            l1[j] = l1_distance(proxy, bench)
            mass[j] = normalization_check(proxy)
            neg[j] = res.negative_raw_count
        rows.append(DensityRow(dt, l1, mass, neg, rep.l1_distance, rep.mass_change))
    return rows


# ----------------------------------------------------------------------- MLE


@dataclass(frozen=True)
class MleStudyConfig:
    theta: tuple = FHN_THETA
    x0: tuple = (0.0, 0.0)
    dt: float = 0.05
    n: int = 500
    substeps: int = 100
    seeds: tuple = tuple(range(10))
    orders: tuple = (2, 5)
    budget: int = 2000


@dataclass
class MleStudyResult:
    estimates: dict  # order -> (n_seeds, d) array
    median_abs_error: dict  # order -> (d,) array
    seconds: float
    param_names: tuple

    def wins(self, better: int, worse: int) -> int:
        """Number of components where ``better`` has the smaller median absolute error."""
        return int(np.sum(self.median_abs_error[better] < self.median_abs_error[worse]))


def mle_study(cfg: MleStudyConfig = MleStudyConfig()) -> MleStudyResult:
    truth = FitzHughNagumo(*cfg.theta)
    t0 = time.perf_counter()
    est = {j: [] for j in cfg.orders}
    for seed in cfg.seeds:
        obs, _ = simulate_observations(truth, cfg.x0, cfg.dt, cfg.n, cfg.substeps, seed)
        for j in cfg.orders:
            res = mle_fit(CorrectionSpec(j, 2, "DE-I"), truth, obs, truth.theta, budget=cfg.budget)
            est[j].append(res.theta_hat)
    est = {j: np.array(v) for j, v in est.items()}
    mae = {j: np.median(np.abs(v - truth.theta), axis=0) for j, v in est.items()}
    return MleStudyResult(est, mae, time.perf_counter() - t0, truth.param_names)


# ----------------------------------------------------------------- posterior


@dataclass(frozen=True)
class PosteriorStudyConfig:
    theta: tuple = FHN_THETA
    x0: tuple = (0.0, 0.0)
    dt: float = 0.05
    n: int = 200
    substeps: int = 200
    noise_sd: float = 0.01
    data_seed: int = 11
    orders: tuple = (2, 3)
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(
        n_iters=2000, n_warmup=500, seed=1, theta_moves=0, path_moves=6))
    benchmark_order: int = 2
    benchmark_augmentation: int = 4
    benchmark_sampler: SamplerConfig | None = None


@dataclass
class PosteriorStudyResult:
    draws: dict  # label -> (chains, draws, d)
    diagnostics: dict  # label -> per-parameter diagnostics
    wasserstein: dict  # order -> (d,) W1 distance to the benchmark marginals
    seconds: dict
    param_names: tuple

    def wins(self, better: int, worse: int) -> int:
        return int(np.sum(self.wasserstein[better] < self.wasserstein[worse]))

    def converged(self, label) -> bool:
        return all(v["r_hat"] < 1.01 and v["ess_bulk"] > 400 and v["ess_tail"] > 400
                   for v in self.diagnostics[label].values())


def posterior_study(cfg: PosteriorStudyConfig = PosteriorStudyConfig()) -> PosteriorStudyResult:
    truth = FitzHughNagumo(*cfg.theta)
    obs, _ = simulate_observations(truth, cfg.x0, cfg.dt, cfg.n, cfg.substeps, cfg.data_seed, cfg.noise_sd)
    fit_model = FitzHughNagumo(*cfg.theta, partial=True)
    runs = {j: (j, cfg.sampler) for j in cfg.orders}
    bench_sampler = cfg.benchmark_sampler or cfg.sampler
    runs["benchmark"] = (cfg.benchmark_order,
                         SamplerConfig(**{**bench_sampler.__dict__, "augmentation": cfg.benchmark_augmentation}))
    draws, diags, secs = {}, {}, {}
    for label, (order, sampler) in runs.items():
        t0 = time.perf_counter()
        res = rwm_sample(CorrectionSpec(order, 2, "DE-II"), fit_model, obs, cfg=sampler)
        secs[label] = time.perf_counter() - t0
        draws[label] = res.draws
        diags[label] = res.diagnostics
    bench = draws["benchmark"].reshape(-1, draws["benchmark"].shape[-1])
    w1 = {}
    for j in cfg.orders:
        d = draws[j].reshape(-1, bench.shape[1])
        w1[j] = np.array([stats.wasserstein_distance(d[:, i], bench[:, i]) for i in range(bench.shape[1])])
    return PosteriorStudyResult(draws, diags, w1, secs, truth.param_names)
