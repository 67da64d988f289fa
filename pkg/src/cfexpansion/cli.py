"""Command-line front end: ``cfexp <command> --config FILE``.

Commands write CSV/JSON artifacts into the output directory together with
``resolved_config.json``, which reproduces the run when fed back in.
Exit codes: 0 success, 2 configuration error, 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numba
import numpy as np

from . import config as C
from .benchmark import (
    DensityGrid,
    SimulationError,
    benchmark_density,
    default_threads,
    doubling_test,
)
from .expansion import density_proxy
from .inference import (
    FitError,
    ObservationMode,
    ObservationSet,
    StartupError,
    mle_fit,
    rwm_sample,
    simulate_observations,
)
from .ldl import DegenerateMomentsError, ldl_moments
from .metrics import abs_error_grid, l1_error, normalization_check, time_per_node
from .models import ModelInputError, check_hormander

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_NUMERIC_ERRORS = (DegenerateMomentsError, SimulationError, FitError, StartupError, FloatingPointError,
                   np.linalg.LinAlgError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _model_grid(cfg: C.ExperimentConfig):
    """Proxy evaluation nodes from the baseline moments at ``x0``."""
    model = cfg.build_model()
    m = ldl_moments(model, np.asarray(cfg.x0, dtype=float), cfg.dt)
    sd = np.sqrt(np.diag(m.cov))
    xs, ys = cfg.grid.nodes(m.mean, sd)
    return xs, ys


def _proxy_grid(cfg, order_j, xs, ys):
    model = cfg.build_model()
    empty = DensityGrid(xs, ys, np.zeros((len(xs), len(ys))))
    res = density_proxy(cfg.correction(order_j), model, np.asarray(cfg.x0, dtype=float), empty.points, cfg.dt)
    return empty.with_values(res.proxy), res


def cmd_density(cfg: C.ExperimentConfig, out: Path, threads: int) -> dict:
    xs, ys = _model_grid(cfg)
    grid, res = _proxy_grid(cfg, cfg.order_j, xs, ys)
    grid.write_csv(out / "density.csv")
    summary = {
        "order_j": cfg.order_j,
        "variant": cfg.correction().variant.value,
        "mass": normalization_check(grid),
        "negative_raw_count": res.negative_raw_count,
    }
    _write_json(out / "normalization.json", summary)
    return summary


def cmd_compare(cfg: C.ExperimentConfig, out: Path, threads: int) -> dict:
    model = cfg.build_model()
    x0 = np.asarray(cfg.x0, dtype=float)
    info = {}
    if cfg.benchmark_path is not None:
        bench = DensityGrid.read_csv(cfg.benchmark_path)
        info["source"] = str(cfg.benchmark_path)
    else:
        t0 = time.perf_counter()
        bench, sim = benchmark_density(model, x0, cfg.dt, cfg.sim_config(), cfg.grid, threads)
        info.update(source="simulation", n_paths=cfg.simulation.n_paths, substeps=cfg.simulation.substeps,
                    n_excluded=sim.n_excluded, seconds=time.perf_counter() - t0)
        if cfg.doubling_test:
            rep = doubling_test(model, x0, cfg.dt, cfg.sim_config(), cfg.grid, threads)
            info.update(noise_floor_l1=rep.l1_distance, doubling_mass_change=rep.mass_change)
    bench.write_csv(out / "benchmark.csv")
    rows = []
    table = ["order_j,l1,negative_raw_count"]
    for j in cfg.orders:
        grid, res = _proxy_grid(cfg, j, bench.x_nodes, bench.y_nodes)
        err = abs_error_grid(grid, bench)
        err.write_csv(out / f"error_J{j}.csv")
        l1 = l1_error(err)
        n_nodes = grid.values.size
        per_node = time_per_node(lambda: _proxy_grid(cfg, j, bench.x_nodes, bench.y_nodes), n_nodes, repeats=3)
        rows.append({"order_j": j, "l1": l1, "negative_raw_count": res.negative_raw_count,
                     "mass": normalization_check(grid), "wall_time_per_node": per_node})
        table.append(f"{j},{l1!r},{res.negative_raw_count}")
    _write_text(out / "l1_table.csv", "\n".join(table) + "\n")
    report = {"benchmark": info, "rows": rows}
    _write_json(out / "report.json", report)
    return report


def _observations(cfg: C.ExperimentConfig):
    d = cfg.data
    mode = ObservationMode.FULL if d.noise_sd is None else ObservationMode.NOISY
    if d.path is not None:
        return ObservationSet.read_csv(d.path, mode=mode, noise_sd=d.noise_sd), None
    return simulate_observations(cfg.build_model(), np.asarray(cfg.x0, dtype=float), cfg.dt, d.n, d.substeps,
                                 cfg.seed, d.noise_sd)


def cmd_simulate(cfg: C.ExperimentConfig, out: Path, threads: int) -> dict:
    d = cfg.data
    obs, path = simulate_observations(cfg.build_model(), np.asarray(cfg.x0, dtype=float), cfg.dt, d.n, d.substeps,
                                      cfg.seed, d.noise_sd)
    obs.write_csv(out / "observations.csv")
    ObservationSet(obs.times, path, ObservationMode.FULL).write_csv(out / "path.csv")
    return {"n": d.n, "mode": obs.mode.value}


def cmd_mle(cfg: C.ExperimentConfig, out: Path, threads: int) -> dict:
    obs, _ = _observations(cfg)
    model = cfg.build_model()
    init = cfg.inference.init if cfg.inference.init is not None else tuple(model.theta)
    res = mle_fit(cfg.correction(), model, obs, np.asarray(init, dtype=float), budget=cfg.inference.budget)
    summary = {
        "param_names": list(model.param_names),
        "theta_hat": [float(v) for v in res.theta_hat],
        "loglik": float(res.loglik),
        "evals": int(res.evals),
        "converged": bool(res.converged),
    }
    _write_json(out / "mle.json", summary)
    return summary


def cmd_mcmc(cfg: C.ExperimentConfig, out: Path, threads: int) -> dict:
    obs, _ = _observations(cfg)
    if obs.mode is not ObservationMode.NOISY:
        raise C.ConfigError("mcmc needs noisy first-coordinate data: set data.noise_sd")
    res = rwm_sample(cfg.correction(), cfg.build_model(), obs, cfg.priors(), cfg.sampler_config())
    _write_text(out / "chains.csv", res.chains_csv())
    diag = res.diagnostics_dict()
    _write_json(out / "diagnostics.json", diag)
    return diag


def cmd_check(cfg: C.ExperimentConfig, out: Path, threads: int) -> dict:
    model = cfg.build_model()
    x0 = np.asarray(cfg.x0, dtype=float)
    rep = check_hormander(model, x0)
    m = ldl_moments(model, x0, cfg.dt)
    eig = np.linalg.eigvalsh(m.cov)
    summary = {
        "hormander": {"rank_rough": rep.rank_rough, "rank_full": rep.rank_full, "satisfied": bool(rep.satisfied)},
        "moments": {
            "mean": [float(v) for v in m.mean],
            "cov": [[float(v) for v in row] for row in m.cov],
            "cov_eigenvalues": [float(v) for v in eig],
            "condition_number": float(eig[-1] / eig[0]),
            "log_det": float(m.log_det),
        },
    }
    _write_json(out / "check.json", summary)
    return summary


COMMANDS = {
    "density": cmd_density,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
    "mle": cmd_mle,
    "mcmc": cmd_mcmc,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cfexp", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="experiment JSON file")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: logical cores)")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    return p


def _set_threads(threads: int) -> None:
    numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = C.load(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["output_dir"] = args.out
        if overrides:
            cfg = C.validate(dataclasses.replace(cfg, **overrides))
        if args.threads is not None and args.threads < 1:
            raise C.ConfigError("--threads must be at least 1")
    except C.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    threads = args.threads or default_threads()
    _set_threads(threads)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "resolved_config.json", C.dumps(cfg))
    try:
        COMMANDS[args.command](cfg, out, threads)
    except (C.ConfigError, ModelInputError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(run())
