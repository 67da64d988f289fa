"""Approximate posteriors (J=2, J=3) against a fine-augmentation reference.

Usage: python scripts/posterior_study.py [--iters 2000] [--augmentation 4]
"""

import argparse
import json

from cfexpansion.experiments import PosteriorStudyConfig, posterior_study
from cfexpansion.inference import SamplerConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--warmup", type=int, default=500)
    ap.add_argument("--augmentation", type=int, default=4)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--diagnostics", default=None, help="optional JSON file for the diagnostics")
    args = ap.parse_args()

    sampler = SamplerConfig(n_iters=args.iters, n_warmup=args.warmup, seed=args.seed, theta_moves=0, path_moves=6)
    cfg = PosteriorStudyConfig(dt=args.dt, sampler=sampler, benchmark_augmentation=args.augmentation)
    res = posterior_study(cfg)
    print("order," + ",".join(f"w1_{p}" for p in res.param_names))
    for j in cfg.orders:
        print(f"{j}," + ",".join(f"{v:.5f}" for v in res.wasserstein[j]))
    for label in res.draws:
        print(f"# {label}: converged={res.converged(label)} ({res.seconds[label]:.0f}s)")
    if args.diagnostics:
        with open(args.diagnostics, "w") as fh:
            json.dump({str(k): v for k, v in res.diagnostics.items()}, fh, indent=2)


if __name__ == "__main__":
    main()
