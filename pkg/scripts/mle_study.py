"""Repeated full-state MLE fits with the J=2 and J=5 proxies.

Usage: python scripts/mle_study.py [--dt 0.05] [--seeds 10]
"""

import argparse

import numpy as np

from cfexpansion.experiments import MleStudyConfig, mle_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--orders", type=int, nargs="+", default=[2, 5])
    args = ap.parse_args()

    cfg = MleStudyConfig(dt=args.dt, n=args.n, seeds=tuple(range(args.seeds)), orders=tuple(args.orders))
    res = mle_study(cfg)
    print("order," + ",".join(f"mae_{p}" for p in res.param_names))
    for j in cfg.orders:
        print(f"{j}," + ",".join(f"{v:.5f}" for v in res.median_abs_error[j]))
    for j in cfg.orders:
        print(f"# J={j} mean estimate: {np.round(res.estimates[j].mean(axis=0), 4)}")
    print(f"# {res.seconds:.1f}s")


if __name__ == "__main__":
    main()
