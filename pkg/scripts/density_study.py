"""Proxy-versus-simulation L1 table for the FitzHugh-Nagumo model.

Usage: python scripts/density_study.py [--paths N] [--out table.csv]
"""

import argparse
import csv
import time

from cfexpansion.benchmark import SimConfig
from cfexpansion.experiments import DensityStudyConfig, density_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=1_000_000)
    ap.add_argument("--substeps", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=None, help="optional CSV for the table")
    args = ap.parse_args()

    cfg = DensityStudyConfig(sim=SimConfig(args.paths, args.substeps, args.seed), threads=args.threads)
    t0 = time.perf_counter()
    rows = density_study(cfg)
    header = ["dt"] + [f"l1_J{j}" for j in cfg.orders] + [f"mass_J{j}" for j in cfg.orders] + ["noise_floor"]
    table = [[r.dt] + [r.l1[j] for j in cfg.orders] + [r.mass[j] for j in cfg.orders] + [r.noise_floor]
             for r in rows]
    print(",".join(header))
    for line in table:
        print(",".join(f"{v:.6g}" for v in line))
    print(f"# {time.perf_counter() - t0:.1f}s")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(table)


if __name__ == "__main__":
    main()
