"""Grid error metrics and timing."""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .benchmark import DensityGrid


class GridMismatchError(ValueError):
    pass


def _pairwise_sum(values: np.ndarray) -> float:
    # np.sum on a contiguous float64 array uses pairwise summation in a fixed order
    return float(np.sum(np.ascontiguousarray(values, dtype=float).ravel()))


def abs_error_grid(a: DensityGrid, b: DensityGrid) -> DensityGrid:
    if not a.same_nodes(b):
        raise GridMismatchError("grids have different nodes")
    return a.with_values(np.abs(a.values - b.values))


def l1_error(err: DensityGrid) -> float:
    """Riemann sum ``sum |E| * dx * dy``."""
    return err.cell_area * _pairwise_sum(err.values)


def l1_distance(a: DensityGrid, b: DensityGrid) -> float:
    return l1_error(abs_error_grid(a, b))


def normalization_check(grid: DensityGrid) -> float:
    """Riemann mass of the grid."""
    return grid.cell_area * _pairwise_sum(grid.values)


@dataclass(frozen=True)
class ErrorReport:
    abs_error_grid: DensityGrid
    l1: float
    negative_raw_count: int
    wall_time_per_node: float

    def summary(self) -> dict:
        return {
            "l1": self.l1,
            "negative_raw_count": self.negative_raw_count,
            "wall_time_per_node": self.wall_time_per_node,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def time_per_node(fn, n_nodes: int, repeats: int = 5) -> float:
    """Median wall time of ``fn()`` over ``repeats`` calls, divided by ``n_nodes``."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times) / n_nodes


def error_report(estimate: DensityGrid, reference: DensityGrid, negative_raw_count: int = 0,
                 wall_time_per_node: float = float("nan")) -> ErrorReport:
    err = abs_error_grid(estimate, reference)
    return ErrorReport(err, l1_error(err), int(negative_raw_count), float(wall_time_per_node))
