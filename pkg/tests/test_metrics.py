import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import stats

from cfexpansion.benchmark import DensityGrid
from cfexpansion.metrics import (
    GridMismatchError,
    abs_error_grid,
    error_report,
    l1_distance,
    l1_error,
    normalization_check,
    time_per_node,
)

values = hnp.arrays(np.float64, (6, 5), elements=st.floats(0.0, 10.0))


def grid(vals, shift=0.0):
    return DensityGrid(np.linspace(0, 1, 6) + shift, np.linspace(-1, 1, 5), vals)


@given(values, values)
def test_l1_symmetric_and_nonnegative(a, b):
    ga, gb = grid(a), grid(b)
    assert l1_distance(ga, gb) == l1_distance(gb, ga)
    assert l1_distance(ga, gb) >= 0
    assert l1_distance(ga, ga) == 0.0


@given(values, values, values)
def test_l1_triangle_inequality(a, b, c):
    ga, gb, gc = grid(a), grid(b), grid(c)
    assert l1_distance(ga, gc) <= l1_distance(ga, gb) + l1_distance(gb, gc) + 1e-9


def test_l1_riemann_sum_value():
    a = grid(np.ones((6, 5)))
    b = grid(np.zeros((6, 5)))
    assert l1_error(abs_error_grid(a, b)) == pytest.approx(30 * 0.2 * 0.5)


def test_mismatched_grids_raise():
    with pytest.raises(GridMismatchError):
        abs_error_grid(grid(np.ones((6, 5))), grid(np.ones((6, 5)), shift=0.1))


def test_gaussian_mass_close_to_one():
    xs = np.linspace(-6, 6, 121)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    g = DensityGrid(xs, xs, stats.norm.pdf(X) * stats.norm.pdf(Y))
    assert normalization_check(g) == pytest.approx(1.0, abs=1e-6)


def test_time_per_node_positive():
    t = time_per_node(lambda: sum(range(1000)), 10, repeats=3)
    assert t > 0


def test_error_report_json():
    rep = error_report(grid(np.ones((6, 5))), grid(np.zeros((6, 5))), negative_raw_count=3, wall_time_per_node=1e-6)
    data = json.loads(rep.to_json())
    assert data["negative_raw_count"] == 3
    assert data["l1"] == pytest.approx(3.0)
