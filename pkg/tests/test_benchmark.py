import numpy as np
import pytest
from scipy import stats

from cfexpansion.benchmark import (
    CHUNK,
    DensityGrid,
    GridSpec,
    SimConfig,
    SimulationError,
    benchmark_density,
    chunk_rng,
    doubling_test,
    em_step,
    kde_density,
    silverman_bandwidth,
    simulate_endpoints,
    simulate_path,
)
from cfexpansion.models import FitzHughNagumo, LinearSde, OrnsteinUhlenbeck, UnderdampedLangevin


def test_em_kernel_matches_generic_step():
    # the compiled FHN kernel against a python loop over em_step with the same normals
    model = FitzHughNagumo(0.1, 1.2, 0.3, 0.8, s=0.01)
    cfg = SimConfig(n_paths=50, substeps=20, seed=7)
    out = simulate_endpoints(model, [-0.1, 0.2], 0.1, cfg).endpoints
    z = chunk_rng(7, 0).standard_normal((50, 20, 1))
    x = np.tile([-0.1, 0.2], (50, 1))
    for i in range(20):
        x = em_step(model, x, 0.1 / 20, z[:, i])
    np.testing.assert_allclose(out, x, rtol=1e-13, atol=1e-15)


def test_linear_kernel_matches_generic_step():
    model = LinearSde([[0.0, 1.0], [-2.0, -0.3]], [0.1, 0.0], [[0.2, 0.0], [0.0, 0.9]])
    cfg = SimConfig(n_paths=30, substeps=10, seed=3)
    out = simulate_endpoints(model, [0.5, -0.5], 0.2, cfg).endpoints
    z = chunk_rng(3, 0).standard_normal((30, 10, 2))
    x = np.tile([0.5, -0.5], (30, 1))
    for i in range(10):
        x = em_step(model, x, 0.02, z[:, i])
    np.testing.assert_allclose(out, x, rtol=1e-13, atol=1e-15)


def test_endpoints_independent_of_threads():
    model = FitzHughNagumo()
    cfg = SimConfig(n_paths=3 * CHUNK + 17, substeps=5, seed=11)
    a = simulate_endpoints(model, [0.0, 0.0], 0.05, cfg, threads=1).endpoints
    b = simulate_endpoints(model, [0.0, 0.0], 0.05, cfg, threads=4).endpoints
    assert a.tobytes() == b.tobytes()


def test_doubled_sample_contains_original():
    model = FitzHughNagumo()
    cfg = SimConfig(n_paths=CHUNK + 5, substeps=4, seed=2)
    a = simulate_endpoints(model, [0.0, 0.0], 0.05, cfg).endpoints
    b = simulate_endpoints(model, [0.0, 0.0], 0.05, SimConfig(2 * cfg.n_paths, 4, 2)).endpoints
    np.testing.assert_array_equal(b[:CHUNK], a[:CHUNK])


def test_ou_endpoints_match_exact_law():
    ou = OrnsteinUhlenbeck(kappa=1.0, mu=0.5, sigma=0.8)
    e = simulate_endpoints(ou, [2.0], 0.5, SimConfig(200_000, 200, 5)).endpoints[:, 0]
    f = np.exp(-0.5)
    mean, var = 0.5 + 1.5 * f, 0.64 * (1 - f**2) / 2
    assert e.mean() == pytest.approx(mean, abs=4 * np.sqrt(var / len(e)))
    assert e.var() == pytest.approx(var, rel=0.02)


def test_simulation_blowup_raises():
    model = FitzHughNagumo(epsilon=1e-4)
    with pytest.raises(SimulationError):
        simulate_endpoints(model, [2.0, 0.0], 0.1, SimConfig(1000, 10, 0))


def test_simulate_path_deterministic_without_noise():
    model = UnderdampedLangevin(alpha=0.5, sigma=0.0)
    a = simulate_path(model, [1.0, 0.0], 0.1, 20, 10, seed=1)
    b = simulate_path(model, [1.0, 0.0], 0.1, 20, 10, seed=99)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (21, 2)


def test_kde_matches_direct_sum():
    rng = np.random.default_rng(0)
    s = rng.normal(size=(500, 2)) * [0.3, 1.0]
    xs, ys = np.linspace(-1, 1, 7), np.linspace(-3, 3, 9)
    h = silverman_bandwidth(s)
    grid = kde_density(s, xs, ys)
    ref = np.empty((7, 9))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            ref[i, j] = np.mean(stats.norm.pdf(x, s[:, 0], h[0]) * stats.norm.pdf(y, s[:, 1], h[1]))
    # kernels beyond 9 bandwidths are dropped, far below this tolerance
    np.testing.assert_allclose(grid.values, ref, rtol=1e-12, atol=1e-15 * ref.max())


def test_silverman_formula():
    s = np.random.default_rng(1).normal(size=(1000, 2))
    h = silverman_bandwidth(s)
    np.testing.assert_allclose(h, s.std(axis=0, ddof=1) * (4.0 / (4 * 1000)) ** (1 / 6))


def test_kde_rejects_bad_input():
    with pytest.raises(ValueError):
        kde_density(np.zeros((10, 3)), [0, 1], [0, 1])
    with pytest.raises(ValueError):
        kde_density(np.zeros((10, 2)), [0, 1], [0, 1])


def test_grid_csv_round_trip(tmp_path):
    g = DensityGrid(np.linspace(0, 1, 4), np.linspace(-1, 1, 3), np.arange(12.0).reshape(4, 3) / 7)
    g.write_csv(tmp_path / "g.csv")
    back = DensityGrid.read_csv(tmp_path / "g.csv")
    assert back.same_nodes(g)
    np.testing.assert_array_equal(back.values, g.values)


def test_grid_validation():
    with pytest.raises(ValueError):
        DensityGrid(np.array([0.0, 0.0]), np.array([0.0, 1.0]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        DensityGrid(np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.zeros((3, 2)))


def test_gridspec_fixed_and_auto_ranges():
    xs, ys = GridSpec(5, 3, x_range=(0.0, 1.0)).nodes([10.0, 20.0], [1.0, 2.0])
    np.testing.assert_allclose(xs, np.linspace(0, 1, 5))
    np.testing.assert_allclose(ys, np.linspace(12, 28, 3))


def test_benchmark_density_mass_and_doubling():
    model = FitzHughNagumo(0.1, 1.2, 0.3, 0.8, s=0.01)
    cfg = SimConfig(40_000, 20, 0)
    grid, sim = benchmark_density(model, [-0.1, 0.2], 0.1, cfg, GridSpec(41, 41))
    assert sim.n_excluded == 0
    assert grid.cell_area * grid.values.sum() == pytest.approx(1.0, abs=0.01)
    rep = doubling_test(model, [-0.1, 0.2], 0.1, cfg, GridSpec(41, 41))
    assert rep.grid.values.tobytes() == grid.values.tobytes()
    assert 0 < rep.l1_distance < 0.2
    assert rep.mass_change < 0.01
