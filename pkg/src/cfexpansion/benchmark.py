"""Reference densities from fine-step Euler-Maruyama simulation and a KDE.

Paths are simulated in fixed-size chunks; chunk ``c`` draws its normals from
a Philox stream keyed by the seed and advanced by ``c`` jumps, so the endpoint
matrix does not depend on how chunks are spread over threads.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numba
import numpy as np

from .models import FitzHughNagumo, LinearSde, OrnsteinUhlenbeck, SdeModel, UnderdampedLangevin, _as_state

CHUNK = 1 << 14


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 1_000_000
    substeps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_paths < 1 or self.substeps < 1:
            raise ValueError("n_paths and substeps must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class SimulationResult:
    endpoints: np.ndarray  # (n_kept, N)
    n_excluded: int


def default_threads() -> int:
    return os.cpu_count() or 1


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(chunk))


def em_step(model: SdeModel, x, h: float, z) -> np.ndarray:
    """One Euler-Maruyama step ``x + V0(x) h + sigma(x) sqrt(h) z`` (batched)."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    x = _as_state(x, model.n_total)
    z = np.asarray(z, dtype=float)
    noise = np.einsum("...ij,...j->...i", model.diffusion(x), z)
    return x + model.drift(x) * h + math.sqrt(h) * noise


@numba.njit(cache=True)
def _em_fhn(x, z, h, eps, gam, beta, sig, s):
    rh = math.sqrt(h)
    for k in range(x.shape[0]):
        v, u = x[k, 0], x[k, 1]
        for i in range(z.shape[1]):
            dv = (v - v * v * v - u - s) / eps
            du = gam * v - u + beta
            v, u = v + dv * h, u + du * h + sig * rh * z[k, i, 0]
        x[k, 0], x[k, 1] = v, u


@numba.njit(cache=True)
def _em_linear(x, z, h, A, b, sig):
    rh = math.sqrt(h)
    N, d = sig.shape
    y = np.empty(N)
    for k in range(x.shape[0]):
        for i in range(z.shape[1]):
            for r in range(N):
                acc = b[r]
                for c in range(N):
                    acc += A[r, c] * x[k, c]
                noise = 0.0
                for c in range(d):
                    noise += sig[r, c] * z[k, i, c]
                y[r] = x[k, r] + acc * h + rh * noise
            for r in range(N):
                x[k, r] = y[r]


def _linear_coefficients(model):
    if isinstance(model, OrnsteinUhlenbeck):
        model = model.as_linear()
    if isinstance(model, LinearSde):
        return model.A, model.b, model.sigma
    if isinstance(model, UnderdampedLangevin):
        zero = np.zeros(2)
        return model.drift_jacobian(zero), model.drift(zero), model.diffusion(zero)
    return None


def _simulate_chunk(model, x0, h, substeps, n, rng):
    """EM paths for one chunk; normals are drawn path-major, ``(n, substeps, d)``."""
    x = np.broadcast_to(np.asarray(x0, dtype=float), (n, model.n_total)).copy()
    z = rng.standard_normal((n, substeps, model.n_noise))
    if isinstance(model, FitzHughNagumo):
        _em_fhn(x, z, h, model.epsilon, model.gamma, model.beta, model.sigma, model.s)
        return x
    lin = _linear_coefficients(model)
    if lin is not None:
        A, b, sig = (np.ascontiguousarray(a, dtype=float) for a in lin)
        _em_linear(x, z, h, A, b, sig)
        return x
    for i in range(substeps):
        x = em_step(model, x, h, z[:, i])
    return x


def _run_chunks(fn, n_chunks, threads):
    threads = max(1, int(threads or 1))
    if threads == 1 or n_chunks == 1:
        return [fn(c) for c in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_chunks)))


def simulate_endpoints(model: SdeModel, x0, dt: float, cfg: SimConfig, threads: int | None = 1) -> SimulationResult:
    """Endpoints at time ``dt`` of ``cfg.n_paths`` EM paths started at ``x0``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x0 = _as_state(x0, model.n_total)
    h = dt / cfg.substeps
    n_chunks = -(-cfg.n_paths // CHUNK)

    def work(c):
        n = min(CHUNK, cfg.n_paths - c * CHUNK)
        with np.errstate(over="ignore", invalid="ignore"):
            return _simulate_chunk(model, x0, h, cfg.substeps, n, chunk_rng(cfg.seed, c))

    out = np.concatenate(_run_chunks(work, n_chunks, threads))
    ok = np.all(np.isfinite(out), axis=1)
    n_bad = int(np.sum(~ok))
    if n_bad > 1e-3 * cfg.n_paths:
        raise SimulationError(f"{n_bad} of {cfg.n_paths} paths blew up (limit 0.1%)")
    return SimulationResult(out[ok], n_bad)


def simulate_path(model: SdeModel, x0, dt: float, n_steps: int, substeps: int, seed: int) -> np.ndarray:
    """A single EM trajectory recorded every ``dt``; shape ``(n_steps + 1, N)``."""
    x = _as_state(x0, model.n_total).astype(float).reshape(1, -1)
    rng = chunk_rng(seed, 0)
    h = dt / substeps
    out = np.empty((n_steps + 1, model.n_total))
    out[0] = x[0]
    for k in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            x = _simulate_chunk(model, x[0], h, substeps, 1, rng)
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"trajectory blew up at step {k + 1}")
        out[k + 1] = x[0]
    return out


@dataclass(frozen=True)
class DensityGrid:
    """Densities ``values[i, j]`` at nodes ``(x_nodes[i], y_nodes[j])``."""

    x_nodes: np.ndarray
    y_nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for nodes in (self.x_nodes, self.y_nodes):
            if nodes.ndim != 1 or len(nodes) < 2 or np.any(np.diff(nodes) <= 0):
                raise ValueError("grid nodes must be strictly increasing with at least two entries")
        if self.values.shape != (len(self.x_nodes), len(self.y_nodes)):
            raise ValueError(f"values shape {self.values.shape} does not match the nodes")

    @property
    def cell_area(self) -> float:
        dx = (self.x_nodes[-1] - self.x_nodes[0]) / (len(self.x_nodes) - 1)
        dy = (self.y_nodes[-1] - self.y_nodes[0]) / (len(self.y_nodes) - 1)
        return float(dx * dy)

    @property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(nx, ny, 2)``."""
        X, Y = np.meshgrid(self.x_nodes, self.y_nodes, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def with_values(self, values) -> "DensityGrid":
        return DensityGrid(self.x_nodes, self.y_nodes, np.asarray(values, dtype=float))

    def same_nodes(self, other: "DensityGrid") -> bool:
        return np.array_equal(self.x_nodes, other.x_nodes) and np.array_equal(self.y_nodes, other.y_nodes)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,y,value\n")
        P = self.points.reshape(-1, 2)
        for (a, b), v in zip(P, self.values.ravel()):
            buf.write(f"{float(a)!r},{float(b)!r},{float(v)!r}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "DensityGrid":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        xs = np.unique(data[:, 0])
        ys = np.unique(data[:, 1])
        return cls(xs, ys, data[:, 2].reshape(len(xs), len(ys)))


@dataclass(frozen=True)
class GridSpec:
    """Grid bounds; ``None`` ranges are chosen from the data."""

    n_x: int = 51
    n_y: int = 51
    x_range: tuple[float, float] | None = None
    y_range: tuple[float, float] | None = None
    width_sd: float = 4.0

    def nodes(self, center, sd) -> tuple[np.ndarray, np.ndarray]:
        out = []
        for k, (rng, n) in enumerate(((self.x_range, self.n_x), (self.y_range, self.n_y))):
            lo, hi = rng if rng is not None else (center[k] - self.width_sd * sd[k], center[k] + self.width_sd * sd[k])
            out.append(np.linspace(lo, hi, n))
        return out[0], out[1]


def silverman_bandwidth(samples: np.ndarray) -> np.ndarray:
    n, N = samples.shape
    sd = samples.std(axis=0, ddof=1)
    if np.any(~(sd > 0)):
        raise ValueError("KDE needs positive sample variance in every dimension")
    return sd * (4.0 / ((N + 2) * n)) ** (1.0 / (N + 4))


_CUTOFF = 9.0  # kernels are negligible (< 3e-18 relative) beyond 9 bandwidths


@numba.njit(parallel=True, cache=True)
def _kde_kernel(xs, ys, s1, s2, h1, h2):
    nx, ny, n = xs.shape[0], ys.shape[0], s1.shape[0]
    out = np.zeros((nx, ny))
    dy = (ys[-1] - ys[0]) / (ny - 1)
    for i in numba.prange(nx):
        row = np.zeros(ny)
        for k in range(n):
            u = (xs[i] - s1[k]) / h1
            if abs(u) > _CUTOFF:
                continue
            k1 = math.exp(-0.5 * u * u)
            lo = max(0, int(math.ceil((s2[k] - _CUTOFF * h2 - ys[0]) / dy)))
            hi = min(ny - 1, int(math.floor((s2[k] + _CUTOFF * h2 - ys[0]) / dy)))
            for j in range(lo, hi + 1):
                w = (ys[j] - s2[k]) / h2
                row[j] += k1 * math.exp(-0.5 * w * w)
        out[i] = row
    return out / (2.0 * math.pi * h1 * h2 * n)


def kde_density(samples, x_nodes, y_nodes, bandwidth=None) -> DensityGrid:
    """Product-Gaussian KDE of 2-d samples evaluated at every grid node."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise ValueError("kde_density expects samples of shape (n, 2)")
    if samples.shape[0] < 100 and bandwidth is None:
        raise ValueError("kde_density needs at least 100 samples for a data-driven bandwidth")
    h = silverman_bandwidth(samples) if bandwidth is None else np.asarray(bandwidth, dtype=float)
    xs = np.asarray(x_nodes, dtype=float)
    ys = np.asarray(y_nodes, dtype=float)
    vals = _kde_kernel(xs, ys, np.ascontiguousarray(samples[:, 0]), np.ascontiguousarray(samples[:, 1]),
                       float(h[0]), float(h[1]))
    return DensityGrid(xs, ys, vals)


def benchmark_density(model: SdeModel, x0, dt: float, cfg: SimConfig, grid: GridSpec, threads: int | None = 1):
    """Simulate endpoints and return ``(DensityGrid, SimulationResult)``."""
    sim = simulate_endpoints(model, x0, dt, cfg, threads=threads)
    e = sim.endpoints
    xs, ys = grid.nodes(e.mean(axis=0), e.std(axis=0, ddof=1))
    return kde_density(e, xs, ys), sim


@dataclass(frozen=True)
class DoublingReport:
    """Benchmark with ``n`` and ``2n`` paths compared on the ``n``-path grid."""

    l1_distance: float
    mass_change: float
    grid: DensityGrid
    grid_doubled: DensityGrid


def doubling_test(model: SdeModel, x0, dt: float, cfg: SimConfig, grid: GridSpec, threads: int | None = 1) -> DoublingReport:
    """KDE noise-floor estimate from doubling the number of paths.

    The counter-based streams make the doubled sample contain the original one.
    """
    base, _ = benchmark_density(model, x0, dt, cfg, grid, threads)
    sim2 = simulate_endpoints(model, x0, dt, replace(cfg, n_paths=2 * cfg.n_paths), threads=threads)
    doubled = kde_density(sim2.endpoints, base.x_nodes, base.y_nodes)
    area = base.cell_area
    l1 = area * float(np.sum(np.abs(doubled.values - base.values)))
    mass = area * float(np.sum(doubled.values)) - area * float(np.sum(base.values))
    return DoublingReport(l1, abs(mass), base, doubled)
