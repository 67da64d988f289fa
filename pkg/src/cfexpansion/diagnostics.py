"""MCMC convergence diagnostics: rank-normalised split-R-hat and bulk/tail ESS.

Follows the rank-normalisation recipe of Vehtari, Gelman, Simpson, Carpenter
and Buerkner (2021), with Geyer's initial monotone sequence for the
autocorrelation sum.  Draws are arrays of shape ``(n_chains, n_draws)``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats


def _split(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, x.shape[1] - half:]], axis=0)


def _rank_normalise(x: np.ndarray) -> np.ndarray:
    r = stats.rankdata(x, method="average").reshape(x.shape)
    return stats.norm.ppf((r - 0.375) / (x.size + 0.25))


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x - x.mean(axis=-1, keepdims=True), n=m)
    return np.fft.irfft(f * np.conj(f), n=m)[..., :n] / n


def _ess(x: np.ndarray) -> float:
    m, n = x.shape
    if n < 4 or np.ptp(x) == 0:
        return float("nan")
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1.0)
    mean_var = chain_var.mean()
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    rho = np.zeros(n)
    rho[0] = 1.0
    even = 1.0
    odd = 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    rho[1] = odd
    t = 1
    while t < n - 3 and even + odd > 0.0:
        even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        if even + odd >= 0.0:
            rho[t + 1] = even
            rho[t + 2] = odd
        t += 2
    max_t = t - 2
    if odd > 0.0:
        rho[max_t + 1] = odd
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = 0.5 * (rho[t - 1] + rho[t])
            rho[t + 2] = rho[t + 1]
        t += 2
    total = m * n
    tau = -1.0 + 2.0 * rho[: max_t + 1].sum() + rho[max_t + 1]
    tau = max(tau, 1.0 / math.log10(total))
    return float(total / tau)


def _rhat_basic(x: np.ndarray) -> float:
    m, n = x.shape
    W = x.var(axis=1, ddof=1).mean()
    B = n * x.mean(axis=1).var(ddof=1)
    if W == 0:
        return float("nan")
    return float(math.sqrt(((n - 1.0) / n * W + B / n) / W))


def rhat(draws) -> float:
    """Rank-normalised split-R-hat (max of bulk and folded-tail versions)."""
    s = _split(draws)
    bulk = _rhat_basic(_rank_normalise(s))
    folded = np.abs(s - np.median(s))
    tail = _rhat_basic(_rank_normalise(folded))
    return max(bulk, tail)


def ess_bulk(draws) -> float:
    return _ess(_rank_normalise(_split(draws)))


def ess_tail(draws) -> float:
    s = _split(draws)
    q05, q95 = np.quantile(s, [0.05, 0.95])
    return min(_ess((s <= q05).astype(float)), _ess((s <= q95).astype(float)))


def ess_basic(draws) -> float:
    """ESS of the raw draws (no rank normalisation, no splitting)."""
    return _ess(np.atleast_2d(np.asarray(draws, dtype=float)))


def summarize(draws, names) -> dict:
    """Per-parameter diagnostics for draws of shape ``(n_chains, n_draws, n_params)``."""
    draws = np.asarray(draws, dtype=float)
    out = {}
    for j, name in enumerate(names):
        d = draws[:, :, j]
        out[name] = {
            "mean": float(d.mean()),
            "sd": float(d.std(ddof=1)),
            "r_hat": rhat(d),
            "ess_bulk": ess_bulk(d),
            "ess_tail": ess_tail(d),
        }
    return out
