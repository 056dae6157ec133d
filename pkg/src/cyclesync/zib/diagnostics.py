"""Convergence diagnostics: rank-normalized split-Rhat and bulk ESS.

Implements the estimators of Vehtari, Gelman, Simpson, Carpenter & Buerkner
(2021): chains are split in half, draws are rank-normalized, Rhat compares
between- to within-chain variance, and ESS integrates Geyer's initial
monotone autocorrelation sequence estimated per split chain by FFT.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata


def _split_chains(x: np.ndarray) -> np.ndarray:
    """(chains, draws) -> (2*chains, draws//2), dropping an odd last draw."""
    c, n = x.shape
    half = n // 2
    return np.concatenate([x[:, :half], x[:, n - half :]], axis=0)


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    ranks = rankdata(x, axis=None).reshape(x.shape)
    return ndtri((ranks - 0.375) / (x.size + 0.25))


def _rhat_single(x: np.ndarray) -> float:
    z = _rank_normalize(_split_chains(x))
    m, n = z.shape
    if n < 2:
        return np.nan
    means = z.mean(axis=1)
    within = z.var(axis=1, ddof=1).mean()
    between = n * means.var(ddof=1)
    if within == 0:
        return 1.0
    var_plus = (n - 1) / n * within + between / n
    return float(np.sqrt(var_plus / within))


def _autocovariance(z: np.ndarray) -> np.ndarray:
    """Biased autocovariance per chain row via FFT."""
    m, n = z.shape
    centered = z - z.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n].real
    return acov / n


def _ess_single(x: np.ndarray) -> float:
    z = _rank_normalize(_split_chains(x))
    m, n = z.shape
    if n < 4:
        return np.nan
    acov = _autocovariance(z)
    chain_var = acov[:, 0] * n / (n - 1)
    mean_var = chain_var.mean()
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += z.mean(axis=1).var(ddof=1)
    if var_plus == 0:
        return float(m * n)

    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer pairs: sum consecutive (even, odd) lags while positive, then
    # enforce monotone decrease.
    max_pairs = (n - 1) // 2
    pair_sums = []
    for t in range(max_pairs):
        s = rho[2 * t] + rho[2 * t + 1]
        if s <= 0:
            break
        pair_sums.append(s)
    if not pair_sums:
        return float(m * n)
    pair_sums = np.minimum.accumulate(pair_sums)
    tau = -1.0 + 2.0 * float(np.sum(pair_sums))
    tau = max(tau, 1.0 / np.log10(m * n + 10.0))
    return float(m * n / tau)


def split_rhat(draws: np.ndarray) -> np.ndarray:
    """Per-parameter split-Rhat for (chains, draws, dim) arrays."""
    return np.array([_rhat_single(draws[:, :, i]) for i in range(draws.shape[2])])


def ess_bulk(draws: np.ndarray) -> np.ndarray:
    """Per-parameter bulk effective sample size for (chains, draws, dim)."""
    return np.array([_ess_single(draws[:, :, i]) for i in range(draws.shape[2])])
