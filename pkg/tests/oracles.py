"""Independent reference implementations used as test oracles.

These deliberately avoid the library's FFT/vectorized code paths: the CWT
oracle is a direct O(T) quadrature of the transform integral, the smoothing
oracle a literal convolution sum, and the phase oracles plain trigonometry.
"""

import numpy as np


def quadrature_cwt(values: np.ndarray, scale: float, tau: float, eta: float = 6.0) -> complex:
    """Direct Riemann-sum CWT of a (mean-removed) series at one (s, tau)."""
    x = np.asarray(values, dtype=float)
    n = np.arange(x.size)
    u = (n - tau) / scale
    psi = np.pi**-0.25 * np.exp(1j * eta * u) * np.exp(-0.5 * u * u)
    return complex(np.sum((x - x.mean()) * np.conj(psi)) / np.sqrt(scale))


def direct_time_smooth(row: np.ndarray, sigma: float, support: float = 4.0) -> np.ndarray:
    """Edge-renormalized Gaussian smoothing by a literal convolution sum."""
    n = row.size
    half = max(1, int(np.ceil(support * sigma)))
    out = np.empty(n, dtype=row.dtype)
    for t in range(n):
        lo, hi = max(0, t - half), min(n - 1, t + half)
        lags = np.arange(lo, hi + 1) - t
        w = np.exp(-0.5 * (lags / sigma) ** 2)
        out[t] = np.sum(w * row[lo : hi + 1]) / w.sum()
    return out


def shifted_cosine_phase(period: float, delay: float) -> float:
    """Phase of W_x * conj(W_y) for y(t) = x(t - delay), x a cosine of `period`.

    With the analytic Morlet, W ~ exp(i omega tau), so a delayed second
    series contributes exp(+i omega delay).
    """
    phase = 2.0 * np.pi * delay / period
    return float(np.angle(np.exp(1j * phase)))


def sample_autocorr(x: np.ndarray, lag: int = 1) -> float:
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    return float(np.dot(x[:-lag], x[lag:]) / np.dot(x, x))
