"""Cross-wavelet machinery: smoothing, coherence, phase, band time lags.

Coherence is the smoothed cross spectrum normalized by the smoothed auto
spectra. Smoothing runs a Gaussian window along time whose width scales with
the wavelet scale, followed by a boxcar across adjacent scales; window
weights are renormalized at the edges. Without smoothing the normalization
is degenerate and coherence is identically one.

Sign convention (recorded in output metadata): the cross spectrum is
W_x * conj(W_y) and the phase is atan2 of its smoothed value. A positive
phase, and hence a positive band time lag, is reported as "y leads x".
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import fft as sfft

from .cwt import CwtField, ScaleGrid, coi_halfwidth
from .errors import AlignmentError

#: Auto-spectrum floor, relative to the matrix maximum, guarding 0/0 cells.
DENOMINATOR_FLOOR = 1e-12

#: Gaussian time window support in standard deviations.
_TIME_SUPPORT = 4.0


@dataclass(frozen=True)
class SmoothingSpec:
    """Time/scale smoothing widths.

    time_bandwidth scales the Gaussian std with the wavelet scale
    (std = time_bandwidth * s months); scale_window is an odd boxcar length
    in scale bins.
    """

    time_bandwidth: float = 0.6
    scale_window: int = 3

    def __post_init__(self):
        if self.time_bandwidth <= 0:
            raise ValueError("time_bandwidth must be > 0")
        if self.scale_window < 1 or self.scale_window % 2 == 0:
            raise ValueError("scale_window must be an odd integer >= 1")


@dataclass(frozen=True)
class CoherenceField:
    """Smoothed coherence R in [0, 1], phase in [-pi, pi], and masks.

    ``pvals`` is filled by the surrogate stage; ``degenerate`` marks cells
    where the normalization hit its floor (excluded from aggregation).
    ``smoothed_cross`` is retained for phase/lag consumers.
    """

    grid: ScaleGrid
    times: np.ndarray
    R: np.ndarray
    phase: np.ndarray
    coi_mask: np.ndarray
    pvals: np.ndarray | None = None
    degenerate: np.ndarray | None = None
    smoothed_cross: np.ndarray | None = None
    coi_coefficient: float = float(np.sqrt(2.0))
    start: int = 0

    def with_pvals(self, pvals: np.ndarray) -> "CoherenceField":
        return replace(self, pvals=pvals)


class SmoothingPlan:
    """Precomputed FFT kernels and edge normalizers for one (grid, T, spec).

    The per-scale Gaussian kernels depend only on the grid and spec, so the
    surrogate loop reuses one plan across hundreds of smoothing passes.
    """

    def __init__(self, grid: ScaleGrid, n_times: int, spec: SmoothingSpec):
        self.n_times = n_times
        self.spec = spec
        sigmas = spec.time_bandwidth * grid.scales
        half = np.maximum(1, np.ceil(_TIME_SUPPORT * sigmas).astype(int))
        self.n_fft = sfft.next_fast_len(n_times + int(half.max()) + 1)
        kernels = np.zeros((grid.n_scales, self.n_fft))
        for i, (sig, h) in enumerate(zip(sigmas, half)):
            lags = np.arange(-h, h + 1)
            g = np.exp(-0.5 * (lags / sig) ** 2)
            g /= g.sum()
            kernels[i, lags % self.n_fft] = g
        self.kernel_fft = sfft.fft(kernels, axis=1)
        ones = np.zeros((1, self.n_fft))
        ones[0, :n_times] = 1.0
        cover = sfft.ifft(sfft.fft(ones, axis=1) * self.kernel_fft, axis=1).real
        self.edge_norm = cover[:, :n_times]

    def smooth_time(self, mat: np.ndarray) -> np.ndarray:
        buf = np.zeros((mat.shape[0], self.n_fft), dtype=complex)
        buf[:, : self.n_times] = mat
        out = sfft.ifft(sfft.fft(buf, axis=1) * self.kernel_fft, axis=1)
        out = out[:, : self.n_times] / self.edge_norm
        if not np.iscomplexobj(mat):
            return out.real
        return out


def _smooth_scale(mat: np.ndarray, window: int) -> np.ndarray:
    if window == 1:
        return mat
    half = window // 2
    csum = np.cumsum(mat, axis=0)
    n = mat.shape[0]
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half, n - 1)
    total = csum[hi] - np.where((lo > 0)[:, None], csum[np.maximum(lo - 1, 0)], 0.0)
    return total / (hi - lo + 1)[:, None]


def smooth(
    mat: np.ndarray,
    grid: ScaleGrid,
    spec: SmoothingSpec,
    plan: SmoothingPlan | None = None,
) -> np.ndarray:
    """Apply the time Gaussian then the scale boxcar to a (scale, time) matrix."""
    if mat.shape[0] != grid.n_scales:
        raise AlignmentError("matrix rows do not match the scale grid")
    if plan is None:
        plan = SmoothingPlan(grid, mat.shape[1], spec)
    return _smooth_scale(plan.smooth_time(mat), spec.scale_window)


def _check_aligned(wx: CwtField, wy: CwtField) -> None:
    same_grid = (
        wx.grid.n_scales == wy.grid.n_scales
        and np.array_equal(wx.grid.scales, wy.grid.scales)
        and wx.grid.eta == wy.grid.eta
    )
    if not same_grid:
        raise AlignmentError("scale grids differ")
    if wx.n_times != wy.n_times or wx.start != wy.start:
        raise AlignmentError("time spans differ")


def cross_wavelet(wx: CwtField, wy: CwtField) -> np.ndarray:
    """Elementwise W_x * conj(W_y) on aligned fields."""
    _check_aligned(wx, wy)
    return wx.coeffs * np.conj(wy.coeffs)


def phase_difference(smoothed_cross: np.ndarray) -> np.ndarray:
    """Phase of the smoothed cross spectrum, in [-pi, pi].

    Zero cross power yields phase 0 (flagged degenerate by the caller).
    """
    return np.arctan2(smoothed_cross.imag, smoothed_cross.real)


def coherence(
    wx: CwtField,
    wy: CwtField,
    spec: SmoothingSpec,
    plan: SmoothingPlan | None = None,
) -> CoherenceField:
    """Smoothed wavelet coherence of two aligned transforms."""
    _check_aligned(wx, wy)
    R, phase, sxy, degenerate = _coherence_arrays(
        wx.coeffs, wy.coeffs, wx.grid, spec, plan
    )
    return CoherenceField(
        grid=wx.grid,
        times=wx.times.copy(),
        R=R,
        phase=phase,
        coi_mask=wx.coi_mask | wy.coi_mask,
        degenerate=degenerate,
        smoothed_cross=sxy,
        coi_coefficient=wx.coi_coefficient,
        start=wx.start,
    )


def _coherence_arrays(cx, cy, grid, spec, plan=None):
    """Core coherence computation on raw coefficient matrices."""
    if plan is None:
        plan = SmoothingPlan(grid, cx.shape[1], spec)
    sxy = _smooth_scale(plan.smooth_time(cx * np.conj(cy)), spec.scale_window)
    sxx = _smooth_scale(plan.smooth_time((cx.real**2 + cx.imag**2)), spec.scale_window)
    syy = _smooth_scale(plan.smooth_time((cy.real**2 + cy.imag**2)), spec.scale_window)

    floor_x = DENOMINATOR_FLOOR * max(sxx.max(), 0.0)
    floor_y = DENOMINATOR_FLOOR * max(syy.max(), 0.0)
    cross_mag = np.abs(sxy)
    degenerate = (sxx < floor_x) | (syy < floor_y) | (cross_mag == 0.0)
    denom = np.sqrt(np.maximum(sxx, floor_x) * np.maximum(syy, floor_y))
    with np.errstate(invalid="ignore", divide="ignore"):
        R = cross_mag / denom
    R = np.where(np.isfinite(R), R, 0.0)
    if R.max(initial=0.0) > 1.0 + 1e-9:
        raise ArithmeticError(f"coherence exceeded 1 by {R.max() - 1.0:.3e}")
    R = np.clip(R, 0.0, 1.0)
    phase = phase_difference(sxy)
    phase[degenerate & (cross_mag == 0.0)] = 0.0
    return R, phase, sxy, degenerate


def band_flags(
    field: CoherenceField,
    period_min: float,
    period_max: float,
    p_threshold: float = 0.05,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-month (eligible, significant) flags for a period band.

    A month is eligible when it lies outside the cone of influence at the
    band's longest period; it is significant when some in-band scale is both
    outside the per-cell cone and has p <= p_threshold.
    """
    idx = field.grid.band_indices(period_min, period_max)
    if idx.size == 0:
        raise ValueError(f"band [{period_min}, {period_max}) overlaps no grid period")
    n = field.times.size
    hw = coi_halfwidth(period_max * field.grid.mu_f, field.coi_coefficient)
    t = np.arange(n)
    eligible = ~((t < hw) | ((n - 1 - t) < hw))

    if field.pvals is None:
        significant = np.zeros(n, dtype=bool)
    else:
        ok = (field.pvals[idx] <= p_threshold) & ~field.coi_mask[idx]
        if field.degenerate is not None:
            ok &= ~field.degenerate[idx]
        significant = ok.any(axis=0)
    return eligible, significant


def band_time_lag(
    field: CoherenceField,
    smoothed_cross: np.ndarray,
    period_min: float,
    period_max: float,
    p_threshold: float = 0.05,
) -> tuple[np.ndarray, np.ndarray]:
    """Band lead-lag in months and its reliability mask.

    The lag is phase(band-integrated smoothed cross) / (2 pi F) where F is
    the cross-magnitude-weighted mean frequency over the band. Positive
    values are reported as "y leads x". Months are reliable when eligible and
    significant per :func:`band_flags`; unreliable entries should be excluded
    from any summary of directional dynamics.
    """
    idx = field.grid.band_indices(period_min, period_max)
    if idx.size == 0:
        raise ValueError(f"band [{period_min}, {period_max}) overlaps no grid period")
    sub = smoothed_cross[idx]
    freqs = 1.0 / field.grid.periods[idx]
    mag = np.abs(sub)
    total = mag.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_freq = (freqs[:, None] * mag).sum(axis=0) / total
    band_phase = np.arctan2(sub.imag.sum(axis=0), sub.real.sum(axis=0))
    lag = np.where(total > 0, band_phase / (2.0 * np.pi * mean_freq), 0.0)

    eligible, significant = band_flags(field, period_min, period_max, p_threshold)
    reliable = eligible & significant & (total > 0)
    return lag, reliable
