import numpy as np
import pytest

from cyclesync.coherence import (
    SmoothingSpec,
    band_time_lag,
    coherence,
    cross_wavelet,
    phase_difference,
    smooth,
)
from cyclesync.cwt import cwt_morlet, make_scale_grid, power
from cyclesync.errors import AlignmentError
from cyclesync.ingest import TimeSeries

from oracles import direct_time_smooth, shifted_cosine_phase


def series(values, name="s"):
    return TimeSeries(name, 0, np.asarray(values, dtype=float))


@pytest.fixture(scope="module")
def grid():
    return make_scale_grid(18, 102, voices_per_octave=12)


@pytest.fixture(scope="module")
def spec():
    return SmoothingSpec()


class TestSmoothingSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SmoothingSpec(time_bandwidth=0.0)
        with pytest.raises(ValueError):
            SmoothingSpec(scale_window=2)


class TestSmooth:
    def test_constant_unchanged(self, grid, spec):
        mat = np.full((grid.n_scales, 120), 3.25)
        out = smooth(mat, grid, spec)
        assert np.allclose(out, 3.25, atol=1e-12)

    def test_impulse_matches_direct_convolution(self, grid):
        spec1 = SmoothingSpec(time_bandwidth=0.6, scale_window=1)
        mat = np.zeros((grid.n_scales, 200))
        mat[:, 97] = 1.0
        out = smooth(mat, grid, spec1)
        for si in (0, 15, grid.n_scales - 1):
            sigma = 0.6 * grid.scales[si]
            oracle = direct_time_smooth(mat[si], sigma)
            assert np.allclose(out[si], oracle, atol=1e-10)

    def test_degenerate_spec_is_identity(self, grid):
        spec0 = SmoothingSpec(time_bandwidth=1e-9, scale_window=1)
        rng = np.random.default_rng(0)
        mat = rng.standard_normal((grid.n_scales, 150))
        out = smooth(mat, grid, spec0)
        assert np.allclose(out, mat, atol=1e-9)

    def test_complex_input(self, grid, spec):
        rng = np.random.default_rng(1)
        mat = rng.standard_normal((grid.n_scales, 90)) + 1j * rng.standard_normal(
            (grid.n_scales, 90)
        )
        out = smooth(mat, grid, spec)
        assert np.allclose(smooth(mat.real, grid, spec), out.real, atol=1e-10)
        assert np.allclose(smooth(mat.imag, grid, spec), out.imag, atol=1e-10)


class TestCrossWavelet:
    def test_self_cross_is_power(self, grid):
        rng = np.random.default_rng(2)
        w = cwt_morlet(series(rng.standard_normal(256)), grid)
        xw = cross_wavelet(w, w)
        assert np.max(np.abs(xw.imag)) <= 1e-15 * xw.real.max()
        assert np.allclose(xw.real, power(w))

    def test_conjugate_symmetry(self, grid):
        rng = np.random.default_rng(3)
        wx = cwt_morlet(series(rng.standard_normal(256)), grid)
        wy = cwt_morlet(series(rng.standard_normal(256)), grid)
        assert np.allclose(cross_wavelet(wx, wy), np.conj(cross_wavelet(wy, wx)))

    def test_grid_mismatch(self, grid):
        other = make_scale_grid(18, 54, voices_per_octave=12)
        wx = cwt_morlet(series(np.random.default_rng(0).standard_normal(256)), grid)
        wy = cwt_morlet(series(np.random.default_rng(0).standard_normal(256)), other)
        with pytest.raises(AlignmentError):
            cross_wavelet(wx, wy)

    def test_shifted_cosine_phase_sign(self, grid, spec):
        # documented convention: a delayed second series gives positive phase,
        # reported as "y leads x" following the verbal lead-lag rule
        t = np.arange(360, dtype=float)
        delay = 3.0
        x = np.cos(2 * np.pi * t / 36.0)
        y = np.cos(2 * np.pi * (t - delay) / 36.0)
        field = coherence(cwt_morlet(series(x), grid), cwt_morlet(series(y), grid), spec)
        si = int(np.argmin(np.abs(grid.periods - 36.0)))
        expected = shifted_cosine_phase(36.0, delay)
        assert field.phase[si, 180] == pytest.approx(expected, abs=0.01)
        assert expected > 0


class TestCoherence:
    def test_self_coherence_is_one(self, grid, spec):
        rng = np.random.default_rng(4)
        w = cwt_morlet(series(rng.standard_normal(400)), grid)
        f = coherence(w, w, spec)
        good = ~f.degenerate
        assert np.all(f.R[good] >= 1.0 - 1e-9)

    def test_no_smoothing_gives_unit_coherence(self, grid):
        # degenerate smoothing makes the normalization exact for any inputs
        spec0 = SmoothingSpec(time_bandwidth=1e-9, scale_window=1)
        rng = np.random.default_rng(5)
        wx = cwt_morlet(series(rng.standard_normal(300)), grid)
        wy = cwt_morlet(series(rng.standard_normal(300)), grid)
        f = coherence(wx, wy, spec0)
        assert np.all(f.R[~f.degenerate] >= 1.0 - 1e-9)

    def test_white_noise_median_below_self(self, grid, spec):
        # Monte-Carlo oracle: with the default smoothing widths, independent
        # white noise keeps median out-of-cone coherence near 0.8, well below
        # the identical-series value of 1
        meds = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            wx = cwt_morlet(series(rng.standard_normal(512)), grid)
            wy = cwt_morlet(series(rng.standard_normal(512)), grid)
            f = coherence(wx, wy, spec)
            meds.append(np.median(f.R[~f.coi_mask]))
        med = float(np.median(meds))
        assert med < 0.9
        assert med < 0.999  # far below the identical-series case

    def test_symmetry_and_phase_antisymmetry(self, grid, spec):
        rng = np.random.default_rng(6)
        wx = cwt_morlet(series(rng.standard_normal(300)), grid)
        wy = cwt_morlet(series(rng.standard_normal(300)), grid)
        fxy = coherence(wx, wy, spec)
        fyx = coherence(wy, wx, spec)
        assert np.max(np.abs(fxy.R - fyx.R)) <= 1e-12
        ok = ~(fxy.degenerate | fyx.degenerate)
        assert np.max(np.abs(fxy.phase[ok] + fyx.phase[ok])) <= 1e-9

    def test_affine_invariance(self, grid, spec):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(300)
        y = rng.standard_normal(300)
        f1 = coherence(cwt_morlet(series(x), grid), cwt_morlet(series(y), grid), spec)
        f2 = coherence(
            cwt_morlet(series(5.0 * x + 11.0), grid), cwt_morlet(series(y), grid), spec
        )
        assert np.max(np.abs(f1.R - f2.R)) <= 1e-9

    def test_r_in_unit_interval(self, grid, spec):
        rng = np.random.default_rng(8)
        wx = cwt_morlet(series(rng.standard_normal(256)), grid)
        wy = cwt_morlet(series(rng.standard_normal(256)), grid)
        f = coherence(wx, wy, spec)
        assert f.R.min() >= 0.0 and f.R.max() <= 1.0


class TestPhaseDifference:
    def test_in_phase(self, grid, spec):
        x = np.cos(2 * np.pi * np.arange(360) / 36.0)
        w = cwt_morlet(series(x), grid)
        f = coherence(w, w, spec)
        si = int(np.argmin(np.abs(grid.periods - 36.0)))
        assert abs(f.phase[si, 180]) <= 1e-9

    def test_antiphase(self, grid, spec):
        t = np.arange(360, dtype=float)
        x = np.cos(2 * np.pi * t / 36.0)
        f = coherence(cwt_morlet(series(x), grid), cwt_morlet(series(-x), grid), spec)
        si = int(np.argmin(np.abs(grid.periods - 36.0)))
        assert abs(f.phase[si, 180]) == pytest.approx(np.pi, abs=1e-6)

    def test_quarter_period_lead_label(self, grid, spec):
        # directed-lag convention test: the configuration labeled "y leads"
        # (second series shifted right by a quarter period) gives +pi/2
        t = np.arange(360, dtype=float)
        x = np.cos(2 * np.pi * t / 36.0)
        y = np.cos(2 * np.pi * (t - 9.0) / 36.0)
        f = coherence(cwt_morlet(series(x), grid), cwt_morlet(series(y), grid), spec)
        si = int(np.argmin(np.abs(grid.periods - 36.0)))
        assert f.phase[si, 180] == pytest.approx(np.pi / 2.0, abs=0.02)

    def test_zero_cross_power_is_zero_phase(self):
        out = phase_difference(np.zeros((3, 4), dtype=complex))
        assert np.all(out == 0.0)


class TestBandTimeLag:
    def test_zero_phase_zero_lag(self, grid, spec):
        x = np.cos(2 * np.pi * np.arange(360) / 36.0)
        w = cwt_morlet(series(x), grid)
        f = coherence(w, w, spec)
        lag, _ = band_time_lag(f, f.smoothed_cross, 18, 54)
        assert np.max(np.abs(lag[100:260])) <= 1e-9

    def test_constructed_shift_recovered(self, grid, spec):
        t = np.arange(420, dtype=float)
        delay = 3.0
        x = np.cos(2 * np.pi * t / 36.0)
        y = np.cos(2 * np.pi * (t - delay) / 36.0)
        f = coherence(cwt_morlet(series(x), grid), cwt_morlet(series(y), grid), spec)
        lag, _ = band_time_lag(f, f.smoothed_cross, 18, 54)
        center = lag[150:270]
        assert np.median(center) == pytest.approx(delay, abs=max(1.0, 0.1 * delay))
        assert np.median(center) > 0  # positive = "y leads" label

    def test_reliability_requires_pvals(self, grid, spec):
        rng = np.random.default_rng(9)
        wx = cwt_morlet(series(rng.standard_normal(300)), grid)
        wy = cwt_morlet(series(rng.standard_normal(300)), grid)
        f = coherence(wx, wy, spec)
        _, reliable = band_time_lag(f, f.smoothed_cross, 18, 54)
        assert not reliable.any()  # no p-values -> nothing reliable
        f2 = f.with_pvals(np.full_like(f.R, 0.01))
        _, reliable2 = band_time_lag(f2, f2.smoothed_cross, 18, 54)
        assert reliable2.any()

    def test_empty_band_is_error(self, grid, spec):
        x = np.cos(2 * np.pi * np.arange(300) / 36.0)
        w = cwt_morlet(series(x), grid)
        f = coherence(w, w, spec)
        with pytest.raises(ValueError):
            band_time_lag(f, f.smoothed_cross, 200.0, 300.0)
