import numpy as np
import pytest

from cyclesync.cwt import (
    CwtField,
    coi_mask,
    cwt_morlet,
    make_scale_grid,
    power,
)
from cyclesync.ingest import TimeSeries

from oracles import quadrature_cwt


def series(values, start=0, name="s"):
    return TimeSeries(name, start, np.asarray(values, dtype=float))


class TestScaleGrid:
    def test_scale_period_factor(self):
        grid = make_scale_grid(18, 54, voices_per_octave=12, eta=6.0)
        factor = 6.0 / (2.0 * np.pi)
        assert factor == pytest.approx(0.954930, abs=1e-6)
        assert np.allclose(grid.scales, grid.periods * factor, rtol=0, atol=0)
        # the identity period = scale / mu_f holds exactly
        assert np.array_equal(grid.periods, grid.scales / grid.mu_f)

    def test_dyadic_doubling(self):
        grid = make_scale_grid(12, 48, voices_per_octave=1)
        assert np.allclose(grid.periods, [12.0, 24.0, 48.0])

    def test_long_band_range(self):
        grid = make_scale_grid(54, 102, voices_per_octave=12)
        assert grid.periods[0] >= 54.0 - 1e-9
        assert grid.periods[-1] <= 102.0 + 1e-9
        assert np.all(np.diff(grid.periods) > 0)

    def test_inverted_bounds(self):
        with pytest.raises(ValueError):
            make_scale_grid(54, 18)
        with pytest.raises(ValueError):
            make_scale_grid(18, 54, voices_per_octave=0)

    def test_band_indices_half_open(self):
        grid = make_scale_grid(12, 48, voices_per_octave=1)
        assert list(grid.periods[grid.band_indices(12, 48)]) == [12.0, 24.0]
        assert list(grid.periods[grid.band_indices(12, 49)]) == [12.0, 24.0, 48.0]


@pytest.fixture(scope="module")
def grid():
    return make_scale_grid(18, 102, voices_per_octave=12)


class TestCwt:
    def test_zero_series(self, grid):
        field = cwt_morlet(series(np.zeros(300)), grid)
        assert np.all(field.coeffs == 0)

    def test_linearity(self, grid):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(300)
        y = rng.standard_normal(300)
        wx = cwt_morlet(series(x), grid).coeffs
        wy = cwt_morlet(series(y), grid).coeffs
        wmix = cwt_morlet(series(2.5 * x - 1.5 * y), grid).coeffs
        scale = np.abs(wmix).max()
        assert np.max(np.abs(wmix - (2.5 * wx - 1.5 * wy))) <= 1e-10 * scale

    def test_scalar_scaling(self, grid):
        x = np.cos(2 * np.pi * np.arange(300) / 30.0)
        w1 = cwt_morlet(series(x), grid).coeffs
        w3 = cwt_morlet(series(3.0 * x), grid).coeffs
        assert np.allclose(w3, 3.0 * w1, rtol=1e-12, atol=1e-12)

    def test_constant_series_is_zero(self, grid):
        field = cwt_morlet(series(np.full(300, 7.0)), grid)
        assert np.max(np.abs(field.coeffs)) <= 1e-10

    def test_cosine_peak_against_quadrature(self, grid):
        t = np.arange(360, dtype=float)
        x = np.cos(2 * np.pi * t / 36.0)
        field = cwt_morlet(series(x), grid)
        mid = 180
        peak_idx = int(np.argmax(np.abs(field.coeffs[:, mid])))
        nearest = int(np.argmin(np.abs(grid.periods - 36.0)))
        assert peak_idx == nearest
        # fft value at the peak matches a direct quadrature of the integral
        oracle = quadrature_cwt(x, grid.scales[peak_idx], mid)
        got = field.coeffs[peak_idx, mid]
        assert abs(got - oracle) <= 1e-9 * abs(oracle)

    def test_quadrature_match_across_scales(self, grid):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(256)
        field = cwt_morlet(series(x), grid)
        norm = np.abs(field.coeffs).max()
        for si in (0, 12, 24, grid.n_scales - 1):
            for tau in (64, 128, 190):
                oracle = quadrature_cwt(x, grid.scales[si], tau)
                assert abs(field.coeffs[si, tau] - oracle) <= 1e-9 * norm

    def test_sinusoid_peak_within_one_voice(self, grid):
        for period in (24.0, 36.0, 60.0):
            t = np.arange(480, dtype=float)
            x = np.cos(2 * np.pi * t / period)
            field = cwt_morlet(series(x), grid)
            peak = grid.periods[np.argmax(power(field)[:, 240])]
            voice_step = 2.0 ** (1.0 / grid.voices_per_octave)
            assert period / voice_step <= peak <= period * voice_step

    def test_short_series_warns(self, grid):
        with pytest.warns(UserWarning, match="twice the"):
            cwt_morlet(series(np.ones(100) + np.arange(100)), grid)


class TestPower:
    def test_modulus_arithmetic(self, grid):
        coeffs = np.full((grid.n_scales, 4), 3.0 + 4.0j)
        field = CwtField(grid=grid, times=np.arange(4), coeffs=coeffs,
                         coi_mask=np.zeros((grid.n_scales, 4), dtype=bool))
        assert np.allclose(power(field), 25.0)

    def test_quadratic_scaling(self, grid):
        x = np.cos(2 * np.pi * np.arange(300) / 40.0)
        p1 = power(cwt_morlet(series(x), grid))
        p2 = power(cwt_morlet(series(2.0 * x), grid))
        assert np.allclose(p2, 4.0 * p1, rtol=1e-10, atol=1e-12)


class TestCoi:
    def test_efolding_halfwidth_masks_ten_months(self):
        # a scale whose half-width is exactly 10 months masks 10 at each end
        target_scale = 10.0 / np.sqrt(2.0)
        grid = make_scale_grid(target_scale / (6.0 / (2 * np.pi)), 30.0, 1)
        assert grid.scales[0] == pytest.approx(target_scale)
        mask = coi_mask(grid, 100)
        assert mask[0, :10].all() and not mask[0, 10]
        assert mask[0, -10:].all() and not mask[0, -11]

    def test_short_series_fully_masked_at_large_scale(self):
        grid = make_scale_grid(18, 102, 12)
        hw = np.sqrt(2.0) * grid.scales[-1]
        mask = coi_mask(grid, int(hw))  # shorter than twice the half-width
        assert mask[-1].all()

    def test_monotone_in_scale(self):
        grid = make_scale_grid(18, 102, 12)
        mask = coi_mask(grid, 400)
        counts = mask.sum(axis=1)
        assert np.all(np.diff(counts) >= 0)
        # smallest scale masks the fewest time points
        assert counts[0] == counts.min()

    def test_symmetric(self):
        grid = make_scale_grid(18, 102, 12)
        mask = coi_mask(grid, 301)
        assert np.array_equal(mask, mask[:, ::-1])

    def test_first_last_always_masked(self):
        grid = make_scale_grid(18, 102, 12)
        mask = coi_mask(grid, 50)
        assert mask[:, 0].all() and mask[:, -1].all()


def test_dump_roundtrip(tmp_path):
    import pandas as pd
    from cyclesync.cwt import dump_cwt_field

    grid = make_scale_grid(18, 36, voices_per_octave=2)
    x = np.cos(2 * np.pi * np.arange(120) / 24.0)
    field = cwt_morlet(series(x), grid)
    path = tmp_path / "cwt.csv"
    dump_cwt_field(field, path, meta=["note: test"])
    df = pd.read_csv(path, comment="#")
    assert list(df.columns) == ["scale", "period", "time", "re", "im", "coi"]
    assert len(df) == grid.n_scales * 120
    got = df["re"].to_numpy().reshape(grid.n_scales, 120)
    assert np.allclose(got, field.coeffs.real, atol=1e-9)
