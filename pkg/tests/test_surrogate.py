import numpy as np
import pytest

from cyclesync.coherence import SmoothingSpec
from cyclesync.cwt import make_scale_grid
from cyclesync.ingest import TimeSeries
from cyclesync.surrogate import SurrogateConfig, coherence_pvalues, fourier_surrogate

from oracles import sample_autocorr


def series(values, name="s"):
    return TimeSeries(name, 0, np.asarray(values, dtype=float))


def ar1(n, rho, seed):
    rng = np.random.default_rng(seed)
    x = np.empty(n)
    x[0] = rng.standard_normal()
    for t in range(1, n):
        x[t] = rho * x[t - 1] + rng.standard_normal() * np.sqrt(1 - rho**2)
    return x


@pytest.fixture(scope="module")
def grid():
    return make_scale_grid(18, 102, voices_per_octave=12)


@pytest.fixture(scope="module")
def spec():
    return SmoothingSpec()


class TestConfig:
    def test_minimum_surrogates(self):
        with pytest.raises(ValueError):
            SurrogateConfig(n_surrogates=10)
        SurrogateConfig(n_surrogates=19)


class TestFourierSurrogate:
    def test_spectrum_preserved_binwise(self):
        rng = np.random.default_rng(0)
        for n in (256, 255):  # even and odd lengths
            x = series(rng.standard_normal(n))
            s = fourier_surrogate(x, np.random.default_rng(1))
            mx = np.abs(np.fft.rfft(x.values))
            ms = np.abs(np.fft.rfft(s.values))
            assert np.allclose(ms, mx, rtol=1e-9)

    def test_mean_preserved(self):
        rng = np.random.default_rng(2)
        x = series(rng.standard_normal(200) + 13.7)
        s = fourier_surrogate(x, rng)
        assert s.values.mean() == pytest.approx(x.values.mean(), abs=1e-9)

    def test_output_is_real_and_different(self):
        x = series(ar1(256, 0.5, 3))
        s = fourier_surrogate(x, np.random.default_rng(4))
        assert s.values.dtype.kind == "f"
        assert not np.allclose(s.values, x.values)

    def test_ar1_autocorrelation_preserved(self):
        # linear structure is preserved: mean surrogate lag-1 autocorrelation
        # stays within 0.1 of the original for a persistent AR(1)
        x = ar1(512, 0.8, 5)
        r_obs = sample_autocorr(x, 1)
        rng = np.random.default_rng(6)
        xs = series(x)
        r_surr = np.mean([sample_autocorr(fourier_surrogate(xs, rng).values, 1)
                          for _ in range(100)])
        assert abs(r_surr - r_obs) < 0.1


class TestCoherencePvalues:
    def test_floor_is_one_over_n_plus_one(self, grid, spec):
        t = np.arange(300, dtype=float)
        common = np.cos(2 * np.pi * t / 36.0)
        rng = np.random.default_rng(7)
        x = series(common + 0.2 * rng.standard_normal(300), "x")
        y = series(common + 0.2 * rng.standard_normal(300), "y")
        cfg = SurrogateConfig(n_surrogates=49, seed=11)
        p = coherence_pvalues(x, y, grid, spec, cfg)
        assert p.min() == pytest.approx(1.0 / 50.0)
        assert p.max() <= 1.0
        assert p.min() >= 1.0 / 50.0 - 1e-12

    def test_deterministic_given_seed(self, grid, spec):
        rng = np.random.default_rng(8)
        x = series(rng.standard_normal(256), "x")
        y = series(rng.standard_normal(256), "y")
        cfg = SurrogateConfig(n_surrogates=29, seed=42)
        p1 = coherence_pvalues(x, y, grid, spec, cfg)
        p2 = coherence_pvalues(x, y, grid, spec, cfg)
        assert np.array_equal(p1, p2)

    def test_coupled_sinusoids_mostly_significant(self, grid, spec):
        # power SNR 2 (unit cosine, noise sd 0.5); median over seeds because
        # single draws near the cone boundary are noisy
        from cyclesync.cwt import coi_mask

        si = int(np.argmin(np.abs(grid.periods - 36.0)))
        outside = ~coi_mask(grid, 420)[si]
        t = np.arange(420, dtype=float)
        common = np.cos(2 * np.pi * t / 36.0)
        fracs = []
        for seed in range(5):
            rng = np.random.default_rng(1000 + seed)
            x = series(common + 0.5 * rng.standard_normal(420), "x")
            y = series(common + 0.5 * rng.standard_normal(420), "y")
            cfg = SurrogateConfig(n_surrogates=99, seed=seed)
            p = coherence_pvalues(x, y, grid, spec, cfg)
            fracs.append(np.mean(p[si, outside] <= 0.05))
        assert float(np.median(fracs)) >= 0.8

    def test_white_noise_calibration(self, grid, spec):
        # reduced version of the acceptance run: the out-of-cone rate of
        # p <= 0.05 stays in a wide band around nominal
        from cyclesync.cwt import coi_mask

        outside = ~coi_mask(grid, 512)
        rates = []
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            x = series(rng.standard_normal(512), "x")
            y = series(rng.standard_normal(512), "y")
            cfg = SurrogateConfig(n_surrogates=99, seed=seed)
            p = coherence_pvalues(x, y, grid, spec, cfg)
            rates.append(np.mean(p[outside] <= 0.05))
        assert 0.005 <= float(np.mean(rates)) <= 0.15

    def test_monotone_under_stronger_coupling(self, grid):
        # more common signal never gives fewer significant in-band cells,
        # allowing sampling noise in 2 of 10 seeds
        spec = SmoothingSpec()
        si_band = grid.band_indices(30, 45)
        violations = 0
        for seed in range(10):
            rng = np.random.default_rng(200 + seed)
            t = np.arange(300, dtype=float)
            common = np.cos(2 * np.pi * t / 36.0)
            nx = rng.standard_normal(300)
            ny = rng.standard_normal(300)
            counts = []
            for amp in (0.4, 1.2):
                x = series(amp * common + nx, "x")
                y = series(amp * common + ny, "y")
                cfg = SurrogateConfig(n_surrogates=29, seed=seed)
                p = coherence_pvalues(x, y, grid, spec, cfg)
                counts.append(int(np.sum(p[si_band] <= 0.05)))
            if counts[1] < counts[0]:
                violations += 1
        assert violations <= 2
