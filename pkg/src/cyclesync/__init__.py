"""Time-frequency business-cycle synchronization toolkit.

Pipeline stages:

1. ``ingest``     -- monthly activity panels, covariate panels, dyad covariates
2. ``cwt``        -- continuous Morlet wavelet transform and cone of influence
3. ``coherence``  -- cross-wavelet, smoothing, coherence, phase, band time lags
4. ``surrogate``  -- phase-randomized surrogates and pointwise significance
5. ``syncindex``  -- annual dyad-year in-phase synchronization index
6. ``panel``      -- regression dataset assembly (within/between decomposition)
7. ``zib``        -- Bayesian zero-inflated beta regression (NUTS, LOO)
8. ``synth``      -- synthetic-data generators used as test oracles
9. ``cli``        -- batch command line front end
"""

__version__ = "0.1.0"

from .cwt import ScaleGrid, CwtField, make_scale_grid, cwt_morlet, power, coi_mask
from .coherence import SmoothingSpec, CoherenceField, cross_wavelet, smooth, coherence
from .ingest import TimeSeries, load_monthly_panel, build_benchmark
from .syncindex import BandSpec, DyadYearSync

__all__ = [
    "__version__",
    "ScaleGrid",
    "CwtField",
    "make_scale_grid",
    "cwt_morlet",
    "power",
    "coi_mask",
    "SmoothingSpec",
    "CoherenceField",
    "cross_wavelet",
    "smooth",
    "coherence",
    "TimeSeries",
    "load_monthly_panel",
    "build_benchmark",
    "BandSpec",
    "DyadYearSync",
]
