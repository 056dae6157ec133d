"""Posterior summary table with credible-interval stars.

Stars mark the widest nominal central interval excluding zero: * for 90%,
** for 95%, *** for 99%. They are interval statements, not p-values.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .sampler import PosteriorDraws

_STAR_LEVELS = (("***", 0.99), ("**", 0.95), ("*", 0.90))


def interval_stars(samples: np.ndarray) -> str:
    for stars, level in _STAR_LEVELS:
        alpha = (1.0 - level) / 2.0
        lo, hi = np.quantile(samples, [alpha, 1.0 - alpha])
        if lo > 0.0 or hi < 0.0:
            return stars
    return ""


def summarize(draws: PosteriorDraws, which: list[str] | None = None) -> pd.DataFrame:
    """Posterior mean, 95% interval, stars, and diagnostics per parameter.

    By default summarizes the population-level parameters (intercepts and
    coefficients), mirroring the regression table layout.
    """
    flat = draws.flat()
    if which is None:
        n_pop = 3 + draws.layout.p_mu + draws.layout.p_zi + draws.layout.p_phi
        which = draws.param_names[:n_pop]
    rows = []
    for name in which:
        i = draws.param_names.index(name)
        s = flat[:, i]
        lo, hi = np.quantile(s, [0.025, 0.975])
        rows.append(
            {
                "parameter": name,
                "estimate": float(s.mean()),
                "lower": float(lo),
                "upper": float(hi),
                "stars": interval_stars(s),
                "rhat": float(draws.rhat[i]),
                "ess_bulk": float(draws.ess_bulk[i]),
            }
        )
    return pd.DataFrame(rows)
