"""Annual dyad-year in-phase synchronization index.

Monthly band coherence averages R over in-band scales with inverse-period
weights (so long cycles do not mechanically dominate the band mean). A month
counts as significant when any in-band scale is jointly significant and
outside the cone of influence; eligibility is decided by the cone at the
band's longest period. The annual index is the eligible-month mean of
indicator * coherence, equal to share * mean coherence among significant
months. Years with fewer than 9 total or 6 eligible months are dropped as
coverage artifacts; an eligible year with no significant month is a
structural zero and is retained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .coherence import CoherenceField, band_flags

MIN_TOTAL_MONTHS = 9
MIN_ELIGIBLE_MONTHS = 6


@dataclass(frozen=True)
class BandSpec:
    """Half-open period band [period_min, period_max) in months."""

    name: str
    period_min: float
    period_max: float

    def __post_init__(self):
        if not 0 < self.period_min < self.period_max:
            raise ValueError(f"invalid band bounds {self.period_min}, {self.period_max}")


#: Default bands: 1.5-4.5 years and 4.5-8.5 years. Half-open intervals keep
#: the shared 4.5-year boundary from being double counted.
SHORT_BAND = BandSpec("short", 18.0, 54.0)
LONG_BAND = BandSpec("long", 54.0, 102.0)


@dataclass(frozen=True)
class DyadYearSync:
    dyad_id: str
    year: int
    band: str
    sync: float
    share: float
    mean_coh: float
    n_total_months: int
    n_eligible_months: int
    dropped: bool
    drop_reason: str = ""


def band_weights(periods: np.ndarray) -> np.ndarray:
    """Inverse-period weights normalized to sum one."""
    periods = np.asarray(periods, dtype=float)
    if periods.size == 0:
        raise ValueError("empty band")
    w = 1.0 / periods
    return w / w.sum()


def monthly_band_coherence(
    field: CoherenceField,
    band: BandSpec,
    p_threshold: float = 0.05,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-month (C, eligible, significant) for one band.

    C is the inverse-period weighted mean of R over in-band scales, with
    degenerate cells excluded from the average (a fully degenerate column
    yields C = 0).
    """
    idx = field.grid.band_indices(band.period_min, band.period_max)
    if idx.size == 0:
        raise ValueError(f"band {band.name!r} overlaps no grid period")
    w = band_weights(field.grid.periods[idx])
    sub = field.R[idx]
    if field.degenerate is not None and field.degenerate[idx].any():
        good = ~field.degenerate[idx]
        weights = w[:, None] * good
        denom = weights.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = (weights * sub).sum(axis=0) / denom
        c = np.where(denom > 0, c, 0.0)
    else:
        c = w @ sub
    eligible, significant = band_flags(field, band.period_min, band.period_max, p_threshold)
    return c, eligible, significant


def annual_sync(
    dyad_id: str,
    year: int,
    band: str,
    c: np.ndarray,
    eligible: np.ndarray,
    significant: np.ndarray,
    min_total_months: int = MIN_TOTAL_MONTHS,
    min_eligible_months: int = MIN_ELIGIBLE_MONTHS,
) -> DyadYearSync:
    """Aggregate one calendar year of monthly values into a DyadYearSync.

    ``sync`` is defined as share * mean_coh so the decomposition identity is
    exact; it equals the eligible-month mean of indicator * coherence.
    """
    n_total = int(c.size)
    elig = np.asarray(eligible, dtype=bool)
    sig = np.asarray(significant, dtype=bool) & elig
    n_eligible = int(elig.sum())
    n_sig = int(sig.sum())

    reasons = []
    if n_total < min_total_months:
        reasons.append(f"total_months<{min_total_months}")
    if n_eligible < min_eligible_months:
        reasons.append(f"eligible_months<{min_eligible_months}")
    if reasons:
        return DyadYearSync(dyad_id, year, band, np.nan, np.nan, np.nan,
                            n_total, n_eligible, True, ";".join(reasons))

    if n_sig == 0:
        share, mean_coh, sync = 0.0, 0.0, 0.0  # structural zero, retained
    else:
        share = n_sig / n_eligible
        mean_coh = float(np.mean(c[sig]))
        sync = share * mean_coh
    return DyadYearSync(dyad_id, year, band, sync, share, mean_coh,
                        n_total, n_eligible, False, "")


def dyad_year_sync(
    field: CoherenceField,
    band: BandSpec,
    dyad_id: str,
    p_threshold: float = 0.05,
    min_total_months: int = MIN_TOTAL_MONTHS,
    min_eligible_months: int = MIN_ELIGIBLE_MONTHS,
    year_offset: int = 0,
) -> list[DyadYearSync]:
    """Split a coherence field into calendar years and aggregate each.

    ``year_offset`` shifts the year boundary (0 = January-December years);
    robustness checks can re-aggregate on shifted years.
    """
    c, eligible, significant = monthly_band_coherence(field, band, p_threshold)
    months = field.start + field.times
    years = (months - year_offset) // 12
    out = []
    for yr in np.unique(years):
        sel = years == yr
        out.append(
            annual_sync(
                dyad_id, int(yr), band.name,
                c[sel], eligible[sel], significant[sel],
                min_total_months, min_eligible_months,
            )
        )
    return out


def sync_records_frame(records: list[DyadYearSync]) -> pd.DataFrame:
    """Tabulate records with the output CSV column layout."""
    rows = []
    for r in records:
        iso_a, _, iso_b = r.dyad_id.partition("-")
        rows.append(
            {
                "dyad": r.dyad_id,
                "iso_a": iso_a,
                "iso_b": iso_b,
                "year": r.year,
                "band": r.band,
                "sync": r.sync,
                "share": r.share,
                "mean_coh": r.mean_coh,
                "n_total": r.n_total_months,
                "n_eligible": r.n_eligible_months,
                "dropped": int(r.dropped),
                "drop_reason": r.drop_reason,
            }
        )
    return pd.DataFrame(rows)
