"""Input panels: monthly activity series, annual covariates, dyad covariates.

CSV schemas (all files may carry ``#``-prefixed header comment lines):

* monthly panel:   ``entity,date,value`` with ``date`` as ``YYYY-MM``
* covariate panel: wide format ``country,year,<field>...`` (see COVARIATE_FIELDS)
* bilateral trade: ``reporter,partner,year,exports,imports``
* membership:      ``country,eu_from_year,emu_from_year`` (blank = never in-sample)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    AlignmentError,
    CoverageError,
    DuplicateRowError,
    GapError,
    SchemaError,
    WeightError,
)

_YM_RE = re.compile(r"^(\d{4})-(\d{2})$")


def parse_ym(text: str) -> int:
    """Parse ``YYYY-MM`` into a month index (year * 12 + month - 1)."""
    m = _YM_RE.match(str(text).strip())
    if not m:
        raise SchemaError(f"bad date {text!r}, expected YYYY-MM")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise SchemaError(f"bad month in date {text!r}")
    return year * 12 + (month - 1)


def format_ym(index: int) -> str:
    return f"{index // 12:04d}-{index % 12 + 1:02d}"


def year_of(index: int) -> int:
    return index // 12


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly monthly-sampled real series for one entity.

    ``start`` is a month index (see :func:`parse_ym`); ``values[t]`` is the
    observation for month ``start + t``. Contiguity is guaranteed at load.
    """

    entity_id: str
    start: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError(f"series {self.entity_id!r} needs >= 2 monthly values")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"series {self.entity_id!r} has non-finite values")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def end(self) -> int:
        """Month index of the last observation."""
        return self.start + self.n - 1

    def month_indices(self) -> np.ndarray:
        return self.start + np.arange(self.n)


DEFAULT_MONTHLY_SCHEMA = {"entity": "entity", "date": "date", "value": "value"}


def load_monthly_panel(path, schema: Mapping[str, str] | None = None) -> dict[str, TimeSeries]:
    """Load a monthly panel CSV into one contiguous TimeSeries per entity.

    Raises SchemaError on missing columns, DuplicateRowError on repeated
    (entity, month) rows and GapError (naming entity and month) on internal
    gaps.
    """
    cols = dict(DEFAULT_MONTHLY_SCHEMA)
    if schema:
        cols.update(schema)
    df = pd.read_csv(path, comment="#", dtype=str)
    missing = [c for c in cols.values() if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}, found {list(df.columns)}")

    out: dict[str, TimeSeries] = {}
    df = df.rename(columns={v: k for k, v in cols.items()})
    for entity, grp in df.groupby("entity", sort=True):
        months = np.array([parse_ym(d) for d in grp["date"]])
        values = pd.to_numeric(grp["value"], errors="raise").to_numpy(dtype=float)
        order = np.argsort(months, kind="stable")
        months, values = months[order], values[order]
        dup = np.flatnonzero(np.diff(months) == 0)
        if dup.size:
            raise DuplicateRowError(
                f"duplicate observation for ({entity}, {format_ym(int(months[dup[0]]))})"
            )
        holes = np.flatnonzero(np.diff(months) > 1)
        if holes.size:
            missing_month = int(months[holes[0]]) + 1
            raise GapError(f"series {entity!r} missing month {format_ym(missing_month)}")
        out[str(entity)] = TimeSeries(str(entity), int(months[0]), values)
    return out


def build_benchmark(
    series: Mapping[str, TimeSeries],
    weights: Mapping[str, float],
    entity_id: str = "BENCHMARK",
) -> TimeSeries:
    """Weighted per-month mean of aligned member series.

    Weights are normalized to sum one; members must share the same span.
    """
    if not series:
        raise ValueError("no member series")
    members = sorted(series)
    missing = [m for m in members if m not in weights]
    if missing:
        raise WeightError(f"weights missing for member(s) {missing}")
    ref = series[members[0]]
    for m in members[1:]:
        s = series[m]
        if s.start != ref.start or s.n != ref.n:
            raise AlignmentError(
                f"member {m!r} spans {format_ym(s.start)}..{format_ym(s.end)}, "
                f"expected {format_ym(ref.start)}..{format_ym(ref.end)}"
            )
    w = np.array([float(weights[m]) for m in members])
    if np.any(w < 0):
        raise WeightError("negative benchmark weight")
    total = w.sum()
    if total <= 0:
        raise WeightError("benchmark weights sum to zero")
    w = w / total
    stacked = np.stack([series[m].values for m in members])
    return TimeSeries(entity_id, ref.start, w @ stacked)


def transform_series(ts: TimeSeries, how: str) -> TimeSeries:
    """Optional pre-transform before the wavelet stage: none | log | log-diff."""
    if how == "none":
        return ts
    if how == "log":
        if np.any(ts.values <= 0):
            raise ValueError(f"log transform needs positive values ({ts.entity_id})")
        return replace(ts, values=np.log(ts.values))
    if how == "log-diff":
        if np.any(ts.values <= 0):
            raise ValueError(f"log-diff transform needs positive values ({ts.entity_id})")
        return TimeSeries(ts.entity_id, ts.start + 1, np.diff(np.log(ts.values)))
    raise ValueError(f"unknown transform {how!r}")


def interpolate_covariate(values: Sequence[float | None], max_gap: int = 5) -> np.ndarray:
    """Fill internal missing runs of length <= max_gap by linear interpolation.

    Input covers consecutive years; missing entries may be None or NaN.
    Longer runs and leading/trailing missing stay missing (no extrapolation).
    Idempotent.
    """
    arr = np.array([np.nan if v is None else float(v) for v in values], dtype=float)
    isnan = np.isnan(arr)
    if not isnan.any() or isnan.all():
        return arr
    obs = np.flatnonzero(~isnan)
    out = arr.copy()
    for left, right in zip(obs[:-1], obs[1:]):
        gap = right - left - 1
        if 0 < gap <= max_gap:
            out[left + 1 : right] = np.interp(
                np.arange(left + 1, right), [left, right], [arr[left], arr[right]]
            )
    return out


# ---------------------------------------------------------------------------
# Annual covariates
# ---------------------------------------------------------------------------

#: Wide covariate CSV columns next to ``country`` and ``year``.
COVARIATE_FIELDS = (
    "gdp",
    "ext_assets",
    "ext_liabilities",
    "govt_exp",
    "inflation",
    "share_agriculture",
    "share_industry",
    "share_services",
    "capital_pc",
    "urban",
    "remittances",
    "liquid_liab",
    "fsd_dep",
    "bank_dep",
)

_SECTOR_FIELDS = ("share_agriculture", "share_industry", "share_services")


def normalize_sector_shares(shares: Sequence[float]) -> np.ndarray:
    """Renormalize nonnegative sectoral shares to sum exactly one."""
    arr = np.asarray(shares, dtype=float)
    if np.any(arr < 0):
        raise ValueError(f"negative sectoral share in {arr}")
    total = arr.sum()
    if total <= 0:
        raise ValueError("sectoral shares sum to zero")
    return arr / total


@dataclass
class CountryYearCovariates:
    """One country-year of regressor inputs; unknown fields are None/NaN."""

    country: str
    year: int
    gdp: float | None = None
    ext_assets: float | None = None
    ext_liabilities: float | None = None
    govt_exp: float | None = None
    inflation: float | None = None
    sector_shares: np.ndarray | None = None  # renormalized, sums to 1
    capital_pc: float | None = None
    urban: float | None = None
    remittances: float | None = None
    liquid_liab: float | None = None
    fsd_dep: float | None = None
    bank_dep: float | None = None
    eu: bool = False
    emu: bool = False
    exports: dict[str, float] = field(default_factory=dict)
    imports: dict[str, float] = field(default_factory=dict)


def load_covariate_panel(
    path,
    percent_columns: Iterable[str] = (),
    max_gap: int = 5,
) -> dict[tuple[str, int], CountryYearCovariates]:
    """Load the wide country-year covariate CSV.

    ``percent_columns`` are divided by 100 (explicit flag, no auto-detection).
    Internal gaps up to ``max_gap`` years are linearly interpolated per
    country and column; sectoral shares are renormalized to sum one.
    """
    df = pd.read_csv(path, comment="#")
    for c in ("country", "year"):
        if c not in df.columns:
            raise SchemaError(f"{path}: missing column {c!r}")
    known = [c for c in COVARIATE_FIELDS if c in df.columns]
    bad_pct = sorted(set(percent_columns) - set(known))
    if bad_pct:
        raise SchemaError(f"percent_columns not in file: {bad_pct}")
    df = df.copy()
    df["year"] = df["year"].astype(int)
    for c in percent_columns:
        df[c] = df[c] / 100.0

    out: dict[tuple[str, int], CountryYearCovariates] = {}
    for country, grp in df.groupby("country", sort=True):
        grp = grp.sort_values("year")
        years = grp["year"].to_numpy()
        if len(years) != len(set(years)):
            raise DuplicateRowError(f"duplicate covariate year for {country}")
        full = np.arange(years.min(), years.max() + 1)
        filled = {}
        for c in known:
            dense = np.full(full.size, np.nan)
            dense[np.searchsorted(full, years)] = grp[c].to_numpy(dtype=float)
            filled[c] = interpolate_covariate(dense, max_gap=max_gap)
        for i, yr in enumerate(full):
            rec = CountryYearCovariates(country=str(country), year=int(yr))
            for c in known:
                v = filled[c][i]
                if c in _SECTOR_FIELDS:
                    continue
                setattr(rec, c, None if np.isnan(v) else float(v))
            shares = np.array([filled[c][i] for c in _SECTOR_FIELDS if c in filled])
            if shares.size == len(_SECTOR_FIELDS) and not np.any(np.isnan(shares)):
                rec.sector_shares = normalize_sector_shares(shares)
            out[(str(country), int(yr))] = rec
    return out


def load_covariate_long(
    panel: dict[tuple[str, int], CountryYearCovariates],
    path,
    field: str,
    percent: bool = False,
    max_gap: int = 5,
) -> None:
    """Merge one long-format covariate file (country,year,value) into a panel.

    Complements the wide loader for sources exported one indicator per file.
    Interpolation and percent conversion match :func:`load_covariate_panel`.
    """
    if field not in COVARIATE_FIELDS or field in _SECTOR_FIELDS:
        raise SchemaError(f"unsupported long-format field {field!r}")
    df = pd.read_csv(path, comment="#")
    for c in ("country", "year", "value"):
        if c not in df.columns:
            raise SchemaError(f"{path}: missing column {c!r}")
    for country, grp in df.groupby("country", sort=True):
        grp = grp.sort_values("year")
        years = grp["year"].astype(int).to_numpy()
        full = np.arange(years.min(), years.max() + 1)
        dense = np.full(full.size, np.nan)
        dense[np.searchsorted(full, years)] = grp["value"].to_numpy(dtype=float)
        if percent:
            dense = dense / 100.0
        filled = interpolate_covariate(dense, max_gap=max_gap)
        for yr, val in zip(full, filled):
            if np.isnan(val):
                continue
            rec = panel.setdefault(
                (str(country), int(yr)), CountryYearCovariates(str(country), int(yr))
            )
            setattr(rec, field, float(val))


def load_trade(path) -> dict[tuple[str, str, int], tuple[float, float]]:
    """Load bilateral trade flows keyed by (reporter, partner, year)."""
    df = pd.read_csv(path, comment="#")
    needed = ("reporter", "partner", "year", "exports", "imports")
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}")
    out = {}
    for row in df.itertuples(index=False):
        key = (str(row.reporter), str(row.partner), int(row.year))
        if key in out:
            raise DuplicateRowError(f"duplicate trade row {key}")
        out[key] = (float(row.exports), float(row.imports))
    return out


def attach_trade(
    panel: dict[tuple[str, int], CountryYearCovariates],
    trade: Mapping[tuple[str, str, int], tuple[float, float]],
) -> None:
    """Fill per-partner export/import dicts on the covariate panel, in place."""
    for (reporter, partner, yr), (exp, imp) in trade.items():
        rec = panel.get((reporter, yr))
        if rec is not None:
            rec.exports[partner] = exp
            rec.imports[partner] = imp


def load_membership(path) -> dict[str, tuple[int | None, int | None]]:
    """Load accession calendar: country -> (eu_from_year, emu_from_year)."""
    df = pd.read_csv(path, comment="#", dtype={"country": str})
    needed = ("country", "eu_from_year", "emu_from_year")
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}")

    def _year(v):
        return None if pd.isna(v) else int(v)

    out = {}
    for row in df.itertuples(index=False):
        eu, emu = _year(row.eu_from_year), _year(row.emu_from_year)
        if eu is not None and emu is not None and emu < eu:
            raise SchemaError(f"{row.country}: euro adoption before EU accession")
        out[str(row.country)] = (eu, emu)
    return out


def apply_membership(
    panel: dict[tuple[str, int], CountryYearCovariates],
    membership: Mapping[str, tuple[int | None, int | None]],
) -> None:
    """Set EU/EMU flags on the covariate panel, in place.

    Accession is permanent in-sample, so flags are monotone over years.
    """
    for (country, yr), rec in panel.items():
        eu_from, emu_from = membership.get(country, (None, None))
        rec.eu = eu_from is not None and yr >= eu_from
        rec.emu = emu_from is not None and yr >= emu_from


@dataclass(frozen=True)
class DyadCovariates:
    """Dyad-year regression inputs. The dyad is unordered: countries are held
    in lexicographic order, so building from (a, b) or (b, a) is identical."""

    country_a: str
    country_b: str
    year: int
    trade_intensity: float
    fin_open: float
    d_eu_not_emu: int
    d_emu: int
    fiscal_gap: float
    inflation_gap: float
    spec_distance: float
    capital_gap: float
    urban_gap: float
    remit_gap: float
    liquid_gap: float
    fsd_gap: float
    bankdep_gap: float

    def __post_init__(self):
        if self.country_a >= self.country_b:
            raise ValueError("dyad countries must be in sorted order")
        if self.d_eu_not_emu * self.d_emu != 0:
            raise ValueError("membership dummies are mutually exclusive")

    @property
    def dyad_id(self) -> str:
        return f"{self.country_a}-{self.country_b}"


def _require(rec: CountryYearCovariates, fields: Sequence[str]) -> None:
    missing = [f for f in fields if getattr(rec, f) is None]
    if missing:
        raise CoverageError(f"{rec.country} {rec.year}: missing field(s) {missing}")


def build_dyad_covariates(
    cov_a: CountryYearCovariates, cov_b: CountryYearCovariates
) -> DyadCovariates:
    """Construct one dyad-year of covariates from two country-year records.

    Trade intensity scales two-way trade by joint GDP; financial openness sums
    external assets plus liabilities over GDP for both; gaps are absolute
    differences; specialization distance is the L1 distance between sectoral
    share vectors. The pair is canonicalized so the result is orientation-free.
    """
    if cov_a.year != cov_b.year:
        raise AlignmentError(f"year mismatch {cov_a.year} vs {cov_b.year}")
    if cov_a.country == cov_b.country:
        raise ValueError("dyad needs two distinct countries")
    a, b = sorted((cov_a, cov_b), key=lambda r: r.country)

    gaps = (
        "gdp", "ext_assets", "ext_liabilities", "govt_exp", "inflation",
        "capital_pc", "urban", "remittances", "liquid_liab", "fsd_dep", "bank_dep",
    )
    _require(a, gaps)
    _require(b, gaps)
    for rec in (a, b):
        if rec.sector_shares is None:
            raise CoverageError(f"{rec.country} {rec.year}: missing field(s) ['sector_shares']")
    if b.country not in a.exports or b.country not in a.imports:
        raise CoverageError(
            f"{a.country} {a.year}: missing trade flows with partner {b.country}"
        )

    two_way = a.exports[b.country] + a.imports[b.country]
    trade_intensity = two_way / (a.gdp + b.gdp)
    fin_open = (a.ext_assets + a.ext_liabilities) / a.gdp + (
        b.ext_assets + b.ext_liabilities
    ) / b.gdp
    both_eu = int(a.eu and b.eu)
    both_emu = int(a.emu and b.emu)

    return DyadCovariates(
        country_a=a.country,
        country_b=b.country,
        year=a.year,
        trade_intensity=trade_intensity,
        fin_open=fin_open,
        d_eu_not_emu=both_eu * (1 - both_emu),
        d_emu=both_emu,
        fiscal_gap=abs(a.govt_exp - b.govt_exp),
        inflation_gap=abs(a.inflation - b.inflation),
        spec_distance=float(np.abs(a.sector_shares - b.sector_shares).sum()),
        capital_gap=abs(a.capital_pc - b.capital_pc),
        urban_gap=abs(a.urban - b.urban),
        remit_gap=abs(a.remittances - b.remittances),
        liquid_gap=abs(a.liquid_liab - b.liquid_liab),
        fsd_gap=abs(a.fsd_dep - b.fsd_dep),
        bankdep_gap=abs(a.bank_dep - b.bank_dep),
    )


def dyad_covariate_frame(
    panel: dict[tuple[str, int], CountryYearCovariates],
    countries: Sequence[str] | None = None,
    years: Sequence[int] | None = None,
    strict: bool = False,
) -> pd.DataFrame:
    """Build the dyad-year covariate table for all country pairs.

    Pairs lacking a required field are skipped unless ``strict``; dyadic
    panels assembled from heterogeneous sources are naturally unbalanced.
    """
    if countries is None:
        countries = sorted({c for c, _ in panel})
    if years is None:
        years = sorted({y for _, y in panel})
    rows = []
    for yr in years:
        for i, ca in enumerate(countries):
            for cb in countries[i + 1 :]:
                rec_a, rec_b = panel.get((ca, yr)), panel.get((cb, yr))
                if rec_a is None or rec_b is None:
                    if strict:
                        raise CoverageError(f"missing covariates for ({ca},{cb}) in {yr}")
                    continue
                try:
                    dc = build_dyad_covariates(rec_a, rec_b)
                except CoverageError:
                    if strict:
                        raise
                    continue
                rows.append(
                    {
                        "dyad": dc.dyad_id,
                        "iso_a": dc.country_a,
                        "iso_b": dc.country_b,
                        "year": dc.year,
                        "trade_intensity": dc.trade_intensity,
                        "fin_open": dc.fin_open,
                        "d_eu_not_emu": dc.d_eu_not_emu,
                        "d_emu": dc.d_emu,
                        "fiscal_gap": dc.fiscal_gap,
                        "inflation_gap": dc.inflation_gap,
                        "spec_distance": dc.spec_distance,
                        "capital_gap": dc.capital_gap,
                        "urban_gap": dc.urban_gap,
                        "remit_gap": dc.remit_gap,
                        "liquid_gap": dc.liquid_gap,
                        "fsd_gap": dc.fsd_gap,
                        "bankdep_gap": dc.bankdep_gap,
                    }
                )
    return pd.DataFrame(rows)


def default_membership_path() -> Path:
    """Bundled editable accession calendar CSV."""
    return Path(__file__).parent / "data" / "membership.csv"
