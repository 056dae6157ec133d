"""Regression dataset assembly.

Order of operations (recorded in the dataset metadata):

1. merge the annual sync outcome with dyad covariates, dropping
   coverage-dropped outcome rows,
2. build the lagged outcome; a dyad-year without an adjacent prior year is
   excluded (gap years break the lag chain),
3. standardize continuous covariates on the resulting estimation sample,
4. apply the pairwise collinearity filter (|r| > threshold),
5. decompose survivors and membership dummies into within/between parts,
6. add year dummies with the first sample year as reference.

Dummies are decomposed but never standardized. Within + between + grand mean
reconstructs each column exactly, and within has zero mean inside each dyad.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd


class ConstantColumnError(ValueError):
    """Standardization of a zero-variance column."""


def standardize(column: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Z-score a column (sample std, ddof=1). Returns (values, mean, std)."""
    col = np.asarray(column, dtype=float)
    mean = col.mean()
    std = col.std(ddof=1)
    if std == 0 or not np.isfinite(std):
        raise ConstantColumnError("zero-variance column")
    return (col - mean) / std, float(mean), float(std)


@dataclass(frozen=True)
class RewbVariable:
    """Within/between split of one covariate across (dyad, year) cells."""

    name: str
    within: np.ndarray          # per row: x - dyad mean
    between: np.ndarray         # per row: dyad mean - grand mean
    grand_mean: float
    dyad_means: dict[str, float]


def rewb_decompose(name: str, values: np.ndarray, dyads: np.ndarray) -> RewbVariable:
    """Split x into within (x - dyad mean) and between (dyad mean - grand mean).

    The grand mean is taken over all observed (dyad, year) cells.
    """
    values = np.asarray(values, dtype=float)
    dyads = np.asarray(dyads)
    grand = float(values.mean())
    means: dict[str, float] = {}
    per_row_mean = np.empty_like(values)
    for d in pd.unique(dyads):
        sel = dyads == d
        m = float(values[sel].mean())
        means[str(d)] = m
        per_row_mean[sel] = m
    return RewbVariable(
        name=name,
        within=values - per_row_mean,
        between=per_row_mean - grand,
        grand_mean=grand,
        dyad_means=means,
    )


def linear_contribution(within: float, between: float, beta_w: float, beta_b: float) -> float:
    """Logit-scale contribution beta_w * within + beta_b * between."""
    return beta_w * within + beta_b * between


def build_lagged_dv(df: pd.DataFrame, value_col: str = "sync",
                    dyad_col: str = "dyad", year_col: str = "year") -> pd.DataFrame:
    """Attach lag_<value_col> and drop rows without an adjacent prior year.

    The lag never crosses a hole: a dyad observed in {2001, 2003} loses both
    rows, and single-year dyads vanish entirely.
    """
    df = df.sort_values([dyad_col, year_col]).reset_index(drop=True)
    prev_year = df.groupby(dyad_col)[year_col].shift(1)
    prev_val = df.groupby(dyad_col)[value_col].shift(1)
    adjacent = prev_year == df[year_col] - 1
    out = df.loc[adjacent].copy()
    out[f"lag_{value_col}"] = prev_val[adjacent]
    return out.reset_index(drop=True)


def collinearity_filter(
    columns: pd.DataFrame, threshold: float = 0.85
) -> tuple[list[str], dict[str, str]]:
    """Greedy pairwise correlation filter.

    While some pair exceeds the threshold, take the worst pair and drop the
    member with the larger mean absolute correlation against the remaining
    columns; ties drop the lexicographically later name. Returns (kept,
    dropped name -> reason).
    """
    if columns.shape[1] == 0:
        raise ValueError("no columns to filter")
    kept = sorted(columns.columns)
    dropped: dict[str, str] = {}
    while len(kept) > 1:
        corr = columns[kept].corr().abs().to_numpy()
        np.fill_diagonal(corr, 0.0)
        worst = np.unravel_index(np.argmax(corr), corr.shape)
        if corr[worst] <= threshold:
            break
        i, j = sorted(worst)
        a, b = kept[i], kept[j]
        mean_a = corr[i].sum() / (len(kept) - 1)
        mean_b = corr[j].sum() / (len(kept) - 1)
        if mean_a > mean_b:
            victim, mate = a, b
        elif mean_b > mean_a:
            victim, mate = b, a
        else:
            victim, mate = (b, a) if b > a else (a, b)
        kept.remove(victim)
        dropped[victim] = f"|corr|={corr[worst]:.3f} with {mate} > {threshold}"
    return kept, dropped


@dataclass
class RegressionDataset:
    """Estimation-ready rows plus the bookkeeping needed to read coefficients."""

    frame: pd.DataFrame
    dyad_ids: list[str]
    dyad_index: np.ndarray
    covariates: list[str]        # decomposed names minus the _w/_b suffix
    year_dummies: list[str]
    meta: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    @property
    def n_dyads(self) -> int:
        return len(self.dyad_ids)

    @property
    def years(self) -> np.ndarray:
        return np.sort(self.frame["year"].unique())


def build_regression_dataset(
    sync_df: pd.DataFrame,
    covariates_df: pd.DataFrame,
    continuous: list[str],
    dummies: list[str] = ("d_eu_not_emu", "d_emu"),
    outcome: str = "sync",
    collinearity_threshold: float = 0.85,
    do_standardize: bool = True,
) -> RegressionDataset:
    """Merge, lag, standardize, filter, and decompose into a fit-ready dataset.

    ``sync_df`` is one band of the sync panel (columns dyad, iso_a, iso_b,
    year, sync, dropped); ``covariates_df`` is the dyad-year covariate table.
    """
    dummies = list(dummies)
    usable = sync_df.loc[sync_df["dropped"] == 0, ["dyad", "iso_a", "iso_b", "year", outcome]]
    merged = usable.merge(covariates_df, on=["dyad", "year"], how="inner",
                          suffixes=("", "_cov"))
    needed = [c for c in continuous + dummies]
    missing_cols = [c for c in needed if c not in merged.columns]
    if missing_cols:
        raise KeyError(f"covariate columns missing from merge: {missing_cols}")
    n_before = len(merged)
    merged = merged.dropna(subset=needed + [outcome]).reset_index(drop=True)
    n_dropped_missing = n_before - len(merged)

    merged = build_lagged_dv(merged, value_col=outcome)
    if merged.empty:
        raise ValueError("no rows left after lag construction")

    meta: dict = {
        "outcome": outcome,
        "rows_dropped_missing_covariates": int(n_dropped_missing),
        "standardized": bool(do_standardize),
        "standardization": {},
        "collinearity_threshold": collinearity_threshold,
        "dropped_columns": {},
        "grand_means": {},
    }

    kept = sorted(continuous)
    for name in list(kept):
        if do_standardize:
            try:
                merged[name], mean, std = standardize(merged[name].to_numpy())
            except ConstantColumnError:
                kept.remove(name)
                meta["dropped_columns"][name] = "constant column"
                continue
            meta["standardization"][name] = {"mean": mean, "std": std}
    if len(kept) > 1:
        kept, dropped = collinearity_filter(merged[kept], collinearity_threshold)
        meta["dropped_columns"].update(dropped)

    dyads = merged["dyad"].to_numpy()
    for name in kept + dummies:
        var = rewb_decompose(name, merged[name].to_numpy(), dyads)
        merged[f"{name}_w"] = var.within
        merged[f"{name}_b"] = var.between
        meta["grand_means"][name] = var.grand_mean

    years = np.sort(merged["year"].unique())
    year_cols = []
    for yr in years[1:]:
        col = f"year_{yr}"
        merged[col] = (merged["year"] == yr).astype(float)
        year_cols.append(col)
    meta["reference_year"] = int(years[0])

    dyad_ids = sorted(merged["dyad"].unique())
    index_of = {d: i for i, d in enumerate(dyad_ids)}
    dyad_index = merged["dyad"].map(index_of).to_numpy()

    return RegressionDataset(
        frame=merged,
        dyad_ids=dyad_ids,
        dyad_index=dyad_index,
        covariates=kept + dummies,
        year_dummies=year_cols,
        meta=meta,
    )


def export_dataset(dataset: RegressionDataset, csv_path, meta_path) -> None:
    """Wide CSV of all constructed columns plus a JSON sidecar of metadata."""
    import json

    dataset.frame.to_csv(csv_path, index=False)
    with open(meta_path, "w") as fh:
        json.dump(dataset.meta, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
