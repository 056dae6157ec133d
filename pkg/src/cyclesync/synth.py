"""Synthetic-data generators used as oracles by the test suite.

Two families:

* coupled cyclical series with a known period and lag, feeding the wavelet
  pipeline;
* zero-inflated beta panels with known parameters, built through the real
  panel machinery so the regression design matches exactly what the
  estimator sees.

Everything is deterministic given the seed; per-dyad substreams come from a
spawned seed sequence.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import expit

from .ingest import TimeSeries, format_ym, parse_ym
from .panel import RegressionDataset, build_lagged_dv, rewb_decompose, standardize


@dataclass(frozen=True)
class CoupledPairSpec:
    """Two cosines sharing a cycle, the second delayed by ``lag`` months."""

    period: float
    lag: float
    common_amp: float = 1.0
    idio_noise_sd: float = 0.0
    length: int = 360
    seed: int = 0
    start: int = parse_ym("1990-01")

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.length < 4:
            raise ValueError("length must be >= 4")


def gen_coupled_pair(spec: CoupledPairSpec) -> tuple[TimeSeries, TimeSeries]:
    """x(t) = A cos(2 pi t / P) + e_x, y(t) = A cos(2 pi (t - lag) / P) + e_y."""
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.length, dtype=float)
    x = spec.common_amp * np.cos(2.0 * np.pi * t / spec.period)
    y = spec.common_amp * np.cos(2.0 * np.pi * (t - spec.lag) / spec.period)
    if spec.idio_noise_sd > 0:
        x = x + rng.normal(0.0, spec.idio_noise_sd, size=spec.length)
        y = y + rng.normal(0.0, spec.idio_noise_sd, size=spec.length)
    return (
        TimeSeries("x", spec.start, x),
        TimeSeries("y", spec.start, y),
    )


# ---------------------------------------------------------------------------
# ZIB panel generator
# ---------------------------------------------------------------------------

@dataclass
class ZibTruth:
    """Generating parameters of a synthetic panel, on the design scale."""

    alpha_mu: float
    alpha_zi: float
    alpha_phi: float
    beta_mu: dict[str, float]
    beta_zi: dict[str, float]
    gamma_mu: float           # lagged outcome coefficient, mean equation
    gamma_zi: float
    sd_u: np.ndarray          # (3,) random effect scales (mu, zi, phi)
    corr_u: np.ndarray        # (3, 3) effect correlation
    u: np.ndarray = field(default_factory=lambda: np.empty(0))
    expected_zero_share: float = np.nan

    def coefficient_table(self) -> dict[str, float]:
        """Truth keyed by sampler parameter names."""
        out = {"alpha_mu": self.alpha_mu, "alpha_zi": self.alpha_zi,
               "alpha_phi": self.alpha_phi}
        for k, v in self.beta_mu.items():
            out[f"beta_mu[{k}]"] = v
        out["beta_mu[lag_sync]"] = self.gamma_mu
        for k, v in self.beta_zi.items():
            out[f"beta_zi[{k}]"] = v
        out["beta_zi[lag_sync]"] = self.gamma_zi
        return out


def _dyad_labels(n_dyads: int) -> list[tuple[str, str]]:
    n_countries = 2
    while n_countries * (n_countries - 1) // 2 < n_dyads:
        n_countries += 1
    countries = [f"C{i:02d}" for i in range(n_countries)]
    return list(itertools.combinations(countries, 2))[:n_dyads]


def gen_zib_panel(
    n_dyads: int,
    n_years: int,
    beta_mu_w: np.ndarray,
    beta_mu_b: np.ndarray,
    beta_zi_w: np.ndarray | None = None,
    beta_zi_b: np.ndarray | None = None,
    alpha_mu: float = 0.2,
    alpha_zi: float = -1.5,
    alpha_phi: float = 1.6,
    gamma_mu: float = 0.4,
    gamma_zi: float = -0.8,
    sd_u: tuple[float, float, float] = (0.25, 0.3, 0.15),
    corr_u: np.ndarray | None = None,
    within_ar: float = 0.5,
    seed: int = 0,
    first_year: int = 2001,
) -> tuple[RegressionDataset, ZibTruth]:
    """Panel with known coefficients on the standardized/decomposed design.

    Covariates are dyad means plus AR(1) within-deviations, then standardized
    and split into within/between parts exactly as the estimation pipeline
    does, after which outcomes are drawn sequentially through the mixture so
    the lagged outcome is a real regressor. An extra warm-up year provides
    the first lags and is dropped by the lag builder.
    """
    beta_mu_w = np.asarray(beta_mu_w, dtype=float)
    beta_mu_b = np.asarray(beta_mu_b, dtype=float)
    k = beta_mu_w.size
    if beta_zi_w is None:
        beta_zi_w = np.zeros(k)
    if beta_zi_b is None:
        beta_zi_b = np.zeros(k)
    beta_zi_w = np.asarray(beta_zi_w, dtype=float)
    beta_zi_b = np.asarray(beta_zi_b, dtype=float)
    if corr_u is None:
        corr_u = np.array([[1.0, 0.3, 0.0], [0.3, 1.0, 0.0], [0.0, 0.0, 1.0]])
    sd_u = np.asarray(sd_u, dtype=float)

    rng = np.random.default_rng(seed)
    years = np.arange(first_year - 1, first_year + n_years)  # warm-up year first
    n_t = years.size
    pairs = _dyad_labels(n_dyads)

    # covariates: between ~ N(0,1) per dyad, within AR(1) with unit marginal sd
    innov_sd = np.sqrt(1.0 - within_ar**2)
    x = np.empty((n_dyads, n_t, k))
    for g in range(n_dyads):
        between = rng.normal(0.0, 1.0, size=k)
        dev = rng.normal(0.0, 1.0, size=k)
        for t in range(n_t):
            x[g, t] = between + dev
            dev = within_ar * dev + rng.normal(0.0, innov_sd, size=k)

    rows = {
        "dyad": np.repeat([f"{a}-{b}" for a, b in pairs], n_t),
        "iso_a": np.repeat([a for a, _ in pairs], n_t),
        "iso_b": np.repeat([b for _, b in pairs], n_t),
        "year": np.tile(years, n_dyads),
    }
    frame = pd.DataFrame(rows)
    cov_names = [f"x{j + 1}" for j in range(k)]
    for j, name in enumerate(cov_names):
        frame[name] = x[:, :, j].reshape(-1)

    # standardize then decompose, as the pipeline does
    dyads = frame["dyad"].to_numpy()
    for name in cov_names:
        frame[name], _, _ = standardize(frame[name].to_numpy())
        var = rewb_decompose(name, frame[name].to_numpy(), dyads)
        frame[f"{name}_w"] = var.within
        frame[f"{name}_b"] = var.between

    # random effects
    chol = np.linalg.cholesky(corr_u)
    u = (rng.standard_normal((n_dyads, 3)) @ chol.T) * sd_u

    xw = frame[[f"{c}_w" for c in cov_names]].to_numpy().reshape(n_dyads, n_t, k)
    xb = frame[[f"{c}_b" for c in cov_names]].to_numpy().reshape(n_dyads, n_t, k)
    eta_mu_x = alpha_mu + xw @ beta_mu_w + xb @ beta_mu_b + u[:, [0]]
    eta_zi_x = alpha_zi + xw @ beta_zi_w + xb @ beta_zi_b + u[:, [1]]
    phi = np.exp(alpha_phi + u[:, 2])

    y = np.empty((n_dyads, n_t))
    y_prev = np.full(n_dyads, 0.3)
    pi_sum = 0.0
    for t in range(n_t):
        eta_mu = eta_mu_x[:, t] + gamma_mu * y_prev
        eta_zi = eta_zi_x[:, t] + gamma_zi * y_prev
        mu = expit(eta_mu)
        pi = expit(eta_zi)
        pi_sum += pi.sum()
        draw = rng.beta(mu * phi, (1.0 - mu) * phi)
        draw[rng.random(n_dyads) < pi] = 0.0
        y[:, t] = draw
        y_prev = draw

    frame["sync"] = y.reshape(-1)
    frame = build_lagged_dv(frame, value_col="sync")
    frame = frame.sort_values(["dyad", "year"]).reset_index(drop=True)

    year_cols = []
    yrs = np.sort(frame["year"].unique())
    for yr in yrs[1:]:
        col = f"year_{yr}"
        frame[col] = (frame["year"] == yr).astype(float)
        year_cols.append(col)

    dyad_ids = sorted(frame["dyad"].unique())
    index_of = {d: i for i, d in enumerate(dyad_ids)}
    dataset = RegressionDataset(
        frame=frame,
        dyad_ids=dyad_ids,
        dyad_index=frame["dyad"].map(index_of).to_numpy(),
        covariates=cov_names,
        year_dummies=year_cols,
        meta={"outcome": "sync", "synthetic": True, "seed": seed},
    )
    truth = ZibTruth(
        alpha_mu=alpha_mu,
        alpha_zi=alpha_zi,
        alpha_phi=alpha_phi,
        beta_mu={f"{c}_{s}": float(v)
                 for s, vec in (("w", beta_mu_w), ("b", beta_mu_b))
                 for c, v in zip(cov_names, vec)},
        beta_zi={f"{c}_{s}": float(v)
                 for s, vec in (("w", beta_zi_w), ("b", beta_zi_b))
                 for c, v in zip(cov_names, vec)},
        gamma_mu=gamma_mu,
        gamma_zi=gamma_zi,
        sd_u=sd_u,
        corr_u=corr_u,
        u=u,
        expected_zero_share=pi_sum / (n_dyads * n_t),
    )
    return dataset, truth


# ---------------------------------------------------------------------------
# File-based toy inputs for the CLI pipeline
# ---------------------------------------------------------------------------

def write_toy_inputs(
    outdir,
    n_countries: int = 10,
    n_months: int = 480,
    first_month: str = "1985-01",
    seed: int = 0,
) -> dict[str, Path]:
    """Write monthly, covariate, trade, membership, and weight CSVs.

    Countries load on two common cycles (a business-cycle one and a slower
    one) with idiosyncratic noise, so dyads have genuine band coherence.
    Covariates are smooth random walks at plausible scales. The first six
    countries are EU members (the first three also in the euro area); the
    rest never join, mimicking candidate economies.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    start = parse_ym(first_month)
    countries = [f"C{i:02d}" for i in range(n_countries)]
    t = np.arange(n_months, dtype=float)

    cyc_short = np.cos(2.0 * np.pi * t / 36.0)
    cyc_long = np.cos(2.0 * np.pi * t / 84.0 + 0.7)
    monthly_rows = []
    for i, c in enumerate(countries):
        load_s = 0.3 + 0.9 * rng.random()
        load_l = 0.3 + 0.8 * rng.random()
        phase = rng.normal(0, 2.0)
        series = (
            100.0
            + load_s * cyc_short
            + load_l * np.cos(2.0 * np.pi * (t - phase) / 84.0)
            + 0.25 * cyc_long
            + rng.normal(0, 1.0, size=n_months)
        )
        for k in range(n_months):
            monthly_rows.append((c, format_ym(start + k), series[k]))
    monthly = outdir / "monthly.csv"
    pd.DataFrame(monthly_rows, columns=["entity", "date", "value"]).to_csv(
        monthly, index=False
    )

    first_year = start // 12
    last_year = (start + n_months - 1) // 12
    years = list(range(first_year, last_year + 1))

    def walk(level, sd):
        vals = [level]
        for _ in years[1:]:
            vals.append(vals[-1] + rng.normal(0, sd))
        return np.array(vals)

    cov_rows = []
    for c in countries:
        gdp = np.exp(walk(np.log(100 + 100 * rng.random()), 0.03))
        assets = gdp * (0.5 + 0.4 * rng.random())
        liab = gdp * (0.5 + 0.4 * rng.random())
        govt = np.clip(walk(0.35 + 0.1 * rng.random(), 0.01), 0.1, 0.6)
        infl = walk(2.0 + 2.0 * rng.random(), 0.5)
        agr = np.clip(walk(0.08 + 0.1 * rng.random(), 0.005), 0.01, 0.5)
        ind = np.clip(walk(0.25 + 0.1 * rng.random(), 0.005), 0.05, 0.6)
        srv = np.maximum(1.0 - agr - ind, 0.05)
        cap = walk(30.0 + 40.0 * rng.random(), 1.0)
        urb = np.clip(walk(0.55 + 0.2 * rng.random(), 0.005), 0.2, 0.95)
        rem = np.clip(walk(0.02 + 0.05 * rng.random(), 0.003), 0.0, 0.3)
        liq = np.clip(walk(0.5 + 0.3 * rng.random(), 0.02), 0.1, 2.0)
        fsd = liq * (0.9 + 0.05 * rng.random())
        bank = liq * (0.8 + 0.05 * rng.random())
        for j, yr in enumerate(years):
            cov_rows.append(
                (c, yr, gdp[j], assets[j], liab[j], govt[j], infl[j],
                 agr[j], ind[j], srv[j], cap[j], urb[j], rem[j],
                 liq[j], fsd[j], bank[j])
            )
    covariates = outdir / "countries.csv"
    pd.DataFrame(
        cov_rows,
        columns=["country", "year", "gdp", "ext_assets", "ext_liabilities",
                 "govt_exp", "inflation", "share_agriculture", "share_industry",
                 "share_services", "capital_pc", "urban", "remittances",
                 "liquid_liab", "fsd_dep", "bank_dep"],
    ).to_csv(covariates, index=False)

    trade_rows = []
    for ia, ca in enumerate(countries):
        for cb in countries[ia + 1 :]:
            base = 2.0 + 6.0 * rng.random()
            for yr in years:
                growth = 1.0 + 0.02 * (yr - years[0]) + rng.normal(0, 0.05)
                exports = base * max(growth, 0.1)
                imports = exports * (0.8 + 0.4 * rng.random())
                trade_rows.append((ca, cb, yr, exports, imports))
    trade = outdir / "trade.csv"
    pd.DataFrame(
        trade_rows, columns=["reporter", "partner", "year", "exports", "imports"]
    ).to_csv(trade, index=False)

    membership = outdir / "membership.csv"
    memb_rows = []
    for i, c in enumerate(countries):
        eu = first_year + 5 if i < 6 else ""
        emu = first_year + 12 if i < 3 else ""
        memb_rows.append((c, eu, emu))
    pd.DataFrame(memb_rows, columns=["country", "eu_from_year", "emu_from_year"]).to_csv(
        membership, index=False
    )

    weights = outdir / "weights.csv"
    pd.DataFrame(
        {"entity": countries, "weight": rng.uniform(0.5, 2.0, size=n_countries)}
    ).to_csv(weights, index=False)

    return {
        "monthly": monthly,
        "covariates": covariates,
        "trade": trade,
        "membership": membership,
        "weights": weights,
    }
