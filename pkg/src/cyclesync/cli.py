"""Batch command line front end.

Subcommands::

    cyclesync simulate   --config cfg.yaml            # write toy input CSVs
    cyclesync coherence  --config cfg.yaml --pair A,B # per-dyad dumps
    cyclesync sync-panel --config cfg.yaml [--jobs N] # dyad-year sync CSV
    cyclesync fit        --config cfg.yaml model_spec.yaml

All defaults live in DEFAULT_CONFIG; a YAML config overrides them and a few
flags override the config. Every output embeds the config hash, seed, and
package version as ``#`` header comments and contains no timestamps, so
reruns with an identical config are byte-identical. Exit codes: 0 success,
2 input or config error, 3 completed with warnings (e.g. unconverged fit).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import __version__, ingest
from .coherence import SmoothingSpec, band_time_lag, coherence
from .cwt import cwt_morlet, make_scale_grid
from .errors import CycleSyncError
from .ingest import TimeSeries, format_ym
from .panel import RegressionDataset, build_regression_dataset, export_dataset
from .surrogate import SurrogateConfig, coherence_pvalues
from .syncindex import BandSpec, dyad_year_sync, sync_records_frame
from .synth import write_toy_inputs
from .zib import PRIOR_REGIMES, SamplerConfig, sample_posterior, summarize
from .zib.loo import elpd_loo
from .zib.model import build_design

OUTDIR_ENV = "CYCLESYNC_OUTDIR"

DEFAULT_CONFIG: dict = {
    "inputs": {
        "monthly_panel": "inputs/monthly.csv",
        "covariates": "inputs/countries.csv",
        "trade": "inputs/trade.csv",
        "membership": "inputs/membership.csv",
        "benchmark_weights": None,
    },
    "output_dir": "out",
    "seed": 20250101,
    "transform": "none",            # none | log | log-diff
    "eta": 6.0,
    "voices_per_octave": 12,
    "coi_coefficient": float(np.sqrt(2.0)),
    "smoothing": {"time_bandwidth": 0.6, "scale_window": 3},
    "surrogates": {"n_surrogates": 300},
    "bands": {"short": [18.0, 54.0], "long": [54.0, 102.0]},
    "p_threshold": 0.05,
    "eligibility": {"min_total_months": 9, "min_eligible_months": 6},
    "percent_columns": [],
    "simulate": {"n_countries": 10, "n_months": 480, "first_month": "1985-01"},
    "fit": {
        "continuous": [
            "trade_intensity", "fin_open", "fiscal_gap", "inflation_gap",
            "spec_distance", "capital_gap", "urban_gap", "remit_gap",
            "liquid_gap", "fsd_gap", "bankdep_gap",
        ],
        "collinearity_threshold": 0.85,
    },
}

SIGN_CONVENTION = (
    "cross=Wx*conj(Wy); phase=atan2(Im,Re) of smoothed cross; "
    "positive phase/lag reported as 'y leads x'"
)


class ConfigError(CycleSyncError):
    pass


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _deep_merge(base[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | None, overrides: dict | None = None) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    base_dir = Path.cwd()
    if path is not None:
        with open(path) as fh:
            try:
                user = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        cfg = _deep_merge(cfg, user)
        base_dir = Path(path).resolve().parent
    if env_out := os.environ.get(OUTDIR_ENV):
        cfg["output_dir"] = env_out
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg[key] = val
    cfg["_base_dir"] = str(base_dir)
    return cfg


def config_hash(cfg: dict) -> str:
    public = {k: v for k, v in cfg.items() if not k.startswith("_")}
    blob = json.dumps(public, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _resolve(cfg: dict, path_str: str | None) -> Path | None:
    if path_str is None:
        return None
    p = Path(path_str)
    return p if p.is_absolute() else Path(cfg["_base_dir"]) / p


def _outdir(cfg: dict) -> Path:
    out = _resolve(cfg, cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_csv(df: pd.DataFrame, path: Path, cfg: dict, extra: dict | None = None) -> None:
    """CSV with reproducibility header comments (no timestamps)."""
    meta = {
        "generator": f"cyclesync {__version__}",
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
    }
    meta.update(extra or {})
    with open(path, "w") as fh:
        for key in meta:
            fh.write(f"# {key}: {meta[key]}\n")
        df.to_csv(fh, index=False, lineterminator="\n", float_format="%.12g")


def _bands(cfg: dict) -> list[BandSpec]:
    out = []
    for name in sorted(cfg["bands"]):
        lo, hi = cfg["bands"][name]
        out.append(BandSpec(name, float(lo), float(hi)))
    return out


def _grid(cfg: dict):
    bands = _bands(cfg)
    pmin = min(b.period_min for b in bands)
    pmax = max(b.period_max for b in bands)
    return make_scale_grid(pmin, pmax, int(cfg["voices_per_octave"]), float(cfg["eta"]))


def _load_series(cfg: dict) -> dict[str, TimeSeries]:
    path = _resolve(cfg, cfg["inputs"]["monthly_panel"])
    if path is None or not path.exists():
        raise FileNotFoundError(f"monthly panel not found: {path}")
    series = ingest.load_monthly_panel(path)
    return {k: ingest.transform_series(v, cfg["transform"]) for k, v in series.items()}


def _align(x: TimeSeries, y: TimeSeries) -> tuple[TimeSeries, TimeSeries]:
    start = max(x.start, y.start)
    end = min(x.end, y.end)
    if end - start + 1 < 2:
        raise CycleSyncError(f"series {x.entity_id!r} and {y.entity_id!r} do not overlap")
    xs = x.values[start - x.start : end - x.start + 1]
    ys = y.values[start - y.start : end - y.start + 1]
    return TimeSeries(x.entity_id, start, xs), TimeSeries(y.entity_id, start, ys)


def _dyad_seed(master: int, dyad: str) -> int:
    digest = hashlib.sha256(f"{master}:{dyad}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _dyad_coherence(cfg: dict, x: TimeSeries, y: TimeSeries):
    """Aligned coherence field with surrogate p-values for one pair."""
    x, y = _align(x, y)
    grid = _grid(cfg)
    spec = SmoothingSpec(**cfg["smoothing"])
    coi_c = float(cfg["coi_coefficient"])
    dyad = f"{min(x.entity_id, y.entity_id)}-{max(x.entity_id, y.entity_id)}"
    surr = SurrogateConfig(
        n_surrogates=int(cfg["surrogates"]["n_surrogates"]),
        seed=_dyad_seed(int(cfg["seed"]), dyad),
    )
    field = coherence(cwt_morlet(x, grid, coi_c), cwt_morlet(y, grid, coi_c), spec)
    pvals = coherence_pvalues(x, y, grid, spec, surr, coi_c)
    return field.with_pvals(pvals), dyad


def cmd_coherence(cfg: dict, pair: str, band: str | None = None) -> int:
    names = [p.strip() for p in pair.split(",")]
    if len(names) != 2:
        raise ConfigError(f"--pair needs two comma-separated entities, got {pair!r}")
    series = _load_series(cfg)
    missing = [n for n in names if n not in series]
    if missing:
        raise CycleSyncError(f"entities not in monthly panel: {missing}")
    field, dyad = _dyad_coherence(cfg, series[names[0]], series[names[1]])
    out = _outdir(cfg)

    n_s, n_t = field.R.shape
    dump = pd.DataFrame(
        {
            "scale": np.repeat(field.grid.scales, n_t),
            "period": np.repeat(field.grid.periods, n_t),
            "time": np.tile([format_ym(field.start + t) for t in field.times], n_s),
            "R": field.R.ravel(),
            "phase": field.phase.ravel(),
            "coi": field.coi_mask.astype(int).ravel(),
            "pval": field.pvals.ravel(),
        }
    )
    write_csv(dump, out / f"coherence_{dyad}.csv", cfg,
              {"pair": dyad, "convention": SIGN_CONVENTION, "transform": cfg["transform"]})

    lag_rows = []
    for bspec in _bands(cfg):
        if band is not None and bspec.name != band:
            continue
        lag, reliable = band_time_lag(
            field, field.smoothed_cross, bspec.period_min, bspec.period_max,
            cfg["p_threshold"],
        )
        for t in field.times:
            lag_rows.append(
                (format_ym(field.start + t), bspec.name, lag[t], int(reliable[t]))
            )
    lags = pd.DataFrame(lag_rows, columns=["time", "band", "delta_t", "reliable"])
    write_csv(lags, out / f"timelag_{dyad}.csv", cfg,
              {"pair": dyad, "convention": SIGN_CONVENTION})
    print(f"wrote coherence_{dyad}.csv and timelag_{dyad}.csv to {out}")
    return 0


def _sync_one(args):
    cfg, name_x, name_y, sx, sy = args
    x = TimeSeries(name_x, sx[0], np.asarray(sx[1]))
    y = TimeSeries(name_y, sy[0], np.asarray(sy[1]))
    field, dyad = _dyad_coherence(cfg, x, y)
    records = []
    for band in _bands(cfg):
        records.extend(
            dyad_year_sync(
                field, band, dyad,
                p_threshold=cfg["p_threshold"],
                min_total_months=cfg["eligibility"]["min_total_months"],
                min_eligible_months=cfg["eligibility"]["min_eligible_months"],
            )
        )
    return records


def cmd_sync_panel(cfg: dict, jobs: int = 1, include_benchmark: bool = False) -> int:
    series = _load_series(cfg)
    names = sorted(series)
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1 :]]
    if include_benchmark:
        wpath = _resolve(cfg, cfg["inputs"].get("benchmark_weights"))
        if wpath is None or not wpath.exists():
            raise ConfigError("benchmark weights file required for --include-benchmark")
        wdf = pd.read_csv(wpath, comment="#")
        weights = dict(zip(wdf["entity"], wdf["weight"]))
        bench = ingest.build_benchmark(series, weights)
        series[bench.entity_id] = bench
        pairs += [(bench.entity_id, c) for c in names]

    tasks = [
        (cfg, a, b, (series[a].start, series[a].values), (series[b].start, series[b].values))
        for a, b in pairs
    ]
    records = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for recs in pool.map(_sync_one, tasks):
                records.extend(recs)
    else:
        for task in tasks:
            records.extend(_sync_one(task))

    frame = sync_records_frame(records).sort_values(["dyad", "band", "year"])
    out = _outdir(cfg)
    write_csv(frame.reset_index(drop=True), out / "sync_panel.csv", cfg,
              {"n_dyads": len(pairs), "convention": SIGN_CONVENTION,
               "transform": cfg["transform"]})
    print(f"wrote sync_panel.csv ({len(frame)} rows, {len(pairs)} dyads) to {out}")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def load_model_spec(path) -> dict:
    with open(path) as fh:
        try:
            spec = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}" if mark else ""
            raise ConfigError(f"{path}{where}: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: model spec must be a mapping")
    allowed = {"band", "regime", "mu", "zi", "lag", "indicators",
               "exclude_dyads_within", "interactions", "sampler"}
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown model spec keys {sorted(unknown)}")
    for key in ("band", "regime", "mu", "zi"):
        if key not in spec:
            raise ConfigError(f"{path}: model spec missing required key {key!r}")
    if spec["regime"] not in PRIOR_REGIMES:
        raise ConfigError(
            f"{path}: unknown prior regime {spec['regime']!r}, "
            f"expected one of {sorted(PRIOR_REGIMES)}"
        )
    spec.setdefault("lag", {"mu": True, "zi": True})
    spec.setdefault("indicators", {})
    spec.setdefault("exclude_dyads_within", [])
    spec.setdefault("interactions", [])
    spec.setdefault("sampler", {})
    return spec


def _expand_terms(dataset: RegressionDataset, terms: list[str]) -> list[str]:
    cols = []
    for term in terms:
        if f"{term}_w" in dataset.frame.columns:
            cols += [f"{term}_w", f"{term}_b"]
        elif term in dataset.frame.columns:
            cols.append(term)
        else:
            raise ConfigError(f"model term {term!r} not found in dataset")
    return cols


def apply_model_spec(dataset: RegressionDataset, spec: dict):
    """Resolve a model spec against a dataset: indicators, exclusions,
    interactions, and the three design column lists."""
    frame = dataset.frame

    exclude = list(spec["exclude_dyads_within"])
    if exclude:
        both = frame["iso_a"].isin(exclude) & frame["iso_b"].isin(exclude)
        frame = frame.loc[~both].reset_index(drop=True)

    for name, rule in sorted(spec["indicators"].items()):
        members = list(rule.get("one_of", []))
        if not members:
            raise ConfigError(f"indicator {name!r} needs a one_of country list")
        frame[name] = (
            frame["iso_a"].isin(members) ^ frame["iso_b"].isin(members)
        ).astype(float)

    dyad_ids = sorted(frame["dyad"].unique())
    index_of = {d: i for i, d in enumerate(dyad_ids)}
    dataset = RegressionDataset(
        frame=frame,
        dyad_ids=dyad_ids,
        dyad_index=frame["dyad"].map(index_of).to_numpy(),
        covariates=dataset.covariates,
        year_dummies=dataset.year_dummies,
        meta=dict(dataset.meta),
    )

    mu_cols = _expand_terms(dataset, spec["mu"])
    zi_cols = _expand_terms(dataset, spec["zi"])

    for inter in spec["interactions"]:
        var, by = inter["var"], inter["by"]
        if by not in frame.columns:
            raise ConfigError(f"interaction indicator {by!r} not in dataset")
        comps = inter.get("components", ["w", "b"])
        eqs = inter.get("equations", ["mu"])
        for comp in comps:
            base = f"{var}_{comp}"
            if base not in frame.columns:
                raise ConfigError(f"interaction base column {base!r} not in dataset")
            col = f"{base}:{by}"
            frame[col] = frame[base] * frame[by]
            if "mu" in eqs:
                mu_cols.append(col)
            if "zi" in eqs:
                zi_cols.append(col)

    lag_col = f"lag_{dataset.meta.get('outcome', 'sync')}"
    if spec["lag"].get("mu", True):
        mu_cols.insert(0, lag_col)
    if spec["lag"].get("zi", True):
        zi_cols.insert(0, lag_col)
    mu_cols += dataset.year_dummies
    zi_cols += dataset.year_dummies
    phi_cols = list(dataset.year_dummies)
    return dataset, mu_cols, zi_cols, phi_cols


def cmd_fit(cfg: dict, model_spec_path: str, sync_csv: str | None = None) -> int:
    spec = load_model_spec(model_spec_path)
    out = _outdir(cfg)
    sync_path = Path(sync_csv) if sync_csv else out / "sync_panel.csv"
    if not sync_path.exists():
        raise FileNotFoundError(f"sync panel not found: {sync_path} (run sync-panel first)")
    sync_df = pd.read_csv(sync_path, comment="#")
    band_df = sync_df[sync_df["band"] == spec["band"]]
    if band_df.empty:
        raise ConfigError(f"band {spec['band']!r} not present in {sync_path}")

    panel = ingest.load_covariate_panel(
        _resolve(cfg, cfg["inputs"]["covariates"]),
        percent_columns=cfg["percent_columns"],
    )
    ingest.attach_trade(panel, ingest.load_trade(_resolve(cfg, cfg["inputs"]["trade"])))
    membership_path = _resolve(cfg, cfg["inputs"]["membership"])
    if membership_path is None or not membership_path.exists():
        membership_path = ingest.default_membership_path()
    ingest.apply_membership(panel, ingest.load_membership(membership_path))
    cov_df = ingest.dyad_covariate_frame(panel)
    if cov_df.empty:
        raise CycleSyncError("no dyad-year covariates could be constructed")

    dataset = build_regression_dataset(
        band_df,
        cov_df,
        continuous=list(cfg["fit"]["continuous"]),
        collinearity_threshold=float(cfg["fit"]["collinearity_threshold"]),
    )
    dataset, mu_cols, zi_cols, phi_cols = apply_model_spec(dataset, spec)
    design = build_design(dataset, mu_cols, zi_cols, phi_cols)

    sampler_cfg = SamplerConfig(
        chains=int(spec["sampler"].get("chains", 4)),
        warmup=int(spec["sampler"].get("warmup", 1000)),
        draws=int(spec["sampler"].get("draws", 1000)),
        seed=int(spec["sampler"].get("seed", cfg["seed"])),
    )
    regime = PRIOR_REGIMES[spec["regime"]]
    fit = sample_posterior(design, regime, sampler_cfg)

    dataset.meta.update(
        {"config_hash": config_hash(cfg), "seed": cfg["seed"], "version": __version__}
    )
    export_dataset(dataset, out / "dataset.csv", out / "dataset_meta.json")

    names = fit.param_names
    n_pop = 3 + fit.layout.p_mu + fit.layout.p_zi + fit.layout.p_phi
    draws_rows = []
    for j in range(n_pop):
        col = fit.draws[:, :, j]
        for c in range(col.shape[0]):
            for d in range(col.shape[1]):
                draws_rows.append((c, d, names[j], col[c, d]))
    draws_df = pd.DataFrame(draws_rows, columns=["chain", "draw", "parameter", "value"])
    write_csv(draws_df, out / "draws.csv", cfg,
              {"regime": regime.name, "model_spec": Path(model_spec_path).name})

    table = summarize(fit)
    write_csv(table, out / "summary.csv", cfg,
              {"regime": regime.name, "band": spec["band"],
               "stars": "interval exclusion of zero: * 90%, ** 95%, *** 99%"})

    loo = elpd_loo(fit.pointwise_loglik)
    loo_blob = {
        "elpd_loo": loo.elpd,
        "se": loo.se,
        "n_rows": loo.n_rows,
        "pareto_k_max": float(loo.pareto_k.max()),
        "pareto_k_frac_above_0.7": float(np.mean(loo.pareto_k > 0.7)),
        "warning": loo.warning,
    }
    diag = {
        "config_hash": config_hash(cfg),
        "seed": sampler_cfg.seed,
        "version": __version__,
        "regime": regime.name,
        "band": spec["band"],
        "n_rows": design.n_rows,
        "n_dyads": design.n_dyads,
        "n_clamped_ones": design.n_clamped_ones,
        "divergences": fit.divergences,
        "unconverged": fit.unconverged,
        "flags": fit.flags,
        "rhat_max": float(np.nanmax(fit.rhat)),
        "ess_bulk_min": float(np.nanmin(fit.ess_bulk)),
        "random_effects": fit.meta["random_effects"],
        "convention": SIGN_CONVENTION,
        "elpd": loo_blob,
        "dropped_columns": dataset.meta.get("dropped_columns", {}),
    }
    with open(out / "fit_diagnostics.json", "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")

    if fit.unconverged:
        print(f"fit completed with warnings: {', '.join(fit.flags)}", file=sys.stderr)
        return 3
    print(f"fit ok: {design.n_rows} rows, {design.n_dyads} dyads, "
          f"rhat max {np.nanmax(fit.rhat):.3f}, elpd {loo.elpd:.1f}")
    return 0


def cmd_simulate(cfg: dict) -> int:
    sim = cfg["simulate"]
    inputs_dir = _resolve(cfg, cfg["inputs"]["monthly_panel"]).parent
    paths = write_toy_inputs(
        inputs_dir,
        n_countries=int(sim["n_countries"]),
        n_months=int(sim["n_months"]),
        first_month=sim.get("first_month", "1985-01"),
        seed=int(cfg["seed"]),
    )
    # example model spec next to the inputs, ready for `fit`
    model_spec = {
        "band": "short",
        "regime": "strong",
        "mu": ["d_eu_not_emu", "d_emu", "trade_intensity", "fiscal_gap",
               "spec_distance", "fin_open", "urban_gap", "remit_gap",
               "inflation_gap"],
        "zi": ["d_eu_not_emu", "d_emu", "trade_intensity", "spec_distance",
               "fin_open"],
        "lag": {"mu": True, "zi": True},
        "sampler": {"chains": 2, "warmup": 400, "draws": 400},
    }
    spec_path = inputs_dir / "model_spec.yaml"
    with open(spec_path, "w") as fh:
        yaml.safe_dump(model_spec, fh, sort_keys=False)
    manifest = {
        "generator": f"cyclesync {__version__}",
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "files": {k: str(v.name) for k, v in sorted(paths.items())},
    }
    with open(inputs_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for key in sorted(paths):
        print(f"wrote {paths[key]}")
    print(f"wrote {spec_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cyclesync",
        description="Time-frequency business-cycle synchronization pipeline.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override master seed")
        p.add_argument("--output-dir", help=f"override output dir (or ${OUTDIR_ENV})")

    p = sub.add_parser("simulate", help="write synthetic input CSVs")
    common(p)

    p = sub.add_parser("coherence", help="coherence/phase/p-value dump for one pair")
    common(p)
    p.add_argument("--pair", required=True, help="two entity ids, comma separated")
    p.add_argument("--band", help="restrict the time-lag file to one band")

    p = sub.add_parser("sync-panel", help="annual sync index for all dyads")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel dyad workers")
    p.add_argument("--include-benchmark", action="store_true",
                   help="add benchmark-vs-country rows (needs benchmark_weights)")

    p = sub.add_parser("fit", help="Bayesian zero-inflated beta fit")
    common(p)
    p.add_argument("model_spec", help="YAML model specification")
    p.add_argument("--sync-csv", help="sync panel CSV (default: <out>/sync_panel.csv)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "output_dir": args.output_dir})
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "coherence":
            if args.band and args.band not in cfg["bands"]:
                raise ConfigError(f"unknown band {args.band!r}")
            return cmd_coherence(cfg, args.pair, band=args.band)
        if args.command == "sync-panel":
            return cmd_sync_panel(cfg, jobs=args.jobs,
                                  include_benchmark=args.include_benchmark)
        if args.command == "fit":
            return cmd_fit(cfg, args.model_spec, sync_csv=args.sync_csv)
        raise ConfigError(f"unknown command {args.command!r}")
    except (CycleSyncError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
