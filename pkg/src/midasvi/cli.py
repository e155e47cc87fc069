"""Command-line interface: simulate | fit | mc | forecast.

Every command takes an optional JSON config file plus flags (flags win);
unknown config keys are rejected.  All numeric output is written at
full precision (17 significant digits) so runs can be compared bitwise.
Every command is deterministic given its config and seed; exit status is
0 exactly when all requested work succeeded.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import harness
from ._backend import backend_name
from .basis import lag_weights
from .cavi import CaviOptions, fit_cavi, INIT_SCHEMES
from .dgp import DgpConfig, config_by_id, simulate, tier_configs
from .forecast import (
    FORECAST_MODELS,
    build_midas_rv_dataset,
    expanding_window_forecast,
    forecast_metrics,
    load_daily_returns,
    realized_volatility,
)
from .gibbs import GibbsOptions, chain_summary, run_gibbs
from .model import MidasDataset, Predictor, Priors, parameter_names

__all__ = ["main", "build_parser"]

FIT_SCHEMA = "midasvi-fit/1"


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _z_for(level: float) -> float:
    from scipy.stats import norm

    return float(norm.ppf(0.5 * (1.0 + level)))


def _load_config(path: str | None, allowed: dict, command: str) -> dict:
    """Read the JSON config and reject keys the command does not know."""
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ValueError(
            f"unknown config keys for {command!r}: {sorted(unknown)}; "
            f"allowed: {sorted(allowed)}"
        )
    return data


def _merge(defaults: dict, config: dict, args: argparse.Namespace) -> dict:
    """defaults < config file < explicitly passed flags."""
    merged = dict(defaults)
    merged.update(config)
    for key in defaults:
        flag_value = getattr(args, key.replace("-", "_"), None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _priors_from(settings: dict) -> Priors:
    return Priors(
        alpha_var=float(settings["alpha-var"]),
        beta_var=float(settings["beta-var"]),
        wc_var=float(settings["wc-var"]),
        noise_shape=float(settings["noise-shape"]),
        noise_rate=float(settings["noise-rate"]),
    )


_PRIOR_DEFAULTS = {
    "alpha-var": 100.0,
    "beta-var": 10.0,
    "wc-var": 1.0,
    "noise-shape": 0.01,
    "noise-rate": 0.01,
}


def _add_prior_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--alpha-var", type=float, default=None)
    sub.add_argument("--beta-var", type=float, default=None)
    sub.add_argument("--wc-var", type=float, default=None)
    sub.add_argument("--noise-shape", type=float, default=None)
    sub.add_argument("--noise-rate", type=float, default=None)


# =============================================================================
# simulate
# =============================================================================

_SIMULATE_DEFAULTS = {
    "config-id": "",
    "n-predictors": 3,
    "n-obs": 200,
    "n-lags": 9,
    "order": 3,
    "basis-kind": "almon",
    "profiles": (),
    "beta-true": (),
    "alpha-true": 0.5,
    "sigma2-true": 0.45,
    "null-pattern": False,
    "frequency": "generic",
    "notes": "",
}


def cmd_simulate(args: argparse.Namespace) -> int:
    config_file = _load_config(args.config, _SIMULATE_DEFAULTS, "simulate")
    settings = _merge(_SIMULATE_DEFAULTS, config_file, args)
    out = _ensure_out(args.out)
    if settings["config-id"]:
        config = config_by_id(settings["config-id"])
    else:
        config = DgpConfig(
            config_id="",
            n_predictors=int(settings["n-predictors"]),
            n_obs=int(settings["n-obs"]),
            n_lags=int(settings["n-lags"]),
            order=int(settings["order"]),
            profiles=tuple(settings["profiles"]),
            beta_true=tuple(settings["beta-true"]),
            alpha_true=float(settings["alpha-true"]),
            sigma2_true=float(settings["sigma2-true"]),
            basis_kind=settings["basis-kind"],
            frequency=settings["frequency"],
            null_pattern=bool(settings["null-pattern"]),
            notes=settings["notes"],
        )
    synth = simulate(config, seed=args.seed)
    with open(os.path.join(out, "y.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"])
        for value in synth.dataset.y:
            writer.writerow([_fmt(value)])
    for j, pred in enumerate(synth.dataset.predictors, start=1):
        block = np.asarray(pred.lags)
        with open(os.path.join(out, f"x{j}.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"lag_{k}" for k in range(block.shape[1])])
            for row in block:
                writer.writerow([_fmt(v) for v in row])
    truth = {
        "config": {
            "config_id": config.config_id,
            "n_predictors": config.n_predictors,
            "n_obs": config.n_obs,
            "n_lags": config.n_lags,
            "order": config.order,
            "profiles": list(config.profiles),
            "beta_true": list(config.beta_true),
            "alpha_true": config.alpha_true,
            "sigma2_true": config.sigma2_true,
            "basis_kind": config.basis_kind,
            "frequency": config.frequency,
            "null_pattern": config.null_pattern,
            "notes": config.notes,
        },
        "seed": args.seed,
        "alpha_true": synth.alpha_true,
        "beta_true": synth.beta_true.tolist(),
        "sigma2_true": synth.sigma2_true,
        "wc_true": [w.tolist() for w in synth.wc_true],
        "profiles": [p.tolist() for p in synth.profiles],
        "profile_residuals": synth.profile_residuals.tolist(),
    }
    with open(os.path.join(out, "truth.json"), "w") as fh:
        json.dump(truth, fh, indent=2)
        fh.write("\n")
    print(f"wrote y.csv, x1..x{config.n_predictors}.csv, truth.json to {out}")
    return 0


def _read_dataset(data_dir: str, basis_kind: str, order: int) -> MidasDataset:
    """Rebuild a dataset from simulate's CSV output."""
    y_path = os.path.join(data_dir, "y.csv")
    with open(y_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["y"]:
            raise ValueError(f"{y_path}: expected header ['y'], found {header}")
        y = np.array([float(row[0]) for row in reader])
    blocks = []
    j = 1
    while os.path.exists(os.path.join(data_dir, f"x{j}.csv")):
        with open(os.path.join(data_dir, f"x{j}.csv"), newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            blocks.append(np.array([[float(v) for v in row] for row in reader]))
        j += 1
    if not blocks:
        raise ValueError(f"no predictor files (x1.csv, …) found in {data_dir}")
    return MidasDataset(y, [Predictor(b, basis_kind, order) for b in blocks])


# =============================================================================
# fit
# =============================================================================

_FIT_DEFAULTS = {
    "data": "",
    "method": "cavi",
    "basis-kind": "almon",
    "order": 3,
    "level": 0.95,
    "kappa": 1.0,
    "tol": 1e-8,
    "max-iters": 500,
    "init": "ols_uniform",
    "backend": "",
    "n-draws": 5000,
    "burn-in": 1000,
    "thin": 1,
    **_PRIOR_DEFAULTS,
}


def _weight_profile_rows(dataset: MidasDataset, wc_means, wc_covs, level, kappa):
    """Lag-weight mean and interval rows from free-coefficient posteriors."""
    z = _z_for(level)
    rows = []
    for j in range(dataset.n_predictors):
        basis = dataset.bases[j]
        rep = dataset.reparams[j]
        mean_w = lag_weights(basis, rep, wc_means[j])
        transform = basis @ rep.kernel
        sd_w = np.sqrt(np.einsum("kp,pq,kq->k", transform, wc_covs[j], transform))
        for k in range(mean_w.size):
            rows.append(
                (
                    j + 1,
                    k,
                    mean_w[k],
                    mean_w[k] - z * kappa * sd_w[k],
                    mean_w[k] + z * kappa * sd_w[k],
                )
            )
    return rows


def _write_weight_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["predictor", "lag", "weight_mean", "weight_lo", "weight_hi"])
        for predictor, lag, mean, lo, hi in rows:
            writer.writerow([predictor, lag, _fmt(mean), _fmt(lo), _fmt(hi)])


def cmd_fit(args: argparse.Namespace) -> int:
    config_file = _load_config(args.config, _FIT_DEFAULTS, "fit")
    settings = _merge(_FIT_DEFAULTS, config_file, args)
    if not settings["data"]:
        raise ValueError("fit needs --data DIR (output of `simulate`)")
    method = settings["method"]
    if method not in ("cavi", "gibbs", "both"):
        raise ValueError("--method must be cavi, gibbs, or both")
    out = _ensure_out(args.out)
    dataset = _read_dataset(
        settings["data"], settings["basis-kind"], int(settings["order"])
    )
    priors = _priors_from(settings)
    level = float(settings["level"])
    kappa = float(settings["kappa"])
    z = _z_for(level)
    names = parameter_names(dataset)
    methods = ("cavi", "gibbs") if method == "both" else (method,)
    for m in methods:
        report: dict = {
            "schema": FIT_SCHEMA,
            "method": m,
            "backend": backend_name(),
            "n_obs": dataset.n_obs,
            "n_predictors": dataset.n_predictors,
            "interval": {"level": level, "kappa": kappa if m == "cavi" else 1.0},
            "priors": {
                "alpha_var": priors.alpha_var,
                "beta_var": priors.beta_var,
                "wc_var": priors.wc_var,
                "noise_shape": priors.noise_shape,
                "noise_rate": priors.noise_rate,
            },
        }
        if m == "cavi":
            options = CaviOptions(
                tol=float(settings["tol"]),
                max_iters=int(settings["max-iters"]),
                init=settings["init"],
                backend=settings["backend"] or None,
            )
            fit = fit_cavi(dataset, priors=priors, options=options)
            params = {}
            means = fit.coef.mean
            sds = fit.coef.sd()
            coef_names = names[: dataset.n_predictors + 1]
            for i, name in enumerate(coef_names):
                params[name] = {
                    "mean": means[i],
                    "sd": sds[i],
                    "lo": means[i] - z * kappa * sds[i],
                    "hi": means[i] + z * kappa * sds[i],
                }
            idx = len(coef_names)
            for j, block in enumerate(fit.weights):
                bsd = block.sd()
                for i in range(block.mean.size):
                    params[names[idx]] = {
                        "mean": block.mean[i],
                        "sd": bsd[i],
                        "lo": block.mean[i] - z * kappa * bsd[i],
                        "hi": block.mean[i] + z * kappa * bsd[i],
                    }
                    idx += 1
            from scipy.stats import invgamma

            noise = fit.noise
            params["sigma2"] = {
                "mean": noise.mean(),
                "sd": math.nan,
                "lo": float(invgamma.ppf((1 - level) / 2, noise.shape, scale=noise.rate)),
                "hi": float(invgamma.ppf((1 + level) / 2, noise.shape, scale=noise.rate)),
            }
            report.update(
                {
                    "parameters": params,
                    "elbo_trace": [float(v) for v in fit.elbo_trace],
                    "n_sweeps": fit.n_sweeps,
                    "converged": fit.converged,
                    "wall_time": fit.wall_time,
                    "options": {
                        "tol": options.tol,
                        "max_iters": options.max_iters,
                        "init": options.init,
                    },
                }
            )
            weight_rows = _weight_profile_rows(
                dataset,
                [b.mean for b in fit.weights],
                [b.cov for b in fit.weights],
                level,
                kappa,
            )
            _write_weight_csv(os.path.join(out, f"weights_{m}.csv"), weight_rows)
        else:
            options = GibbsOptions(
                n_draws=int(settings["n-draws"]),
                burn_in=int(settings["burn-in"]),
                thin=int(settings["thin"]),
                seed=args.seed,
                init=settings["init"],
                backend=settings["backend"] or None,
            )
            chain = run_gibbs(dataset, priors=priors, options=options)
            summary = chain_summary(chain, level=level)
            params = {}
            ess = {}
            for name in names:
                s = summary[name]
                params[name] = {"mean": s.mean, "sd": s.sd, "lo": s.lo, "hi": s.hi}
                ess[name] = s.ess
            report.update(
                {
                    "parameters": params,
                    "ess": ess,
                    "min_ess": summary.min_ess,
                    "n_draws": options.n_draws,
                    "burn_in": options.burn_in,
                    "thin": options.thin,
                    "wall_time": chain.wall_time,
                }
            )
            wc_means = [wd.mean(axis=0) for wd in chain.weight_draws]
            wc_covs = [np.atleast_2d(np.cov(wd.T, ddof=1)) for wd in chain.weight_draws]
            weight_rows = _weight_profile_rows(dataset, wc_means, wc_covs, level, 1.0)
            _write_weight_csv(os.path.join(out, f"weights_{m}.csv"), weight_rows)
        with open(os.path.join(out, f"fit_{m}.json"), "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        print(f"wrote fit_{m}.json and weights_{m}.csv to {out}")
    return 0


# =============================================================================
# mc
# =============================================================================

_MC_DEFAULTS = {
    "configs": "1A-2",
    "reps": 100,
    "methods": "",
    "calibration": False,
    "kappas": "1.0,1.1,1.2,1.5,2.0",
    "n-draws": 5000,
    "burn-in": 1000,
    "thin": 1,
    "level": 0.95,
    "kappa": 1.0,
    **_PRIOR_DEFAULTS,
}


def cmd_mc(args: argparse.Namespace) -> int:
    config_file = _load_config(args.config, _MC_DEFAULTS, "mc")
    settings = _merge(_MC_DEFAULTS, config_file, args)
    out = _ensure_out(args.out)
    if settings["configs"] == "all":
        configs = tier_configs()
    else:
        configs = [config_by_id(cid.strip()) for cid in settings["configs"].split(",")]
    methods = None
    if settings["methods"]:
        methods = tuple(m.strip() for m in settings["methods"].split(","))
    priors = _priors_from(settings)
    gibbs_options = GibbsOptions(
        n_draws=int(settings["n-draws"]),
        burn_in=int(settings["burn-in"]),
        thin=int(settings["thin"]),
    )
    result = harness.mc_run(
        configs,
        reps=int(settings["reps"]),
        methods=methods,
        master_seed=args.seed,
        threads=args.threads,
        priors=priors,
        gibbs_options=gibbs_options,
        interval_level=float(settings["level"]),
        interval_kappa=float(settings["kappa"]),
    )
    harness.write_metrics_csv(result.rows, os.path.join(out, "metrics.csv"))
    harness.write_metrics_json(result.rows, os.path.join(out, "metrics.json"))
    figs = harness.write_fig_csvs(result, out)
    written = ["metrics.csv", "metrics.json", *figs]
    if settings["calibration"]:
        kappas = [float(k) for k in str(settings["kappas"]).split(",")]
        cal_rows = harness.calibration_sweep(
            configs[0],
            kappas,
            int(settings["reps"]),
            master_seed=args.seed,
            priors=priors,
            interval_level=float(settings["level"]),
        )
        with open(os.path.join(out, "calibration.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kappa", "coverage", "se"])
            for row in cal_rows:
                writer.writerow([_fmt(row.kappa), _fmt(row.coverage), _fmt(row.se)])
        written.append("calibration.csv")
    print(f"wrote {', '.join(written)} to {out}")
    return 0


# =============================================================================
# forecast
# =============================================================================

_FORECAST_DEFAULTS = {
    "data": "",
    "models": ",".join(FORECAST_MODELS),
    "initial-window": 120,
    "n-lags": 22,
    "n-predictors": 3,
    "basis-kind": "almon",
    "order": 3,
    "baseline": "har_rv",
    "level": 0.95,
    "kappa": 1.0,
    "n-draws": 5000,
    "burn-in": 1000,
    "thin": 1,
    **_PRIOR_DEFAULTS,
}


def cmd_forecast(args: argparse.Namespace) -> int:
    config_file = _load_config(args.config, _FORECAST_DEFAULTS, "forecast")
    settings = _merge(_FORECAST_DEFAULTS, config_file, args)
    if not settings["data"]:
        raise ValueError("forecast needs --data CSV of daily returns")
    out = _ensure_out(args.out)
    models = tuple(m.strip() for m in settings["models"].split(","))
    unknown = set(models) - set(FORECAST_MODELS)
    if unknown:
        raise ValueError(
            f"unknown models {sorted(unknown)}; choose from {FORECAST_MODELS}"
        )
    baseline = settings["baseline"]
    if baseline not in models:
        raise ValueError(f"baseline {baseline!r} must be among the requested models")
    daily = load_daily_returns(settings["data"])
    rv = realized_volatility(daily)
    dataset, months = build_midas_rv_dataset(
        daily,
        n_lags=int(settings["n-lags"]),
        n_predictors=int(settings["n-predictors"]),
        basis_kind=settings["basis-kind"],
        order=int(settings["order"]),
        rv=rv,
    )
    priors = _priors_from(settings)
    gibbs_options = GibbsOptions(
        n_draws=int(settings["n-draws"]),
        burn_in=int(settings["burn-in"]),
        thin=int(settings["thin"]),
    )
    runs = []
    for model in models:
        runs.append(
            expanding_window_forecast(
                dataset,
                months,
                model,
                initial_window=int(settings["initial-window"]),
                priors=priors,
                gibbs_options=gibbs_options,
                seed=args.seed,
            )
        )
    table = forecast_metrics(runs, baseline=baseline)
    with open(os.path.join(out, "accuracy.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        cols = ["model", "n_months", "mse", "mae", "rel_mse", "dm_stat", "dm_p", "mean_time"]
        writer.writerow(cols)
        for row in table:
            writer.writerow([_fmt(row[c]) for c in cols])
    with open(os.path.join(out, "forecasts.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "month", "realized", "forecast", "pred_sd"])
        for run in runs:
            for i in range(run.months.size):
                writer.writerow(
                    [
                        run.model,
                        str(run.months[i]),
                        _fmt(run.realized[i]),
                        _fmt(run.forecasts[i]),
                        _fmt(run.pred_sd[i]),
                    ]
                )
    fit = fit_cavi(dataset, priors=priors)
    weight_rows = _weight_profile_rows(
        dataset,
        [b.mean for b in fit.weights],
        [b.cov for b in fit.weights],
        float(settings["level"]),
        float(settings["kappa"]),
    )
    _write_weight_csv(os.path.join(out, "weight_profile.csv"), weight_rows)
    print(f"wrote accuracy.csv, forecasts.csv, weight_profile.csv to {out}")
    return 0


# =============================================================================
# parser / entry point
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="midasvi",
        description=(
            "Variational and sampling inference for mixed-frequency regression: "
            "simulate datasets, fit models, run replication studies, and "
            "evaluate realized-volatility forecasts."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def _common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="master seed (uint64)")
        p.add_argument("--out", type=str, default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker thread limit")

    p_sim = sub.add_parser("simulate", help="draw a synthetic dataset and write CSVs")
    _common(p_sim)
    p_sim.add_argument("--config-id", dest="config_id", type=str, default=None)
    p_sim.add_argument("--n-predictors", type=int, default=None)
    p_sim.add_argument("--n-obs", type=int, default=None)
    p_sim.add_argument("--n-lags", type=int, default=None)
    p_sim.add_argument("--order", type=int, default=None)
    p_sim.add_argument("--basis-kind", type=str, default=None, choices=("almon", "bspline"))
    p_sim.add_argument("--alpha-true", type=float, default=None)
    p_sim.add_argument("--sigma2-true", type=float, default=None)
    p_sim.add_argument("--null-pattern", action="store_const", const=True, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit the model to dataset CSVs")
    _common(p_fit)
    p_fit.add_argument("--data", type=str, default=None, help="directory with y.csv, x1.csv, …")
    p_fit.add_argument("--method", type=str, default=None, choices=("cavi", "gibbs", "both"))
    p_fit.add_argument("--basis-kind", type=str, default=None, choices=("almon", "bspline"))
    p_fit.add_argument("--order", type=int, default=None)
    p_fit.add_argument("--level", type=float, default=None)
    p_fit.add_argument("--kappa", type=float, default=None)
    p_fit.add_argument("--tol", type=float, default=None)
    p_fit.add_argument("--max-iters", type=int, default=None)
    p_fit.add_argument("--init", type=str, default=None, choices=INIT_SCHEMES)
    p_fit.add_argument("--backend", type=str, default=None, choices=("python", "compiled"))
    p_fit.add_argument("--n-draws", type=int, default=None)
    p_fit.add_argument("--burn-in", type=int, default=None)
    p_fit.add_argument("--thin", type=int, default=None)
    _add_prior_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_mc = sub.add_parser("mc", help="replication study over named configurations")
    _common(p_mc)
    p_mc.add_argument("--configs", type=str, default=None, help="comma list of config ids, or 'all'")
    p_mc.add_argument("--reps", type=int, default=None)
    p_mc.add_argument("--methods", type=str, default=None, help="comma list: cavi,gibbs")
    p_mc.add_argument("--calibration", action="store_const", const=True, default=None)
    p_mc.add_argument("--kappas", type=str, default=None, help="comma list of inflation factors")
    p_mc.add_argument("--n-draws", type=int, default=None)
    p_mc.add_argument("--burn-in", type=int, default=None)
    p_mc.add_argument("--thin", type=int, default=None)
    p_mc.add_argument("--level", type=float, default=None)
    p_mc.add_argument("--kappa", type=float, default=None)
    _add_prior_flags(p_mc)
    p_mc.set_defaults(func=cmd_mc)

    p_fc = sub.add_parser("forecast", help="expanding-window realized-volatility comparison")
    _common(p_fc)
    p_fc.add_argument("--data", type=str, default=None, help="daily-returns CSV (date,return)")
    p_fc.add_argument("--models", type=str, default=None, help="comma list of model names")
    p_fc.add_argument("--initial-window", type=int, default=None)
    p_fc.add_argument("--n-lags", type=int, default=None)
    p_fc.add_argument("--n-predictors", type=int, default=None)
    p_fc.add_argument("--basis-kind", type=str, default=None, choices=("almon", "bspline"))
    p_fc.add_argument("--order", type=int, default=None)
    p_fc.add_argument("--baseline", type=str, default=None)
    p_fc.add_argument("--level", type=float, default=None)
    p_fc.add_argument("--kappa", type=float, default=None)
    p_fc.add_argument("--n-draws", type=int, default=None)
    p_fc.add_argument("--burn-in", type=int, default=None)
    p_fc.add_argument("--thin", type=int, default=None)
    _add_prior_flags(p_fc)
    p_fc.set_defaults(func=cmd_forecast)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed < 0 or args.seed > 2**64 - 1:
        print("error: --seed must fit in uint64", file=sys.stderr)
        return 1
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
