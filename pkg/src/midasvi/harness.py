"""Replicated-experiment harness: seeding, metrics, timing, and ESS tables.

Runs both inference engines over simulated datasets, collects point
estimates and credible intervals per replication, and aggregates the
evaluation metrics (absolute bias, pooled RMSE, 95% coverage, wall time,
minimum effective sample size, speedup).  Aggregation is a deterministic
reduction over replication index, so the metrics table is bitwise
reproducible from (configuration list, master seed) regardless of thread
count — wall-time columns excepted, since they measure the machine.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .cavi import CaviOptions, coef_intervals, fit_cavi, weight_intervals
from .dgp import DgpConfig, simulate
from .gibbs import GibbsOptions, chain_summary, run_gibbs
from .model import Priors

__all__ = [
    "MethodRecord",
    "RepResult",
    "MetricsRow",
    "McResult",
    "CalibrationRow",
    "replication_seed",
    "run_replication",
    "mc_run",
    "aggregate",
    "speedup_table",
    "calibration_sweep",
    "minimum_ess_values",
    "write_metrics_csv",
    "write_metrics_json",
    "write_fig_csvs",
]

METHODS = ("cavi", "gibbs")

# Predictor counts above this run without the sampler unless a method list
# is forced explicitly (the sampler's per-scan cost grows with J while the
# comparison adds little at the largest sizes).
GIBBS_MAX_PREDICTORS = 10


def _fmt(value: float) -> str:
    """Format one number at full precision for CSV round-trips."""
    return f"{value:.17g}"


def _config_key(config_id: str) -> int:
    """Stable 32-bit key for a configuration name (seed derivation)."""
    digest = hashlib.blake2s(config_id.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def replication_seed(master_seed: int, config_id: str, rep: int) -> int:
    """Derive the seed of one replication from the master seed.

    Keyed by (configuration name, replication index) through a splittable
    seed sequence, so adding configurations or replications never shifts
    the seeds of existing ones.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=(_config_key(config_id), rep))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class MethodRecord:
    """One engine's estimates, intervals, and cost on one replication."""

    method: str
    coef_mean: np.ndarray | None = None
    coef_lo: np.ndarray | None = None
    coef_hi: np.ndarray | None = None
    coef_sd: np.ndarray | None = None
    weight_means: list[np.ndarray] = field(default_factory=list)
    weight_sds: list[np.ndarray] = field(default_factory=list)
    weight_lo: list[np.ndarray] = field(default_factory=list)
    weight_hi: list[np.ndarray] = field(default_factory=list)
    sigma2_mean: float = math.nan
    wall_time: float = math.nan
    n_sweeps: int = 0
    converged: bool = False
    final_elbo: float = math.nan
    min_ess: float = math.nan
    error: str | None = None


@dataclass
class RepResult:
    """Truth and per-method records for one replication."""

    config_id: str
    rep: int
    seed: int
    beta_true: np.ndarray
    wc_true: list[np.ndarray]
    alpha_true: float
    sigma2_true: float
    records: dict[str, MethodRecord]


@dataclass
class MetricsRow:
    """Aggregated evaluation metrics for one (configuration, method)."""

    config_id: str
    method: str
    n_reps: int
    bias_beta: float
    se_bias_beta: float
    rmse_beta: float
    se_rmse_beta: float
    cov95_beta: float
    se_cov95_beta: float
    bias_eta: float
    se_bias_eta: float
    cov95_eta: float
    se_cov95_eta: float
    mean_time: float
    se_time: float
    min_ess: float
    speedup: float

    def to_dict(self) -> dict:
        return {
            "config_id": self.config_id,
            "method": self.method,
            "n_reps": self.n_reps,
            "bias_beta": self.bias_beta,
            "se_bias_beta": self.se_bias_beta,
            "rmse_beta": self.rmse_beta,
            "se_rmse_beta": self.se_rmse_beta,
            "cov95_beta": self.cov95_beta,
            "se_cov95_beta": self.se_cov95_beta,
            "bias_eta": self.bias_eta,
            "se_bias_eta": self.se_bias_eta,
            "cov95_eta": self.cov95_eta,
            "se_cov95_eta": self.se_cov95_eta,
            "mean_time": self.mean_time,
            "se_time": self.se_time,
            "min_ess": self.min_ess,
            "speedup": self.speedup,
        }


@dataclass
class McResult:
    """Everything a replication study produced."""

    master_seed: int
    n_reps: int
    configs: list[DgpConfig]
    rows: list[MetricsRow]
    rep_results: dict[str, list[RepResult]]


@dataclass(frozen=True)
class CalibrationRow:
    """Coverage of the active impact coefficients at one inflation factor."""

    kappa: float
    coverage: float
    se: float


def run_replication(
    config: DgpConfig,
    rep_seed: int,
    methods: tuple[str, ...] = METHODS,
    *,
    priors: Priors | None = None,
    cavi_options: CaviOptions | None = None,
    gibbs_options: GibbsOptions | None = None,
    interval_level: float = 0.95,
    interval_kappa: float = 1.0,
) -> RepResult:
    """Simulate one dataset and fit each requested engine on it.

    The replication seed is split into one stream for data generation and
    an independent one for the sampler, so chain noise never correlates
    with the dataset.  A failing engine is recorded in its
    ``MethodRecord.error`` and does not abort the replication.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
    data_seed, sampler_seed = (
        int(s) for s in np.random.SeedSequence(rep_seed).generate_state(2, np.uint64)
    )
    synth = simulate(config, seed=data_seed)
    records: dict[str, MethodRecord] = {}
    if "cavi" in methods:
        rec = MethodRecord(method="cavi")
        try:
            t0 = time.perf_counter()
            fit = fit_cavi(synth.dataset, priors=priors, options=cavi_options)
            rec.wall_time = time.perf_counter() - t0
            lo, hi = coef_intervals(fit, level=interval_level, kappa=interval_kappa)
            rec.coef_mean = fit.coef.mean.copy()
            rec.coef_sd = fit.coef.sd()
            rec.coef_lo, rec.coef_hi = lo, hi
            rec.weight_means = [b.mean.copy() for b in fit.weights]
            rec.weight_sds = [b.sd() for b in fit.weights]
            for j in range(len(fit.weights)):
                wlo, whi = weight_intervals(
                    fit, j, level=interval_level, kappa=interval_kappa
                )
                rec.weight_lo.append(wlo)
                rec.weight_hi.append(whi)
            rec.sigma2_mean = fit.noise.mean()
            rec.n_sweeps = fit.n_sweeps
            rec.converged = fit.converged
            rec.final_elbo = fit.final_elbo
        except Exception as exc:  # noqa: BLE001 - per-method isolation
            rec.error = f"{type(exc).__name__}: {exc}"
        records["cavi"] = rec
    if "gibbs" in methods:
        rec = MethodRecord(method="gibbs")
        try:
            opts = gibbs_options if gibbs_options is not None else GibbsOptions()
            opts = replace(opts, seed=sampler_seed)
            t0 = time.perf_counter()
            chain = run_gibbs(synth.dataset, priors=priors, options=opts)
            rec.wall_time = time.perf_counter() - t0
            alpha_q = (1.0 - interval_level) / 2.0
            draws = chain.coef_draws
            rec.coef_mean = draws.mean(axis=0)
            rec.coef_sd = draws.std(axis=0, ddof=1)
            rec.coef_lo = np.quantile(draws, alpha_q, axis=0)
            rec.coef_hi = np.quantile(draws, 1.0 - alpha_q, axis=0)
            for wd in chain.weight_draws:
                rec.weight_means.append(wd.mean(axis=0))
                rec.weight_sds.append(wd.std(axis=0, ddof=1))
                rec.weight_lo.append(np.quantile(wd, alpha_q, axis=0))
                rec.weight_hi.append(np.quantile(wd, 1.0 - alpha_q, axis=0))
            rec.sigma2_mean = float(chain.sigma2_draws.mean())
            rec.min_ess = chain_summary(chain, level=interval_level).min_ess
        except Exception as exc:  # noqa: BLE001 - per-method isolation
            rec.error = f"{type(exc).__name__}: {exc}"
        records["gibbs"] = rec
    return RepResult(
        config_id=config.config_id,
        rep=-1,
        seed=rep_seed,
        beta_true=np.asarray(config.beta_true, dtype=np.float64),
        wc_true=synth.wc_true,
        alpha_true=config.alpha_true,
        sigma2_true=config.sigma2_true,
        records=records,
    )


def _default_methods(config: DgpConfig) -> tuple[str, ...]:
    if config.n_predictors > GIBBS_MAX_PREDICTORS:
        return ("cavi",)
    return METHODS


def aggregate(results: list[RepResult], method: str) -> MetricsRow:
    """Reduce one method's replication records to a metrics row.

    Bias is the mean over active coordinates of the absolute value of the
    per-coordinate mean signed error (reported positive); RMSE pools
    squared errors over active coordinates; coverage is the fraction of
    (replication, coordinate) pairs whose interval contains the truth.
    Weight-coefficient metrics are restricted to predictors with a nonzero
    impact coefficient, whose aggregates carry signal.  Standard errors
    come from replication-level variation.
    """
    if len(results) < 2:
        raise ValueError("aggregation needs at least 2 replications")
    ok = [r for r in results if method in r.records and r.records[method].error is None]
    if len(ok) < 2:
        raise ValueError(f"fewer than 2 successful replications for {method!r}")
    active = np.flatnonzero(ok[0].beta_true)
    if active.size == 0:
        raise ValueError("no active impact coefficients to aggregate over")
    R = len(ok)
    errs = np.empty((R, active.size))
    hits_beta = np.empty((R, active.size))
    eta_err_rows, eta_hit_rows = [], []
    times = np.empty(R)
    ess = np.full(R, math.nan)
    for i, r in enumerate(ok):
        rec = r.records[method]
        errs[i] = rec.coef_mean[1:][active] - r.beta_true[active]
        hits_beta[i] = (
            (rec.coef_lo[1:][active] <= r.beta_true[active])
            & (r.beta_true[active] <= rec.coef_hi[1:][active])
        )
        e_row, h_row = [], []
        for j in active:
            tgt = r.wc_true[j]
            e_row.append(rec.weight_means[j] - tgt)
            h_row.append((rec.weight_lo[j] <= tgt) & (tgt <= rec.weight_hi[j]))
        eta_err_rows.append(np.concatenate(e_row))
        eta_hit_rows.append(np.concatenate(h_row))
        times[i] = rec.wall_time
        ess[i] = rec.min_ess
    eta_errs = np.vstack(eta_err_rows)
    eta_hits = np.vstack(eta_hit_rows)

    def _bias_and_se(e: np.ndarray) -> tuple[float, float]:
        per_coord = e.mean(axis=0)
        bias = float(np.mean(np.abs(per_coord)))
        var_means = e.var(axis=0, ddof=1) / e.shape[0]
        se = float(np.sqrt(var_means.sum()) / e.shape[1])
        return bias, se

    def _cov_and_se(h: np.ndarray) -> tuple[float, float]:
        per_rep = h.mean(axis=1)
        return float(h.mean()), float(per_rep.std(ddof=1) / math.sqrt(h.shape[0]))

    bias_beta, se_bias_beta = _bias_and_se(errs)
    bias_eta, se_bias_eta = _bias_and_se(eta_errs)
    cov_beta, se_cov_beta = _cov_and_se(hits_beta)
    cov_eta, se_cov_eta = _cov_and_se(eta_hits)
    msq = (errs**2).mean(axis=1)
    rmse = float(np.sqrt(msq.mean()))
    se_rmse = float(
        msq.std(ddof=1) / math.sqrt(R) / (2.0 * rmse) if rmse > 0 else 0.0
    )
    return MetricsRow(
        config_id=ok[0].config_id,
        method=method,
        n_reps=R,
        bias_beta=bias_beta,
        se_bias_beta=se_bias_beta,
        rmse_beta=rmse,
        se_rmse_beta=se_rmse,
        cov95_beta=cov_beta,
        se_cov95_beta=se_cov_beta,
        bias_eta=bias_eta,
        se_bias_eta=se_bias_eta,
        cov95_eta=cov_eta,
        se_cov95_eta=se_cov_eta,
        mean_time=float(times.mean()),
        se_time=float(times.std(ddof=1) / math.sqrt(R)),
        min_ess=float(np.nanmean(ess)) if np.isfinite(ess).any() else math.nan,
        speedup=math.nan,
    )


def mc_run(
    configs: list[DgpConfig],
    *,
    reps: int = 100,
    methods: tuple[str, ...] | None = None,
    master_seed: int = 0,
    threads: int = 1,
    priors: Priors | None = None,
    cavi_options: CaviOptions | None = None,
    gibbs_options: GibbsOptions | None = None,
    interval_level: float = 0.95,
    interval_kappa: float = 1.0,
) -> McResult:
    """Run a replication study over several configurations.

    ``methods=None`` fits both engines except on configurations with more
    than ``GIBBS_MAX_PREDICTORS`` predictors, which drop the sampler;
    passing a method tuple forces it everywhere.  Replications may execute
    on a thread pool; results are reduced in replication order, so
    everything except wall-time columns is independent of ``threads``.
    """
    if reps < 2:
        raise ValueError("reps must be at least 2")
    if threads < 1:
        raise ValueError("threads must be at least 1")
    jobs = []
    for config in configs:
        mset = methods if methods is not None else _default_methods(config)
        for rep in range(reps):
            jobs.append((config, mset, rep))

    def _one(job) -> RepResult:
        config, mset, rep = job
        seed = replication_seed(master_seed, config.config_id, rep)
        result = run_replication(
            config,
            seed,
            mset,
            priors=priors,
            cavi_options=cavi_options,
            gibbs_options=gibbs_options,
            interval_level=interval_level,
            interval_kappa=interval_kappa,
        )
        result.rep = rep
        return result

    if threads == 1:
        outputs = [_one(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(_one, jobs))
    rep_results: dict[str, list[RepResult]] = {}
    for config in configs:
        rep_results[config.config_id] = []
    for result in outputs:
        rep_results[result.config_id].append(result)
    for group in rep_results.values():
        group.sort(key=lambda r: r.rep)
    rows: list[MetricsRow] = []
    for config in configs:
        group = rep_results[config.config_id]
        mset = methods if methods is not None else _default_methods(config)
        config_rows = {m: aggregate(group, m) for m in mset}
        if "cavi" in config_rows and "gibbs" in config_rows:
            cavi_t = config_rows["cavi"].mean_time
            if cavi_t > 0:
                config_rows["cavi"].speedup = config_rows["gibbs"].mean_time / cavi_t
        rows.extend(config_rows[m] for m in mset)
    return McResult(
        master_seed=master_seed,
        n_reps=reps,
        configs=list(configs),
        rows=rows,
        rep_results=rep_results,
    )


def speedup_table(rows: list[MetricsRow]) -> list[dict]:
    """Per-configuration mean-time comparison of the two engines.

    Configurations missing either engine are omitted.
    """
    by_config: dict[str, dict[str, MetricsRow]] = {}
    for row in rows:
        by_config.setdefault(row.config_id, {})[row.method] = row
    table = []
    for config_id, pair in by_config.items():
        if "cavi" not in pair or "gibbs" not in pair:
            continue
        cavi_t = pair["cavi"].mean_time
        gibbs_t = pair["gibbs"].mean_time
        table.append(
            {
                "config_id": config_id,
                "cavi_time": cavi_t,
                "gibbs_time": gibbs_t,
                "speedup": gibbs_t / cavi_t if cavi_t > 0 else math.nan,
            }
        )
    return table


def minimum_ess_values(result: McResult, config_id: str) -> np.ndarray:
    """Per-replication sampler minimum-ESS values for one configuration."""
    values = [
        r.records["gibbs"].min_ess
        for r in result.rep_results[config_id]
        if "gibbs" in r.records and r.records["gibbs"].error is None
    ]
    return np.asarray(values, dtype=np.float64)


def calibration_sweep(
    config: DgpConfig,
    kappas: list[float],
    reps: int,
    *,
    master_seed: int = 0,
    priors: Priors | None = None,
    cavi_options: CaviOptions | None = None,
    interval_level: float = 0.95,
) -> list[CalibrationRow]:
    """Coverage of active impact coefficients versus interval inflation.

    Each replication is fit once; every inflation factor reuses the same
    posterior means and standard deviations, so coverage is exactly
    nondecreasing in the factor (nested intervals) and the factor-one row
    reproduces the uncalibrated coverage bit for bit.
    """
    if not kappas:
        raise ValueError("kappas must be nonempty")
    if any(k < 1.0 for k in kappas):
        raise ValueError("inflation factors must be >= 1")
    z = float(norm.ppf(0.5 + interval_level / 2.0))
    active = np.flatnonzero(np.asarray(config.beta_true))
    abs_err, sds = [], []
    for rep in range(reps):
        seed = replication_seed(master_seed, config.config_id, rep)
        data_seed = int(np.random.SeedSequence(seed).generate_state(2, np.uint64)[0])
        synth = simulate(config, seed=data_seed)
        fit = fit_cavi(synth.dataset, priors=priors, options=cavi_options)
        err = fit.coef.mean[1:][active] - np.asarray(config.beta_true)[active]
        abs_err.append(np.abs(err))
        sds.append(fit.coef.sd()[1:][active])
    abs_err_arr = np.vstack(abs_err)
    sd_arr = np.vstack(sds)
    out = []
    for kappa in kappas:
        hits = abs_err_arr <= z * kappa * sd_arr
        per_rep = hits.mean(axis=1)
        out.append(
            CalibrationRow(
                kappa=float(kappa),
                coverage=float(hits.mean()),
                se=float(per_rep.std(ddof=1) / math.sqrt(reps)),
            )
        )
    return out


# =============================================================================
# Emitters
# =============================================================================

_METRICS_COLUMNS = [
    "config_id",
    "method",
    "n_reps",
    "bias_beta",
    "se_bias_beta",
    "rmse_beta",
    "se_rmse_beta",
    "cov95_beta",
    "se_cov95_beta",
    "bias_eta",
    "se_bias_eta",
    "cov95_eta",
    "se_cov95_eta",
    "mean_time",
    "se_time",
    "min_ess",
    "speedup",
]


def write_metrics_csv(rows: list[MetricsRow], path) -> None:
    """One metrics row per line, full-precision numbers."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_METRICS_COLUMNS)
        for row in rows:
            d = row.to_dict()
            out = []
            for col in _METRICS_COLUMNS:
                v = d[col]
                out.append(_fmt(v) if isinstance(v, float) else str(v))
            writer.writerow(out)


def write_metrics_json(rows: list[MetricsRow], path) -> None:
    with open(path, "w") as fh:
        json.dump([row.to_dict() for row in rows], fh, indent=2, allow_nan=True)
        fh.write("\n")


def write_fig_csvs(result: McResult, out_dir) -> list[str]:
    """Plot-ready CSVs: speedup vs J, min-ESS vs J, coverage vs T.

    Emits only the curves the result can support; returns the file names
    written.
    """
    import os

    written = []
    by_config: dict[str, dict[str, MetricsRow]] = {}
    for row in result.rows:
        by_config.setdefault(row.config_id, {})[row.method] = row
    dims = {c.config_id: (c.n_predictors, c.n_obs) for c in result.configs}

    speed_rows = []
    for config_id, pair in by_config.items():
        if "cavi" in pair and "gibbs" in pair and math.isfinite(pair["cavi"].speedup):
            speed_rows.append((dims[config_id][0], config_id, pair["cavi"].speedup))
    if speed_rows:
        speed_rows.sort()
        path = os.path.join(out_dir, "fig_speedup.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n_predictors", "config_id", "speedup"])
            for n_pred, config_id, speedup in speed_rows:
                writer.writerow([n_pred, config_id, _fmt(speedup)])
        written.append("fig_speedup.csv")

    ess_rows = []
    for config_id, pair in by_config.items():
        if "gibbs" not in pair:
            continue
        values = minimum_ess_values(result, config_id)
        if values.size:
            ess_rows.append(
                (
                    dims[config_id][0],
                    config_id,
                    float(values.mean()),
                    float(np.median(values)),
                )
            )
    if ess_rows:
        ess_rows.sort()
        path = os.path.join(out_dir, "fig_ess.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["n_predictors", "config_id", "mean_min_ess", "median_min_ess"]
            )
            for n_pred, config_id, mean_e, med_e in ess_rows:
                writer.writerow([n_pred, config_id, _fmt(mean_e), _fmt(med_e)])
        written.append("fig_ess.csv")

    cov_rows = []
    for config_id, pair in by_config.items():
        if "cavi" not in pair:
            continue
        cov_rows.append(
            (
                dims[config_id][1],
                config_id,
                pair["cavi"].cov95_beta,
                pair["cavi"].cov95_eta,
            )
        )
    if cov_rows:
        cov_rows.sort()
        path = os.path.join(out_dir, "fig_coverage.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n_obs", "config_id", "cov95_beta", "cov95_eta"])
            for n_obs, config_id, cb, ce in cov_rows:
                writer.writerow([n_obs, config_id, _fmt(cb), _fmt(ce)])
        written.append("fig_coverage.csv")
    return written
