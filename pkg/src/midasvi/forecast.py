"""Realized-volatility forecasting pipeline and benchmark models.

Builds monthly realized variance from daily returns, assembles the
mixed-frequency regression dataset (each predictor block holds the most
recent daily squared returns of one month, newest first), and evaluates
expanding-window one-step-ahead forecasts.  The forecast for month ``m``
is always formed from data of months strictly before ``m``: coefficients
are estimated on design rows paired with the next month's response, and
the forecast applies them to the latest complete row.

Benchmarks: a monthly heterogeneous-horizon autoregression (lag-1 level
plus quarterly and annual averages), first- and fourth-order
autoregressions, and the historical mean.  Forecast comparisons use the
squared-error loss differential with a heteroskedasticity- and
autocorrelation-robust variance.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .cavi import CaviOptions, fit_cavi
from .gibbs import GibbsOptions, run_gibbs
from .model import MidasDataset, Predictor, Priors

__all__ = [
    "FORECAST_MODELS",
    "DailyReturns",
    "RvSeries",
    "ForecastRun",
    "DmResult",
    "load_daily_returns",
    "write_daily_returns",
    "simulate_daily_returns",
    "realized_volatility",
    "build_midas_rv_dataset",
    "har_rv_forecast",
    "expanding_window_forecast",
    "dm_test",
    "forecast_metrics",
]

FORECAST_MODELS = ("midas_cavi", "midas_gibbs", "har_rv", "ar1", "ar4", "hist_avg")

HAR_MIN_MONTHS = 13
_HAR_RIDGE = 1e-8


@dataclass
class DailyReturns:
    """Daily return series with strictly increasing calendar dates."""

    dates: np.ndarray  # datetime64[D]
    returns: np.ndarray

    def __post_init__(self) -> None:
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.returns = np.asarray(self.returns, dtype=np.float64)
        if self.dates.shape != self.returns.shape or self.dates.ndim != 1:
            raise ValueError("dates and returns must be equal-length vectors")
        if self.dates.size == 0:
            raise ValueError("empty return series")
        if not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise ValueError("dates must be strictly increasing")
        if not np.all(np.isfinite(self.returns)):
            raise ValueError("returns must be finite")


@dataclass
class RvSeries:
    """Monthly realized variance (sum of squared daily returns) and its log."""

    months: np.ndarray  # datetime64[M]
    rv: np.ndarray
    log_rv: np.ndarray
    n_days: np.ndarray


def load_daily_returns(path) -> DailyReturns:
    """Read a two-column CSV ``date,return`` with ISO-8601 dates."""
    frame = pd.read_csv(path)
    if list(frame.columns) != ["date", "return"]:
        raise ValueError(
            f"expected columns ['date', 'return'], found {list(frame.columns)}"
        )
    dates = pd.to_datetime(frame["date"], format="ISO8601").to_numpy().astype("datetime64[D]")
    returns = frame["return"].to_numpy(dtype=np.float64)
    return DailyReturns(dates=dates, returns=returns)


def write_daily_returns(daily: DailyReturns, path) -> None:
    """Write the ``date,return`` CSV format read by ``load_daily_returns``."""
    frame = pd.DataFrame(
        {
            "date": np.datetime_as_string(daily.dates, unit="D"),
            "return": [f"{r:.17g}" for r in daily.returns],
        }
    )
    frame.to_csv(path, index=False)


def simulate_daily_returns(
    n_months: int = 300,
    seed: int = 0,
    *,
    start_month: str = "2000-01",
    mean_days: int = 21,
    vol_persistence: float = 0.95,
    vol_innovation_sd: float = 0.25,
    daily_scale: float = 0.01,
) -> DailyReturns:
    """Simulate a daily return panel with persistent monthly volatility.

    Monthly log-variance follows a stationary first-order autoregression;
    daily returns within a month are centered Gaussian at that month's
    volatility.  Trading-day counts vary around ``mean_days`` so month
    lengths differ, exercising the tail-padding logic downstream.
    """
    if n_months < 1:
        raise ValueError("n_months must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    stat_sd = vol_innovation_sd / math.sqrt(1.0 - vol_persistence**2)
    h = rng.standard_normal() * stat_sd
    first = np.datetime64(start_month, "M")
    dates, returns = [], []
    for m in range(n_months):
        n_days = int(rng.integers(mean_days - 2, mean_days + 3))
        sd = daily_scale * math.exp(0.5 * h)
        r = sd * rng.standard_normal(n_days)
        month_start = (first + m).astype("datetime64[D]")
        dates.append(month_start + np.arange(n_days))
        returns.append(r)
        h = vol_persistence * h + vol_innovation_sd * rng.standard_normal()
    return DailyReturns(
        dates=np.concatenate(dates), returns=np.concatenate(returns)
    )


def realized_volatility(daily: DailyReturns) -> RvSeries:
    """Sum squared daily returns within each calendar month.

    Months whose realized variance is nonpositive (an all-zero month)
    are excluded with a warning, since the log transform is undefined
    there; a calendar gap between observed months also warns.
    """
    months = daily.dates.astype("datetime64[M]")
    uniq, inverse = np.unique(months, return_inverse=True)
    r2 = daily.returns**2
    rv = np.zeros(uniq.size)
    np.add.at(rv, inverse, r2)
    n_days = np.bincount(inverse, minlength=uniq.size)
    if uniq.size > 1 and np.any(np.diff(uniq) != np.timedelta64(1, "M")):
        warnings.warn("calendar gap between observed months", stacklevel=2)
    keep = rv > 0.0
    if not keep.all():
        dropped = ", ".join(str(m) for m in uniq[~keep])
        warnings.warn(
            f"excluding months with nonpositive realized variance: {dropped}",
            stacklevel=2,
        )
    uniq, rv, n_days = uniq[keep], rv[keep], n_days[keep]
    if uniq.size == 0:
        raise ValueError("no month with positive realized variance")
    return RvSeries(months=uniq, rv=rv, log_rv=np.log(rv), n_days=n_days)


def build_midas_rv_dataset(
    daily: DailyReturns,
    *,
    n_lags: int = 22,
    n_predictors: int = 3,
    basis_kind: str = "almon",
    order: int = 3,
    rv: RvSeries | None = None,
) -> tuple[MidasDataset, np.ndarray]:
    """Assemble the log-realized-variance regression from daily returns.

    The response at month ``t`` is log RV of month ``t``; predictor block
    ``j`` (1-based) holds the ``n_lags`` most recent daily squared
    returns up to the last trading day of month ``t − j + 1``, newest
    first.  Months shorter than ``n_lags`` trading days borrow the tail
    of the preceding month.  Leading months without enough history are
    dropped.  Returns the dataset and the months its rows correspond to.
    """
    if rv is None:
        rv = realized_volatility(daily)
    r2 = daily.returns**2
    day_months = daily.dates.astype("datetime64[M]")
    last_index: dict[np.datetime64, int] = {}
    for idx, m in enumerate(day_months):
        last_index[m] = idx
    usable, block_rows = [], []
    for m_idx in range(rv.months.size):
        rows = []
        for j in range(1, n_predictors + 1):
            target_month = rv.months[m_idx] - np.timedelta64(j - 1, "M")
            end = last_index.get(target_month)
            if end is None or end - n_lags + 1 < 0:
                rows = []
                break
            rows.append(r2[end - n_lags + 1 : end + 1][::-1].copy())
        if rows:
            usable.append(m_idx)
            block_rows.append(rows)
    if len(usable) < 2:
        raise ValueError("not enough history to build any regression rows")
    usable_arr = np.asarray(usable)
    y = rv.log_rv[usable_arr]
    predictors = []
    for j in range(n_predictors):
        block = np.vstack([rows[j] for rows in block_rows])
        predictors.append(Predictor(block, basis_kind, order))
    return MidasDataset(y, predictors), rv.months[usable_arr]


# =============================================================================
# Benchmark models
# =============================================================================


def _har_design(series: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Regression rows for the heterogeneous-horizon benchmark.

    Row ``t`` (t ≥ 12) regresses ``series[t]`` on an intercept, the lag-1
    value, the mean of the last 3 values, and the mean of the last 12.
    """
    n = series.size
    rows, targets = [], []
    for t in range(12, n):
        rows.append(
            (
                1.0,
                series[t - 1],
                series[t - 3 : t].mean(),
                series[t - 12 : t].mean(),
            )
        )
        targets.append(series[t])
    return np.asarray(rows), np.asarray(targets)


def har_rv_forecast(training: np.ndarray, return_flag: bool = False):
    """One-step forecast from the heterogeneous-horizon autoregression.

    Needs at least 13 training observations.  A rank-deficient design
    (e.g. a constant series) falls back to a tiny ridge penalty; the
    fallback can be surfaced via ``return_flag``.
    """
    training = np.asarray(training, dtype=np.float64)
    if training.size < HAR_MIN_MONTHS:
        raise ValueError(
            f"need at least {HAR_MIN_MONTHS} observations, got {training.size}"
        )
    X, y = _har_design(training)
    coefs, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    ridge = rank < X.shape[1]
    if ridge:
        gram = X.T @ X + _HAR_RIDGE * np.eye(X.shape[1])
        coefs = np.linalg.solve(gram, X.T @ y)
    tail = np.array(
        (1.0, training[-1], training[-3:].mean(), training[-12:].mean())
    )
    forecast = float(tail @ coefs)
    if return_flag:
        return forecast, ridge
    return forecast


def _ar_forecast(training: np.ndarray, order: int) -> float:
    """One-step forecast from an order-``order`` autoregression with intercept."""
    n = training.size
    if n < order + 2:
        raise ValueError(f"need at least {order + 2} observations")
    X = np.ones((n - order, order + 1))
    for lag in range(1, order + 1):
        X[:, lag] = training[order - lag : n - lag]
    y = training[order:]
    coefs, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        gram = X.T @ X + _HAR_RIDGE * np.eye(X.shape[1])
        coefs = np.linalg.solve(gram, X.T @ y)
    tail = np.ones(order + 1)
    for lag in range(1, order + 1):
        tail[lag] = training[n - lag]
    return float(tail @ coefs)


# =============================================================================
# Expanding-window evaluation
# =============================================================================


@dataclass
class ForecastRun:
    """One model's expanding-window forecasts on the evaluation months."""

    model: str
    months: np.ndarray  # datetime64[M] of forecast targets
    realized: np.ndarray  # log RV actually observed
    forecasts: np.ndarray  # NaN marks a failed fit for that month
    pred_sd: np.ndarray  # predictive sd where available, else NaN
    fit_times: np.ndarray

    def errors(self) -> np.ndarray:
        return self.forecasts - self.realized


def _design_row_at_means(
    dataset: MidasDataset, row: int, weight_means: list[np.ndarray]
) -> np.ndarray:
    """Design vector (1, aggregates) at the given weight posterior means."""
    g = np.empty(dataset.n_predictors + 1)
    g[0] = 1.0
    offsets = dataset.free_offsets
    for j in range(dataset.n_predictors):
        free = dataset.free_mat[row, offsets[j] : offsets[j + 1]]
        g[j + 1] = dataset.fixed_mat[row, j] + free @ weight_means[j]
    return g


def _subset_dataset(dataset: MidasDataset, y: np.ndarray, rows: slice) -> MidasDataset:
    preds = [
        Predictor(np.asarray(p.lags)[rows], p.basis_kind, p.order)
        for p in dataset.predictors
    ]
    return MidasDataset(y, preds)


def expanding_window_forecast(
    dataset: MidasDataset,
    months: np.ndarray,
    model: str,
    *,
    initial_window: int = 120,
    priors: Priors | None = None,
    cavi_options: CaviOptions | None = None,
    gibbs_options: GibbsOptions | None = None,
    seed: int = 0,
) -> ForecastRun:
    """One-step-ahead expanding-window forecasts for one model.

    For each target month ``m`` (from ``initial_window`` onward), the
    model is estimated on information through month ``m − 1`` and
    forecasts ``log RV_m``.  The mixed-frequency models pair each design
    row with the following month's response during estimation, then apply
    the estimates to the latest complete row — so the forecast never
    touches month ``m``'s own daily returns.  A failed fit yields a NaN
    forecast for that month.  Sampler seeds derive from ``seed`` and the
    month index, keeping the run deterministic.
    """
    if model not in FORECAST_MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {FORECAST_MODELS}")
    y = dataset.y
    n = y.size
    if months.shape != (n,):
        raise ValueError("months must align with dataset rows")
    if initial_window < 2:
        raise ValueError("initial_window must be at least 2")
    if initial_window >= n:
        raise ValueError(
            f"initial_window {initial_window} leaves no evaluation months (n={n})"
        )
    if model == "har_rv" and initial_window < HAR_MIN_MONTHS:
        raise ValueError(
            f"the heterogeneous-horizon benchmark needs initial_window >= {HAR_MIN_MONTHS}"
        )
    targets = list(range(initial_window, n))
    forecasts = np.full(len(targets), np.nan)
    pred_sd = np.full(len(targets), np.nan)
    fit_times = np.zeros(len(targets))
    for k, m in enumerate(targets):
        t0 = time.perf_counter()
        try:
            if model in ("midas_cavi", "midas_gibbs"):
                sub = _subset_dataset(dataset, y[1:m], slice(0, m - 1))
                if model == "midas_cavi":
                    fit = fit_cavi(sub, priors=priors, options=cavi_options)
                    coef_mean = fit.coef.mean
                    coef_cov = fit.coef.cov
                    wmeans = [b.mean for b in fit.weights]
                    noise_mean = fit.noise.mean()
                else:
                    opts = gibbs_options if gibbs_options is not None else GibbsOptions()
                    origin_seed = int(
                        np.random.SeedSequence(seed, spawn_key=(m,)).generate_state(
                            1, np.uint64
                        )[0]
                    )
                    chain = run_gibbs(sub, priors=priors, options=replace(opts, seed=origin_seed))
                    coef_mean = chain.coef_draws.mean(axis=0)
                    coef_cov = np.cov(chain.coef_draws.T, ddof=1)
                    wmeans = [wd.mean(axis=0) for wd in chain.weight_draws]
                    noise_mean = float(chain.sigma2_draws.mean())
                g = _design_row_at_means(dataset, m - 1, wmeans)
                forecasts[k] = g @ coef_mean
                pred_sd[k] = math.sqrt(noise_mean + g @ coef_cov @ g)
            elif model == "har_rv":
                forecasts[k] = har_rv_forecast(y[:m])
            elif model == "ar1":
                forecasts[k] = _ar_forecast(y[:m], 1)
            elif model == "ar4":
                forecasts[k] = _ar_forecast(y[:m], 4)
            else:
                forecasts[k] = float(y[:m].mean())
        except Exception as exc:  # noqa: BLE001 - missing forecast, not fatal
            warnings.warn(
                f"{model} failed at month {months[m]}: {exc}", stacklevel=2
            )
        fit_times[k] = time.perf_counter() - t0
    return ForecastRun(
        model=model,
        months=months[targets],
        realized=y[np.asarray(targets)],
        forecasts=forecasts,
        pred_sd=pred_sd,
        fit_times=fit_times,
    )


# =============================================================================
# Forecast comparison
# =============================================================================


@dataclass(frozen=True)
class DmResult:
    """Equal-predictive-accuracy test on a squared-error loss differential."""

    statistic: float
    p_value: float


def dm_test(errors_a: np.ndarray, errors_b: np.ndarray, max_lag: int = 4) -> DmResult:
    """Test equal predictive accuracy of two aligned forecast-error series.

    The loss differential is e_a² − e_b²; its mean is studentized with a
    Bartlett-kernel autocorrelation-robust variance using ``max_lag``
    lags, and the p-value is two-sided standard normal.  A zero-variance
    differential (identical forecasts) returns statistic 0, p-value 1.
    """
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("error series must be equal-length vectors")
    n = a.size
    if n < 10:
        raise ValueError("need at least 10 aligned forecasts")
    if max_lag < 0:
        raise ValueError("max_lag must be nonnegative")
    d = a**2 - b**2
    dbar = d.mean()
    c = d - dbar
    s = float(c @ c) / n
    for lag in range(1, min(max_lag, n - 1) + 1):
        gamma = float(c[lag:] @ c[:-lag]) / n
        s += 2.0 * (1.0 - lag / (max_lag + 1.0)) * gamma
    if s <= 0.0:
        return DmResult(statistic=0.0, p_value=1.0)
    stat = dbar / math.sqrt(s / n)
    p = math.erfc(abs(stat) / math.sqrt(2.0))
    return DmResult(statistic=float(stat), p_value=float(p))


def forecast_metrics(runs: list[ForecastRun], baseline: str) -> list[dict]:
    """Accuracy table over the months where every run produced a forecast.

    Reports squared and absolute error means, the ratio to the baseline
    model's squared error, the equal-accuracy test against the baseline,
    and mean per-month fit time.  The baseline compared with itself gives
    statistic 0 and p-value 1 by construction.
    """
    if not runs:
        raise ValueError("no forecast runs given")
    names = [run.model for run in runs]
    if baseline not in names:
        raise ValueError(f"baseline {baseline!r} not among runs {names}")
    months0 = runs[0].months
    for run in runs[1:]:
        if not np.array_equal(run.months, months0):
            raise ValueError("runs cover different evaluation months")
    valid = np.ones(months0.size, dtype=bool)
    for run in runs:
        valid &= np.isfinite(run.forecasts)
    if valid.sum() < 10:
        raise ValueError("fewer than 10 commonly forecast months")
    base = next(run for run in runs if run.model == baseline)
    base_err = base.errors()[valid]
    base_mse = float(np.mean(base_err**2))
    table = []
    for run in runs:
        err = run.errors()[valid]
        mse = float(np.mean(err**2))
        dm = dm_test(err, base_err)
        table.append(
            {
                "model": run.model,
                "n_months": int(valid.sum()),
                "mse": mse,
                "mae": float(np.mean(np.abs(err))),
                "rel_mse": mse / base_mse if base_mse > 0 else math.nan,
                "dm_stat": dm.statistic,
                "dm_p": dm.p_value,
                "mean_time": float(run.fit_times.mean()),
            }
        )
    return table
