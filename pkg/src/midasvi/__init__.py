"""Variational and exact Bayesian inference for mixed-frequency regression.

The package fits linear regressions whose covariates are weighted sums of
many high-frequency lags, with each lag profile constrained to a low-order
functional family and normalized to sum to one.  Two inference engines share
one model definition: a fast coordinate-ascent variational approximation and
an exact block Gibbs sampler used as the reference.  Supporting modules
simulate benchmark datasets, run replication studies, and evaluate
realized-volatility forecasts.
"""
from ._backend import available_backends, backend_name
from .basis import (
    NullspaceReparam,
    ReducedRegressors,
    almon_basis,
    bspline_basis,
    lag_weights,
    make_basis,
    reduced_regressors,
    reparameterize,
)
from .cavi import (
    CaviFit,
    CaviOptions,
    coef_intervals,
    compute_elbo,
    credible_interval,
    fit_cavi,
    init_state,
    update_coef_block,
    update_noise_block,
    update_weight_block,
    weight_intervals,
)
from .dgp import (
    PROFILE_SHAPES,
    DgpConfig,
    SyntheticDataset,
    config_by_id,
    default_betas,
    default_profiles,
    make_profile,
    simulate,
    tier_configs,
)
from .forecast import (
    FORECAST_MODELS,
    DailyReturns,
    DmResult,
    ForecastRun,
    RvSeries,
    build_midas_rv_dataset,
    dm_test,
    expanding_window_forecast,
    forecast_metrics,
    har_rv_forecast,
    load_daily_returns,
    realized_volatility,
    simulate_daily_returns,
    write_daily_returns,
)
from .gibbs import (
    ChainSummary,
    GibbsChain,
    GibbsOptions,
    chain_summary,
    coef_conditional,
    ess,
    noise_conditional,
    run_gibbs,
    weight_conditional,
)
from .harness import (
    CalibrationRow,
    McResult,
    MetricsRow,
    RepResult,
    aggregate,
    calibration_sweep,
    mc_run,
    replication_seed,
    run_replication,
    speedup_table,
    write_fig_csvs,
    write_metrics_csv,
    write_metrics_json,
)
from .model import (
    GaussianBlock,
    InverseGammaBlock,
    MidasDataset,
    Predictor,
    Priors,
    VariationalState,
    parameter_names,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # backends
    "available_backends",
    "backend_name",
    # basis / reparameterization
    "NullspaceReparam",
    "ReducedRegressors",
    "almon_basis",
    "bspline_basis",
    "lag_weights",
    "make_basis",
    "reduced_regressors",
    "reparameterize",
    # model containers
    "GaussianBlock",
    "InverseGammaBlock",
    "MidasDataset",
    "Predictor",
    "Priors",
    "VariationalState",
    "parameter_names",
    # variational engine
    "CaviFit",
    "CaviOptions",
    "coef_intervals",
    "compute_elbo",
    "credible_interval",
    "fit_cavi",
    "init_state",
    "update_coef_block",
    "update_noise_block",
    "update_weight_block",
    "weight_intervals",
    # exact sampler
    "ChainSummary",
    "GibbsChain",
    "GibbsOptions",
    "chain_summary",
    "coef_conditional",
    "ess",
    "noise_conditional",
    "run_gibbs",
    "weight_conditional",
    # synthetic data
    "PROFILE_SHAPES",
    "DgpConfig",
    "SyntheticDataset",
    "config_by_id",
    "default_betas",
    "default_profiles",
    "make_profile",
    "simulate",
    "tier_configs",
    # replication harness
    "CalibrationRow",
    "McResult",
    "MetricsRow",
    "RepResult",
    "aggregate",
    "calibration_sweep",
    "mc_run",
    "replication_seed",
    "run_replication",
    "speedup_table",
    "write_fig_csvs",
    "write_metrics_csv",
    "write_metrics_json",
    # forecasting
    "FORECAST_MODELS",
    "DailyReturns",
    "DmResult",
    "ForecastRun",
    "RvSeries",
    "build_midas_rv_dataset",
    "dm_test",
    "expanding_window_forecast",
    "forecast_metrics",
    "har_rv_forecast",
    "load_daily_returns",
    "realized_volatility",
    "simulate_daily_returns",
    "write_daily_returns",
]
