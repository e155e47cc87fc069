"""Coordinate-ascent mean-field fitting for the MIDAS regression model.

``fit_cavi`` drives full update sweeps through the selected kernel backend
until the objective stabilizes.  The single-block operations
(:func:`update_weight_block`, :func:`update_coef_block`,
:func:`update_noise_block`, :func:`compute_elbo`) are plain-numpy
transcriptions of the same closed-form updates, kept deliberately separate
from the packed kernels so each route can verify the other.
:func:`credible_interval` maps a fitted state to (optionally inflated)
posterior intervals.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import invgamma, norm

from ._backend import get_backend
from .model import (
    GaussianBlock,
    InverseGammaBlock,
    MidasDataset,
    Priors,
    VariationalState,
    digamma,
    expected_design_moments,
)

__all__ = [
    "CaviOptions",
    "CaviFit",
    "init_state",
    "fit_cavi",
    "uniform_aggregates",
    "update_weight_block",
    "update_coef_block",
    "update_noise_block",
    "compute_elbo",
    "credible_interval",
    "coef_intervals",
    "weight_intervals",
]

LOG_2PI = math.log(2.0 * math.pi)

INIT_SCHEMES = ("ols_uniform", "zero")


# =============================================================================
# Options and results
# =============================================================================


@dataclass(frozen=True)
class CaviOptions:
    """Convergence and initialization controls for :func:`fit_cavi`.

    Attributes
    ----------
    tol : float
        Relative objective-change threshold: the fit stops once
        ``|L_new - L_old| < tol * |L_new|``.
    max_iters : int
        Hard cap on the number of sweeps.
    init : str
        ``"ols_uniform"`` (least squares on uniform-weight aggregates) or
        ``"zero"``.
    backend : str or None
        Kernel implementation (``"python"`` or ``"compiled"``); ``None``
        selects the import-time default.
    """

    tol: float = 1e-8
    max_iters: int = 500
    init: str = "ols_uniform"
    backend: str | None = None

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.init not in INIT_SCHEMES:
            raise ValueError(f"init must be one of {INIT_SCHEMES}")


@dataclass
class CaviFit:
    """Result of a coordinate-ascent fit.

    Attributes
    ----------
    state : VariationalState
        Posterior factors after the final sweep.
    elbo_trace : np.ndarray
        Objective value after each sweep.
    n_sweeps : int
    converged : bool
        False when the sweep cap was reached before the tolerance.
    wall_time : float
        Seconds spent in initialization plus sweeps.
    backend : str
        Kernel implementation used.
    """

    state: VariationalState
    elbo_trace: np.ndarray
    n_sweeps: int
    converged: bool
    wall_time: float
    backend: str

    @property
    def coef(self) -> GaussianBlock:
        return self.state.coef

    @property
    def weights(self) -> list[GaussianBlock]:
        return self.state.weights

    @property
    def noise(self) -> InverseGammaBlock:
        return self.state.noise

    @property
    def final_elbo(self) -> float:
        return float(self.elbo_trace[-1])


# =============================================================================
# Initialization
# =============================================================================


def uniform_aggregates(dataset: MidasDataset) -> np.ndarray:
    """Equal-weight lag averages, one column per predictor, shape (T, J)."""
    cols = [
        np.asarray(pred.lags, dtype=np.float64).mean(axis=1)
        for pred in dataset.predictors
    ]
    return np.column_stack(cols)


def init_state(
    dataset: MidasDataset, priors: Priors, scheme: str = "ols_uniform"
) -> VariationalState:
    """Starting point shared by the coordinate-ascent fit and the sampler.

    ``"ols_uniform"`` regresses the response on an intercept plus the
    uniform-weight aggregate of each predictor; a rank-deficient design
    falls back to a ridge solve with the prior precisions and flags the
    state.  ``"zero"`` starts all location parameters at zero.  Weight
    factors start at their prior; the noise factor starts at shape
    ``prior shape + T/2`` (which the noise update keeps fixed) and rate
    ``prior rate + RSS/2`` from the initialization residuals.
    """
    if scheme not in INIT_SCHEMES:
        raise ValueError(f"init scheme must be one of {INIT_SCHEMES}")
    T = dataset.n_obs
    J = dataset.n_predictors
    lam = priors.coef_precisions(J)
    ridge = False
    if scheme == "zero":
        mu = np.zeros(J + 1)
        rss = float(dataset.y @ dataset.y)
    else:
        design = np.column_stack([np.ones(T), uniform_aggregates(dataset)])
        solution, _, rank, _ = np.linalg.lstsq(design, dataset.y, rcond=None)
        if rank < J + 1:
            ridge = True
            gram = design.T @ design + np.diag(lam)
            solution = np.linalg.solve(gram, design.T @ dataset.y)
        mu = solution
        resid = dataset.y - design @ solution
        rss = float(resid @ resid)
    coef = GaussianBlock(mean=mu, cov=np.diag(1.0 / lam))
    weights = [
        GaussianBlock(mean=np.zeros(int(q)), cov=priors.wc_var * np.eye(int(q)))
        for q in dataset.free_dims
    ]
    noise = InverseGammaBlock(
        shape=priors.noise_shape + 0.5 * T, rate=priors.noise_rate + 0.5 * rss
    )
    return VariationalState(coef=coef, weights=weights, noise=noise, ridge_init=ridge)


# =============================================================================
# Packed-state plumbing shared with the sampler driver
# =============================================================================


def _pack_state(dataset: MidasDataset, state: VariationalState):
    """Copy a block state into the flat buffers the kernels mutate."""
    J = dataset.n_predictors
    qoff = dataset.free_offsets
    sqoff = dataset.free_sq_offsets
    mu_xi = np.array(state.coef.mean, dtype=np.float64)
    sigma_xi = np.array(state.coef.cov, dtype=np.float64, order="C")
    mu_wc = np.empty(int(qoff[-1]))
    sigma_wc = np.empty(int(sqoff[-1]))
    for j, block in enumerate(state.weights):
        mu_wc[qoff[j] : qoff[j + 1]] = block.mean
        sigma_wc[sqoff[j] : sqoff[j + 1]] = np.asarray(block.cov).reshape(-1)
    ab = np.array([state.noise.shape, state.noise.rate])
    return mu_xi, sigma_xi, mu_wc, sigma_wc, ab


def _unpack_state(
    dataset: MidasDataset, mu_xi, sigma_xi, mu_wc, sigma_wc, ab, ridge_init
) -> VariationalState:
    qoff = dataset.free_offsets
    sqoff = dataset.free_sq_offsets
    weights = []
    for j in range(dataset.n_predictors):
        q = int(qoff[j + 1] - qoff[j])
        cov = sigma_wc[sqoff[j] : sqoff[j + 1]].reshape(q, q).copy()
        weights.append(GaussianBlock(mu_wc[qoff[j] : qoff[j + 1]].copy(), cov))
    return VariationalState(
        coef=GaussianBlock(mu_xi.copy(), sigma_xi.copy()),
        weights=weights,
        noise=InverseGammaBlock(float(ab[0]), float(ab[1])),
        ridge_init=ridge_init,
    )


def _design_means(dataset: MidasDataset, mu_wc: np.ndarray) -> np.ndarray:
    """(T, J+1) design-mean matrix at the packed weight means."""
    T = dataset.n_obs
    J = dataset.n_predictors
    qoff = dataset.free_offsets
    g = np.empty((T, J + 1))
    g[:, 0] = 1.0
    for j in range(J):
        block = dataset.free_mat[:, qoff[j] : qoff[j + 1]]
        g[:, j + 1] = dataset.fixed_mat[:, j] + block @ mu_wc[qoff[j] : qoff[j + 1]]
    return g


def _aggregate_variances(dataset: MidasDataset, sigma_wc: np.ndarray) -> np.ndarray:
    """(T, J) per-observation aggregate variances at the packed covariances."""
    T = dataset.n_obs
    J = dataset.n_predictors
    qoff = dataset.free_offsets
    sqoff = dataset.free_sq_offsets
    vcorr = np.empty((T, J))
    for j in range(J):
        q = int(qoff[j + 1] - qoff[j])
        cov = sigma_wc[sqoff[j] : sqoff[j + 1]].reshape(q, q)
        block = dataset.free_mat[:, qoff[j] : qoff[j + 1]]
        vcorr[:, j] = np.einsum("ti,ik,tk->t", block, cov, block)
    return vcorr


def _sweep_workspace(dataset: MidasDataset):
    """Scratch buffers sized for the largest block factorization."""
    J = dataset.n_predictors
    side = max(int(dataset.free_dims.max()), J + 1)
    return (
        np.empty(side * side),  # factorization buffer
        np.empty(side * side),  # inverse buffer
        np.empty(side),  # column buffer
        np.empty(side),  # linear-term buffer
        np.empty(J),  # per-block log-determinants
        np.empty(J),  # per-block variance-correction sums
    )


# =============================================================================
# Fit driver
# =============================================================================


def fit_cavi(
    dataset: MidasDataset,
    priors: Priors | None = None,
    options: CaviOptions | None = None,
    initial_state: VariationalState | None = None,
) -> CaviFit:
    """Run coordinate-ascent sweeps until the objective change is below tol.

    Each sweep updates every weight factor in order, then the coefficient
    factor, then the noise factor, and evaluates the objective once.  The
    trace of objective values is nondecreasing up to floating-point slack.
    Passing ``initial_state`` overrides the ``options.init`` scheme.
    """
    priors = priors if priors is not None else Priors()
    options = options if options is not None else CaviOptions()
    backend = get_backend(options.backend)
    start = time.perf_counter()
    if initial_state is not None:
        state = initial_state.copy()
    else:
        state = init_state(dataset, priors, options.init)
    mu_xi, sigma_xi, mu_wc, sigma_wc, ab = _pack_state(dataset, state)
    g = _design_means(dataset, mu_wc)
    vcorr = _aggregate_variances(dataset, sigma_wc)
    workspace = _sweep_workspace(dataset)
    lam = priors.coef_precisions(dataset.n_predictors)
    wc_prec = 1.0 / priors.wc_var
    trace: list[float] = []
    converged = False
    for _ in range(options.max_iters):
        elbo = backend.cavi_sweep(
            dataset.y,
            dataset.fixed_mat,
            dataset.free_mat,
            dataset.free_offsets,
            dataset.free_sq_offsets,
            dataset.free_gram,
            lam,
            wc_prec,
            priors.noise_shape,
            priors.noise_rate,
            mu_xi,
            sigma_xi,
            mu_wc,
            sigma_wc,
            ab,
            g,
            vcorr,
            *workspace,
        )
        if not math.isfinite(elbo):
            raise FloatingPointError("objective became non-finite during a sweep")
        trace.append(float(elbo))
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < options.tol * abs(trace[-1]):
            converged = True
            break
    wall = time.perf_counter() - start
    final = _unpack_state(
        dataset, mu_xi, sigma_xi, mu_wc, sigma_wc, ab, state.ridge_init
    )
    return CaviFit(
        state=final,
        elbo_trace=np.asarray(trace),
        n_sweeps=len(trace),
        converged=converged,
        wall_time=wall,
        backend=backend.name,
    )


# =============================================================================
# Readable single-block updates (verification route)
# =============================================================================


def _symmetric_inverse(prec: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv(prec)
    return 0.5 * (inv + inv.T)


def update_weight_block(
    dataset: MidasDataset, state: VariationalState, priors: Priors, j: int
) -> GaussianBlock:
    """Exact update of predictor ``j``'s weight factor given the others.

    The update regresses a partial residual (response minus the posterior-mean
    contribution of the intercept and every other predictor, with predictor
    ``j`` held at its fixed aggregate component) on the free regressors,
    scaled by the impact coefficient's posterior moments, with a correction
    for the covariance between the intercept/impact coefficients.
    """
    red = dataset.reduced[j]
    m = state.coef.mean
    S = state.coef.cov
    esi = state.noise.mean_inv()
    second_moment = m[j + 1] ** 2 + S[j + 1, j + 1]
    g, _ = expected_design_moments(dataset, state.weights)
    g_held = g.copy()
    g_held[:, j + 1] = red.fixed
    resid = dataset.y - g_held @ m
    cov_corr = g_held @ S[:, j + 1]
    target = m[j + 1] * resid - cov_corr
    q = red.free.shape[1]
    prec = esi * second_moment * (red.free.T @ red.free) + (
        1.0 / priors.wc_var
    ) * np.eye(q)
    cov = _symmetric_inverse(prec)
    mean = cov @ (esi * (red.free.T @ target))
    return GaussianBlock(mean, cov)


def update_coef_block(
    dataset: MidasDataset, state: VariationalState, priors: Priors
) -> GaussianBlock:
    """Exact update of the (intercept, impacts) factor given the others."""
    g, M = expected_design_moments(dataset, state.weights)
    esi = state.noise.mean_inv()
    lam = priors.coef_precisions(dataset.n_predictors)
    prec = esi * M.sum(axis=0) + np.diag(lam)
    cov = _symmetric_inverse(prec)
    mean = cov @ (esi * (g.T @ dataset.y))
    return GaussianBlock(mean, cov)


def update_noise_block(
    dataset: MidasDataset, state: VariationalState, priors: Priors
) -> InverseGammaBlock:
    """Exact update of the noise-variance factor given the others."""
    e2 = _expected_squared_residuals(dataset, state)
    shape = priors.noise_shape + 0.5 * dataset.n_obs
    rate = priors.noise_rate + 0.5 * float(e2.sum())
    return InverseGammaBlock(shape, rate)


def _expected_squared_residuals(
    dataset: MidasDataset, state: VariationalState
) -> np.ndarray:
    """Per-observation posterior expectation of the squared residual."""
    g, M = expected_design_moments(dataset, state.weights)
    m = state.coef.mean
    outer = np.outer(m, m) + state.coef.cov
    y = dataset.y
    return y**2 - 2.0 * y * (g @ m) + np.einsum("tik,ik->t", M, outer)


def compute_elbo(
    dataset: MidasDataset, state: VariationalState, priors: Priors
) -> float:
    """Evidence lower bound at the given state, assembled term by term.

    Expected log-likelihood, expected log-priors of the three factor groups,
    and the entropies of all factors.
    """
    T = dataset.n_obs
    J = dataset.n_predictors
    lam = priors.coef_precisions(J)
    wc_prec = 1.0 / priors.wc_var
    a0, b0 = priors.noise_shape, priors.noise_rate
    a, b = state.noise.shape, state.noise.rate
    esi = state.noise.mean_inv()
    elog = state.noise.mean_log()

    sse = float(_expected_squared_residuals(dataset, state).sum())
    loglik = -0.5 * T * LOG_2PI - 0.5 * T * elog - 0.5 * esi * sse

    m = state.coef.mean
    S_diag = np.diag(state.coef.cov)
    lp_coef = (
        -0.5 * (J + 1) * LOG_2PI
        + 0.5 * float(np.log(lam).sum())
        - 0.5 * float(lam @ (m**2 + S_diag))
    )

    lp_wc = 0.0
    h_wc = 0.0
    for block in state.weights:
        q = block.mean.size
        quad = float(block.mean @ block.mean) + float(np.trace(block.cov))
        lp_wc += -0.5 * q * (LOG_2PI - math.log(wc_prec)) - 0.5 * wc_prec * quad
        sign, logdet = np.linalg.slogdet(block.cov)
        if sign <= 0:
            raise FloatingPointError("weight covariance is not positive definite")
        h_wc += 0.5 * q * (1.0 + LOG_2PI) + 0.5 * logdet

    lp_noise = (
        a0 * math.log(b0) - math.lgamma(a0) - (a0 + 1.0) * elog - b0 * esi
    )

    sign, logdet_coef = np.linalg.slogdet(state.coef.cov)
    if sign <= 0:
        raise FloatingPointError("coefficient covariance is not positive definite")
    h_coef = 0.5 * (J + 1) * (1.0 + LOG_2PI) + 0.5 * logdet_coef
    h_noise = a + math.log(b) + math.lgamma(a) - (1.0 + a) * digamma(a)
    return loglik + lp_coef + lp_wc + lp_noise + h_coef + h_noise + h_wc


# =============================================================================
# Credible intervals
# =============================================================================


def _check_interval_args(level: float, kappa: float) -> None:
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    if kappa < 1.0:
        raise ValueError("kappa must be at least 1")


def coef_intervals(
    fit: CaviFit | VariationalState, level: float = 0.95, kappa: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian intervals for (intercept, impacts); sd inflated by kappa."""
    _check_interval_args(level, kappa)
    state = fit.state if isinstance(fit, CaviFit) else fit
    z = norm.ppf(0.5 * (1.0 + level))
    half = z * kappa * state.coef.sd()
    return state.coef.mean - half, state.coef.mean + half


def weight_intervals(
    fit: CaviFit | VariationalState,
    j: int,
    level: float = 0.95,
    kappa: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian intervals for predictor ``j``'s free weight coordinates."""
    _check_interval_args(level, kappa)
    state = fit.state if isinstance(fit, CaviFit) else fit
    block = state.weights[j]
    z = norm.ppf(0.5 * (1.0 + level))
    half = z * kappa * block.sd()
    return block.mean - half, block.mean + half


def credible_interval(
    fit: CaviFit | VariationalState,
    target: str,
    level: float = 0.95,
    kappa: float = 1.0,
) -> tuple[float, float]:
    """Posterior interval for one parameter.

    ``target`` is ``"alpha"``, ``"beta_<j>"``, ``"wc_<j>_<i>"`` (1-based
    indices), or ``"sigma2"``.  Gaussian parameters get the symmetric
    interval ``mean ± z * kappa * sd``; the noise variance gets equal-tailed
    inverse-gamma quantiles (kappa does not apply).
    """
    _check_interval_args(level, kappa)
    state = fit.state if isinstance(fit, CaviFit) else fit
    if target == "sigma2":
        lo, hi = invgamma.ppf(
            [0.5 * (1.0 - level), 0.5 * (1.0 + level)],
            state.noise.shape,
            scale=state.noise.rate,
        )
        return float(lo), float(hi)
    if target == "alpha":
        lo, hi = coef_intervals(state, level, kappa)
        return float(lo[0]), float(hi[0])
    parts = target.split("_")
    if len(parts) == 2 and parts[0] == "beta":
        idx = int(parts[1])
        if not 1 <= idx <= state.coef.mean.size - 1:
            raise ValueError(f"unknown parameter {target!r}")
        lo, hi = coef_intervals(state, level, kappa)
        return float(lo[idx]), float(hi[idx])
    if len(parts) == 3 and parts[0] == "wc":
        j, i = int(parts[1]) - 1, int(parts[2]) - 1
        if not (0 <= j < len(state.weights)) or not (
            0 <= i < state.weights[j].mean.size
        ):
            raise ValueError(f"unknown parameter {target!r}")
        lo, hi = weight_intervals(state, j, level, kappa)
        return float(lo[i]), float(hi[i])
    raise ValueError(f"unknown parameter {target!r}")
