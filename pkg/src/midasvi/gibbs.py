"""Exact-posterior benchmark: block Gibbs sampler plus chain diagnostics.

``run_gibbs`` drives systematic scans through the selected kernel backend,
consuming pre-generated random variates so a chain is reproducible from its
seed regardless of backend.  The conditional-distribution helpers
(:func:`weight_conditional`, :func:`coef_conditional`,
:func:`noise_conditional` and their ``draw_*`` wrappers) are plain-numpy
transcriptions of the same conditionals, kept separate from the packed scan
kernel so each route can verify the other.  :func:`ess` and
:func:`chain_summary` provide the mixing diagnostics used by the evaluation
harness.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ._backend import get_backend
from .cavi import init_state
from .model import MidasDataset, Priors

__all__ = [
    "GibbsOptions",
    "GibbsChain",
    "run_gibbs",
    "weight_conditional",
    "coef_conditional",
    "noise_conditional",
    "draw_weight_vector",
    "draw_coef_vector",
    "draw_noise_variance",
    "ess",
    "ParamSummary",
    "ChainSummary",
    "chain_summary",
]


# =============================================================================
# Options and results
# =============================================================================


@dataclass(frozen=True)
class GibbsOptions:
    """Chain-length, seeding, and initialization controls.

    Attributes
    ----------
    n_draws : int
        Retained draws after burn-in and thinning.
    burn_in : int
        Leading scans discarded.
    thin : int
        Keep every ``thin``-th post-burn-in scan.
    seed : int
        Seed for the counter-based generator driving all randomness.
    init : str
        Initialization scheme, shared with the coordinate-ascent fit.
    backend : str or None
        Kernel implementation; ``None`` selects the import-time default.
    """

    n_draws: int = 5000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    init: str = "ols_uniform"
    backend: str | None = None

    def __post_init__(self) -> None:
        if self.n_draws < 1:
            raise ValueError("n_draws must be at least 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")


@dataclass
class GibbsChain:
    """Retained posterior draws.

    Attributes
    ----------
    coef_draws : np.ndarray, shape (n, J+1)
        Intercept and impact coefficients, one row per retained scan.
    weight_draws : list[np.ndarray]
        Per-predictor free weight coordinates, each (n, q_j).
    sigma2_draws : np.ndarray, shape (n,)
    wall_time : float
        Seconds spent initializing and running the scans.
    """

    coef_draws: np.ndarray
    weight_draws: list[np.ndarray]
    sigma2_draws: np.ndarray
    wall_time: float

    @property
    def n_draws(self) -> int:
        return self.sigma2_draws.size


# =============================================================================
# Sampler driver
# =============================================================================


def run_gibbs(
    dataset: MidasDataset,
    priors: Priors | None = None,
    options: GibbsOptions | None = None,
) -> GibbsChain:
    """Run ``burn_in + n_draws * thin`` systematic scans and slice the chain.

    Each scan redraws every weight vector in order, then the coefficient
    vector, then the noise variance.  The starting point is the same as the
    coordinate-ascent fit's (posterior comparability and fair timing); all
    random variates are generated up front from a counter-based generator so
    identical seeds give identical chains on every backend.
    """
    priors = priors if priors is not None else Priors()
    options = options if options is not None else GibbsOptions()
    backend = get_backend(options.backend)
    start = time.perf_counter()

    state = init_state(dataset, priors, options.init)
    T = dataset.n_obs
    J = dataset.n_predictors
    qoff = dataset.free_offsets
    Q = int(qoff[-1])
    coef = np.array(state.coef.mean, dtype=np.float64)
    wc = np.empty(Q)
    for j, block in enumerate(state.weights):
        wc[qoff[j] : qoff[j + 1]] = block.mean
    s2 = np.array([state.noise.rate / state.noise.shape])

    n_scans = options.burn_in + options.n_draws * options.thin
    rng = np.random.Generator(np.random.Philox(options.seed))
    z_wc = rng.standard_normal((n_scans, Q))
    z_xi = rng.standard_normal((n_scans, J + 1))
    gam = rng.gamma(priors.noise_shape + 0.5 * T, 1.0, size=n_scans)

    out_coef = np.empty((n_scans, J + 1))
    out_wc = np.empty((n_scans, Q))
    out_s2 = np.empty(n_scans)
    g = np.empty((T, J + 1))
    side = max(int(dataset.free_dims.max()), J + 1)
    a_buf = np.empty(side * side)
    vec_buf = np.empty(side)
    lin_buf = np.empty(side)

    backend.gibbs_scans(
        dataset.y,
        dataset.fixed_mat,
        dataset.free_mat,
        dataset.free_offsets,
        dataset.free_sq_offsets,
        dataset.free_gram,
        priors.coef_precisions(J),
        1.0 / priors.wc_var,
        priors.noise_shape,
        priors.noise_rate,
        coef,
        wc,
        s2,
        z_xi,
        z_wc,
        gam,
        out_coef,
        out_wc,
        out_s2,
        g,
        a_buf,
        vec_buf,
        lin_buf,
    )

    kept = slice(options.burn_in + options.thin - 1, n_scans, options.thin)
    coef_draws = out_coef[kept].copy()
    weight_draws = [
        out_wc[kept, qoff[j] : qoff[j + 1]].copy() for j in range(J)
    ]
    sigma2_draws = out_s2[kept].copy()
    wall = time.perf_counter() - start
    return GibbsChain(
        coef_draws=coef_draws,
        weight_draws=weight_draws,
        sigma2_draws=sigma2_draws,
        wall_time=wall,
    )


# =============================================================================
# Readable conditional distributions (verification route)
# =============================================================================


def _design_at(dataset: MidasDataset, weight_vectors: list[np.ndarray]) -> np.ndarray:
    """(T, J+1) design at point weight values: intercept column then aggregates."""
    T = dataset.n_obs
    J = dataset.n_predictors
    X = np.empty((T, J + 1))
    X[:, 0] = 1.0
    for j in range(J):
        red = dataset.reduced[j]
        X[:, j + 1] = red.fixed + red.free @ np.asarray(weight_vectors[j], float)
    return X


def _symmetric_inverse(prec: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv(prec)
    return 0.5 * (inv + inv.T)


def weight_conditional(
    dataset: MidasDataset,
    priors: Priors,
    coef: np.ndarray,
    weight_vectors: list[np.ndarray],
    sigma2: float,
    j: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian conditional of predictor ``j``'s free weights given the rest."""
    red = dataset.reduced[j]
    X = _design_at(dataset, weight_vectors)
    X[:, j + 1] = red.fixed
    resid = dataset.y - X @ np.asarray(coef, float)
    beta_j = float(coef[j + 1])
    q = red.free.shape[1]
    prec = (beta_j**2 / sigma2) * (red.free.T @ red.free) + (
        1.0 / priors.wc_var
    ) * np.eye(q)
    cov = _symmetric_inverse(prec)
    mean = cov @ ((beta_j / sigma2) * (red.free.T @ resid))
    return mean, cov


def coef_conditional(
    dataset: MidasDataset,
    priors: Priors,
    weight_vectors: list[np.ndarray],
    sigma2: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian conditional of (intercept, impacts) given weights and noise."""
    X = _design_at(dataset, weight_vectors)
    lam = priors.coef_precisions(dataset.n_predictors)
    prec = (X.T @ X) / sigma2 + np.diag(lam)
    cov = _symmetric_inverse(prec)
    mean = cov @ ((X.T @ dataset.y) / sigma2)
    return mean, cov


def noise_conditional(
    dataset: MidasDataset,
    priors: Priors,
    coef: np.ndarray,
    weight_vectors: list[np.ndarray],
) -> tuple[float, float]:
    """Inverse-gamma conditional (shape, rate) of the noise variance."""
    X = _design_at(dataset, weight_vectors)
    resid = dataset.y - X @ np.asarray(coef, float)
    shape = priors.noise_shape + 0.5 * dataset.n_obs
    rate = priors.noise_rate + 0.5 * float(resid @ resid)
    return shape, rate


def draw_weight_vector(
    dataset: MidasDataset,
    priors: Priors,
    coef: np.ndarray,
    weight_vectors: list[np.ndarray],
    sigma2: float,
    j: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """One draw from the weight conditional (mean plus Cholesky noise)."""
    mean, cov = weight_conditional(dataset, priors, coef, weight_vectors, sigma2, j)
    L = np.linalg.cholesky(cov)
    return mean + L @ rng.standard_normal(mean.size)


def draw_coef_vector(
    dataset: MidasDataset,
    priors: Priors,
    weight_vectors: list[np.ndarray],
    sigma2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One draw from the coefficient conditional."""
    mean, cov = coef_conditional(dataset, priors, weight_vectors, sigma2)
    L = np.linalg.cholesky(cov)
    return mean + L @ rng.standard_normal(mean.size)


def draw_noise_variance(
    dataset: MidasDataset,
    priors: Priors,
    coef: np.ndarray,
    weight_vectors: list[np.ndarray],
    rng: np.random.Generator,
) -> float:
    """One inverse-gamma draw of the noise variance given all locations."""
    shape, rate = noise_conditional(dataset, priors, coef, weight_vectors)
    return rate / float(rng.gamma(shape, 1.0))


# =============================================================================
# Diagnostics
# =============================================================================


def ess(draws: np.ndarray) -> float:
    """Effective sample size via pairwise initial-positive truncation.

    Computes ``n / (1 + 2 * sum of autocorrelations)`` where the sum runs
    over consecutive lag pairs until the first pair with nonpositive sum,
    capped at ``n``.  Constant (zero-variance) series and series shorter
    than 10 draws return their length.
    """
    x = np.asarray(draws, dtype=np.float64).ravel()
    n = x.size
    if n < 10:
        return float(n)
    x = x - x.mean()
    nfft = 1 << int(2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[:n] / n
    if not acov[0] > 0:
        return float(n)
    rho = acov / acov[0]
    total = 0.0
    for m in range(n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        total += pair
    tau = 2.0 * total - 1.0
    if tau <= 0.0:
        return float(n)
    return float(min(float(n), n / tau))


@dataclass(frozen=True)
class ParamSummary:
    """Posterior summary of one scalar parameter from a chain."""

    name: str
    mean: float
    sd: float
    lo: float
    hi: float
    ess: float


@dataclass(frozen=True)
class ChainSummary:
    """Per-parameter summaries plus the worst-mixing diagnostic."""

    params: dict[str, ParamSummary]
    level: float
    min_ess: float

    def __getitem__(self, name: str) -> ParamSummary:
        return self.params[name]


def chain_summary(chain: GibbsChain, level: float = 0.95) -> ChainSummary:
    """Means, sds, equal-tailed quantile intervals, and ESS per parameter.

    Parameter names follow the package-wide convention: ``alpha``,
    ``beta_<j>``, ``wc_<j>_<i>`` (1-based), ``sigma2``.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    if chain.n_draws < 1:
        raise ValueError("chain is empty")
    lo_p, hi_p = 0.5 * (1.0 - level), 0.5 * (1.0 + level)
    columns: list[tuple[str, np.ndarray]] = [("alpha", chain.coef_draws[:, 0])]
    for j in range(chain.coef_draws.shape[1] - 1):
        columns.append((f"beta_{j + 1}", chain.coef_draws[:, j + 1]))
    for j, block in enumerate(chain.weight_draws):
        for i in range(block.shape[1]):
            columns.append((f"wc_{j + 1}_{i + 1}", block[:, i]))
    columns.append(("sigma2", chain.sigma2_draws))
    params: dict[str, ParamSummary] = {}
    min_ess = math.inf
    for name, series in columns:
        e = ess(series)
        min_ess = min(min_ess, e)
        sd = float(series.std(ddof=1)) if series.size > 1 else 0.0
        params[name] = ParamSummary(
            name=name,
            mean=float(series.mean()),
            sd=sd,
            lo=float(np.quantile(series, lo_p)),
            hi=float(np.quantile(series, hi_p)),
            ess=e,
        )
    return ChainSummary(params=params, level=level, min_ess=float(min_ess))
