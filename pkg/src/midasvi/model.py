"""Model containers and posterior-moment utilities.

The regression is ``y_t = alpha + sum_j beta_j * agg_j(t) + eps_t`` with
``eps_t ~ N(0, sigma2)`` and ``agg_j(t)`` the weighted lag sum of predictor
``j`` whose weight curve is linear in free coordinates ``wc_j`` (see
:mod:`midasvi.basis`).  Priors:

* ``alpha ~ N(0, alpha_var)``
* ``beta_j ~ N(0, beta_var)``
* ``wc_j ~ N(0, wc_var * I)``
* ``sigma2 ~ InverseGamma(noise_shape, noise_rate)``

This module holds the dataset container (with all per-predictor
precomputation), the Gaussian / inverse-gamma posterior blocks shared by the
variational and sampling engines, and the expectation utilities both engines
are built on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .basis import (
    NullspaceReparam,
    ReducedRegressors,
    make_basis,
    reduced_regressors,
    reparameterize,
)

__all__ = [
    "Priors",
    "Predictor",
    "MidasDataset",
    "GaussianBlock",
    "InverseGammaBlock",
    "VariationalState",
    "digamma",
    "expected_aggregate",
    "expected_design_moments",
    "parameter_names",
]


# =============================================================================
# Priors
# =============================================================================


@dataclass(frozen=True)
class Priors:
    """Prior hyperparameters (defaults are the package-wide defaults).

    Attributes
    ----------
    alpha_var : float
        Variance of the Gaussian intercept prior.
    beta_var : float
        Variance of each Gaussian impact-coefficient prior.
    wc_var : float
        Variance of the isotropic Gaussian prior on each predictor's free
        weight coordinates.
    noise_shape, noise_rate : float
        Shape and rate of the inverse-gamma prior on the noise variance.
    """

    alpha_var: float = 100.0
    beta_var: float = 10.0
    wc_var: float = 1.0
    noise_shape: float = 0.01
    noise_rate: float = 0.01

    def __post_init__(self) -> None:
        for name in ("alpha_var", "beta_var", "wc_var", "noise_shape", "noise_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def coef_precisions(self, n_predictors: int) -> np.ndarray:
        """Prior precision diagonal of the (intercept, impacts) block."""
        out = np.full(n_predictors + 1, 1.0 / self.beta_var)
        out[0] = 1.0 / self.alpha_var
        return out


# =============================================================================
# Dataset
# =============================================================================


@dataclass(frozen=True)
class Predictor:
    """One mixed-frequency regressor: a (T, K) lag block plus its basis spec.

    Column ``k`` of ``lags`` holds lag ``k`` (most recent first).
    """

    lags: np.ndarray
    basis_kind: str = "almon"
    order: int = 3


class MidasDataset:
    """Response plus predictors with all reusable per-predictor precomputation.

    Construction validates shapes/finiteness, builds each predictor's basis
    and null-space reparameterization, the reduced regressors, and the packed
    flat buffers consumed by the inner-loop kernels.

    Attributes
    ----------
    y : np.ndarray, shape (T,)
    predictors : list[Predictor]
    bases : list[np.ndarray]
    reparams : list[NullspaceReparam]
    reduced : list[ReducedRegressors]
    """

    def __init__(self, y: np.ndarray, predictors: Sequence[Predictor]):
        y = np.ascontiguousarray(y, dtype=np.float64)
        if y.ndim != 1 or y.size == 0:
            raise ValueError("y must be a nonempty 1-D array")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        predictors = list(predictors)
        if not predictors:
            raise ValueError("at least one predictor is required")
        self.y = y
        self.predictors = predictors
        self.bases: list[np.ndarray] = []
        self.reparams: list[NullspaceReparam] = []
        self.reduced: list[ReducedRegressors] = []
        T = y.size
        for idx, pred in enumerate(predictors):
            lags = np.asarray(pred.lags, dtype=np.float64)
            if lags.ndim != 2 or lags.shape[0] != T:
                raise ValueError(
                    f"predictor {idx}: lag block must be (T, K) with T={T}"
                )
            if not np.all(np.isfinite(lags)):
                raise ValueError(f"predictor {idx}: non-finite lag values")
            basis = make_basis(pred.basis_kind, lags.shape[1], pred.order)
            reparam = reparameterize(basis)
            self.bases.append(basis)
            self.reparams.append(reparam)
            self.reduced.append(reduced_regressors(lags, basis, reparam))
        self._build_packed()

    # -- packed flat buffers for the inner-loop kernels ----------------------

    def _build_packed(self) -> None:
        T = self.y.size
        J = len(self.predictors)
        dims = np.array([r.free.shape[1] for r in self.reduced], dtype=np.int64)
        qoff = np.zeros(J + 1, dtype=np.int64)
        np.cumsum(dims, out=qoff[1:])
        sqoff = np.zeros(J + 1, dtype=np.int64)
        np.cumsum(dims**2, out=sqoff[1:])
        fixed = np.empty((T, J), dtype=np.float64)
        free = np.empty((T, int(qoff[-1])), dtype=np.float64)
        rtr = np.empty(int(sqoff[-1]), dtype=np.float64)
        for j, red in enumerate(self.reduced):
            fixed[:, j] = red.fixed
            free[:, qoff[j] : qoff[j + 1]] = red.free
            gram = red.free.T @ red.free
            rtr[sqoff[j] : sqoff[j + 1]] = gram.reshape(-1)
        self.free_dims = dims
        self.free_offsets = qoff
        self.free_sq_offsets = sqoff
        self.fixed_mat = fixed
        self.free_mat = free
        self.free_gram = rtr

    @property
    def n_obs(self) -> int:
        return self.y.size

    @property
    def n_predictors(self) -> int:
        return len(self.predictors)


# =============================================================================
# Posterior blocks
# =============================================================================


@dataclass
class GaussianBlock:
    """Multivariate Gaussian posterior factor with mean vector and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        n = self.mean.size
        if self.cov.shape != (n, n):
            raise ValueError("covariance shape does not match mean")

    def sd(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    def copy(self) -> "GaussianBlock":
        return GaussianBlock(self.mean.copy(), self.cov.copy())


@dataclass
class InverseGammaBlock:
    """Inverse-gamma posterior factor for the noise variance."""

    shape: float
    rate: float

    def __post_init__(self) -> None:
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("shape and rate must be positive")

    def mean_inv(self) -> float:
        """E[1/sigma2]."""
        return self.shape / self.rate

    def mean_log(self) -> float:
        """E[log sigma2]."""
        return math.log(self.rate) - digamma(self.shape)

    def mean(self) -> float:
        """E[sigma2] (requires shape > 1)."""
        if self.shape <= 1:
            raise ValueError("mean undefined for shape <= 1")
        return self.rate / (self.shape - 1.0)

    def copy(self) -> "InverseGammaBlock":
        return InverseGammaBlock(self.shape, self.rate)


@dataclass
class VariationalState:
    """Full mean-field state: coefficient, weight, and noise factors.

    Attributes
    ----------
    coef : GaussianBlock
        Joint factor over (intercept, impact coefficients), dimension J+1.
    weights : list[GaussianBlock]
        One factor per predictor over its free weight coordinates.
    noise : InverseGammaBlock
    ridge_init : bool
        True when the OLS-based initialization hit a rank-deficient design
        and fell back to a ridge solve.
    """

    coef: GaussianBlock
    weights: list[GaussianBlock]
    noise: InverseGammaBlock
    ridge_init: bool = False

    def copy(self) -> "VariationalState":
        return VariationalState(
            coef=self.coef.copy(),
            weights=[w.copy() for w in self.weights],
            noise=self.noise.copy(),
            ridge_init=self.ridge_init,
        )


# =============================================================================
# Special functions
# =============================================================================

# Bernoulli-number coefficients of the asymptotic expansion
# psi(x) ~ ln x - 1/(2x) - sum_n B_{2n} / (2n x^{2n}).
_DIGAMMA_COEFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x: float) -> float:
    """Digamma function for positive arguments.

    Upward recurrence ``psi(x) = psi(x+1) - 1/x`` until the argument reaches
    10, then the asymptotic series; absolute error is below 1e-13 for
    arguments down to 1e-3.
    """
    x = float(x)
    if not x > 0.0:
        raise ValueError("digamma requires a positive argument")
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    for coef in reversed(_DIGAMMA_COEFS):
        series = inv2 * (coef - series)
    return acc + math.log(x) - 0.5 / x - series


# =============================================================================
# Expectation utilities
# =============================================================================


def parameter_names(dataset: MidasDataset) -> list[str]:
    """Canonical flat parameter-name order shared by fit summaries.

    ``alpha``, then ``beta_1``..``beta_J``, then the free weight coordinates
    ``wc_<j>_<i>`` (both indices 1-based), then ``sigma2``.
    """
    names = ["alpha"]
    names += [f"beta_{j + 1}" for j in range(dataset.n_predictors)]
    for j, q in enumerate(dataset.free_dims):
        names += [f"wc_{j + 1}_{i + 1}" for i in range(int(q))]
    names.append("sigma2")
    return names


def expected_aggregate(
    dataset: MidasDataset, weight_blocks: Sequence[GaussianBlock], j: int
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of predictor ``j``'s weighted lag sum.

    Returns
    -------
    (mean, var) : tuple of np.ndarray, each shape (T,)
        ``mean[t] = fixed[t] + free[t] @ m_j`` and
        ``var[t] = free[t] @ V_j @ free[t]`` under ``wc_j ~ N(m_j, V_j)``.
    """
    red = dataset.reduced[j]
    block = weight_blocks[j]
    mean = red.fixed + red.free @ block.mean
    var = np.einsum("ti,ij,tj->t", red.free, block.cov, red.free)
    return mean, var


def expected_design_moments(
    dataset: MidasDataset, weight_blocks: Sequence[GaussianBlock]
) -> tuple[np.ndarray, np.ndarray]:
    """First and second moments of the per-observation design vector.

    The design vector of observation ``t`` is ``(1, agg_1(t), ..., agg_J(t))``
    with random aggregates (through the weight factors).

    Returns
    -------
    design_mean : np.ndarray, shape (T, J+1)
    second_moments : np.ndarray, shape (T, J+1, J+1)
        ``second_moments[t] = design_mean[t] design_mean[t]^T`` plus the
        aggregate variance of predictor ``j`` at diagonal entry ``(j+1, j+1)``
        (aggregates of distinct predictors are independent under the
        mean-field factorization).
    """
    T = dataset.n_obs
    J = dataset.n_predictors
    g = np.ones((T, J + 1))
    v = np.empty((T, J))
    for j in range(J):
        mean, var = expected_aggregate(dataset, weight_blocks, j)
        g[:, j + 1] = mean
        v[:, j] = var
    M = np.einsum("ti,tj->tij", g, g)
    idx = np.arange(1, J + 1)
    M[:, idx, idx] += v
    return g, M
