"""Lag-weight bases and the sum-to-one reparameterization.

A mixed-frequency regressor enters the model through a weighted sum of its
K high-frequency lags.  The lag-weight curve is linear in a small number of
coefficients: ``w(k) = sum_p coef_p * basis(k, p)``.  Two basis families are
provided:

* polynomial ("almon"): ``basis(k, p) = k**p`` for ``p = 0..P-1``;
* cubic B-splines ("bspline") on a uniform open knot vector over
  ``[0, K-1]`` with clamped ends.

Identification requires the weights to sum to one.  With column sums
``c = basis.T @ 1`` the constraint reads ``c @ theta = 1``; it is removed by
the affine change of variables ``theta = base + kernel @ wc`` where ``base``
is the minimum-norm solution and the columns of ``kernel`` form an
orthonormal basis of the constraint null space.  The free coordinates
``wc`` are unconstrained, and each regressor's weighted sum splits into a
fixed part plus a part linear in ``wc`` (the "reduced regressors").
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "almon_basis",
    "bspline_basis",
    "make_basis",
    "NullspaceReparam",
    "reparameterize",
    "ReducedRegressors",
    "reduced_regressors",
    "lag_weights",
]


def almon_basis(n_lags: int, order: int) -> np.ndarray:
    """Polynomial lag basis: entry ``(k, p)`` equals ``k**p``.

    Parameters
    ----------
    n_lags : int
        Number of high-frequency lags K (rows); lag index runs 0..K-1.
    order : int
        Number of polynomial terms P (columns), powers 0..P-1.

    Returns
    -------
    np.ndarray, shape (n_lags, order)
        Dense basis matrix; ``0**0`` is taken as 1.
    """
    if n_lags < 1 or order < 1:
        raise ValueError("n_lags and order must be positive")
    if order > n_lags:
        raise ValueError("order cannot exceed n_lags")
    k = np.arange(n_lags, dtype=np.float64)[:, None]
    p = np.arange(order, dtype=np.float64)[None, :]
    with np.errstate(divide="ignore"):
        out = k**p
    out[0, 0] = 1.0  # 0**0 := 1
    return out


def bspline_basis(n_lags: int, order: int) -> np.ndarray:
    """Cubic B-spline lag basis on a uniform open knot vector.

    The knot vector spans ``[0, n_lags - 1]`` with both ends clamped
    (multiplicity 4) and ``order - 4`` equally spaced interior knots, giving
    ``order`` basis functions evaluated at the integer lags.  Rows form a
    partition of unity.

    Parameters
    ----------
    n_lags : int
        Number of high-frequency lags K (rows).
    order : int
        Number of B-spline basis functions P (columns); requires P >= 4.

    Returns
    -------
    np.ndarray, shape (n_lags, order)
    """
    if order < 4:
        raise ValueError("cubic B-spline basis requires order >= 4")
    if order > n_lags:
        raise ValueError("order cannot exceed n_lags")
    degree = 3
    interior = np.linspace(0.0, n_lags - 1.0, order - 2)[1:-1]
    knots = np.concatenate(
        [
            np.zeros(degree + 1),
            interior,
            np.full(degree + 1, n_lags - 1.0),
        ]
    )
    x = np.arange(n_lags, dtype=np.float64)
    return _bspline_design(x, knots, degree)


def _bspline_design(x: np.ndarray, knots: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate all B-spline basis functions via the Cox-de Boor recurrence.

    Intervals are half-open except at the right end of the support, which is
    closed so that the clamped final basis function equals one there.
    """
    n_basis = knots.size - degree - 1
    right_end = knots[-1]
    # degree-0 indicators
    B = np.zeros((x.size, knots.size - 1))
    for i in range(knots.size - 1):
        if knots[i + 1] > knots[i]:
            B[:, i] = (x >= knots[i]) & (x < knots[i + 1])
    # close the right end on the last non-degenerate interval
    last = np.max(np.nonzero(np.diff(knots) > 0)[0])
    B[x == right_end, last] = 1.0
    # recurrence
    for d in range(1, degree + 1):
        nb = knots.size - d - 1
        Bd = np.zeros((x.size, nb))
        for i in range(nb):
            den1 = knots[i + d] - knots[i]
            den2 = knots[i + d + 1] - knots[i + 1]
            term = 0.0
            if den1 > 0:
                term = (x - knots[i]) / den1 * B[:, i]
            if den2 > 0:
                term = term + (knots[i + d + 1] - x) / den2 * B[:, i + 1]
            Bd[:, i] = term
        B = Bd
    return B[:, :n_basis]


_BASIS_BUILDERS = {"almon": almon_basis, "bspline": bspline_basis}


def make_basis(kind: str, n_lags: int, order: int) -> np.ndarray:
    """Build a lag basis by kind name ("almon" or "bspline")."""
    try:
        builder = _BASIS_BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown basis kind {kind!r}") from None
    return builder(n_lags, order)


@dataclass(frozen=True)
class NullspaceReparam:
    """Affine reparameterization removing the sum-to-one weight constraint.

    Attributes
    ----------
    constraint : np.ndarray, shape (P,)
        Column sums of the basis; the constraint is ``constraint @ theta = 1``.
    base : np.ndarray, shape (P,)
        Minimum-norm point satisfying the constraint,
        ``constraint / ||constraint||**2``.
    kernel : np.ndarray, shape (P, P-1)
        Orthonormal columns spanning the null space of ``constraint``.
    base_curve : np.ndarray, shape (K,)
        ``basis @ base`` contracted in extended precision and nudged so its
        entries sum to one exactly up to ~1e-13.  For high-order polynomial
        bases the raw float64 contraction cancels terms spanning ~7 orders
        of magnitude, and the float64 rounding of ``kernel`` alone already
        perturbs the constraint by ~eps * ||constraint||; every weight-curve
        consumer therefore reads these corrected curves instead of
        re-multiplying the factors.
    kernel_curves : np.ndarray, shape (K, P-1)
        ``basis @ kernel`` treated the same way, columns nudged to zero sum.
    """

    constraint: np.ndarray
    base: np.ndarray
    kernel: np.ndarray
    base_curve: np.ndarray
    kernel_curves: np.ndarray


def reparameterize(basis: np.ndarray) -> NullspaceReparam:
    """Construct the null-space reparameterization for a lag basis.

    The null-space completion is deterministic: Gram-Schmidt on the identity
    columns against the normalized constraint vector (two orthogonalization
    passes, extended precision) with near-dependent seeds discarded, so two
    calls return bitwise-identical matrices.
    """
    basis = np.asarray(basis, dtype=np.float64)
    c = basis.sum(axis=0)
    norm_sq = float(c @ c)
    if norm_sq <= 0.0:
        raise ValueError("basis column sums are all zero; constraint is void")
    base = c / norm_sq
    n = c.size
    cols = [np.asarray(c, dtype=np.longdouble) / np.sqrt(np.longdouble(norm_sq))]
    for i in range(n):
        if len(cols) == n:
            break
        v = np.zeros(n, dtype=np.longdouble)
        v[i] = 1.0
        for _ in range(2):  # re-orthogonalize for stability
            for u in cols:
                v = v - (u @ v) * u
        nv = np.sqrt(float(v @ v))
        if nv > 1e-8:
            cols.append(v / nv)
    if len(cols) != n:
        raise ValueError("failed to complete orthonormal basis")
    kernel = np.column_stack([v.astype(np.float64) for v in cols[1:]])

    basis_ld = basis.astype(np.longdouble)
    base_curve = (basis_ld @ base.astype(np.longdouble)).astype(np.float64)
    for _ in range(2):
        base_curve -= (math.fsum(base_curve) - 1.0) / base_curve.size
    kernel_curves = (basis_ld @ kernel.astype(np.longdouble)).astype(np.float64)
    for col in range(kernel_curves.shape[1]):
        for _ in range(2):
            kernel_curves[:, col] -= math.fsum(kernel_curves[:, col]) / basis.shape[0]
    return NullspaceReparam(
        constraint=c,
        base=base,
        kernel=kernel,
        base_curve=base_curve,
        kernel_curves=kernel_curves,
    )


@dataclass(frozen=True)
class ReducedRegressors:
    """Per-observation aggregates of one regressor under the reparameterization.

    The weighted lag sum of observation ``t`` equals
    ``fixed[t] + free[t] @ wc`` for any free coordinate vector ``wc``.

    Attributes
    ----------
    fixed : np.ndarray, shape (T,)
        Aggregate at the minimum-norm weight point.
    free : np.ndarray, shape (T, P-1)
        Design of the free coordinates.
    """

    fixed: np.ndarray
    free: np.ndarray


def reduced_regressors(
    lags: np.ndarray, basis: np.ndarray, reparam: NullspaceReparam
) -> ReducedRegressors:
    """Collapse a (T, K) lag block into its reduced regressors.

    Parameters
    ----------
    lags : np.ndarray, shape (T, K)
        High-frequency lags; column k holds lag k (most recent first).
    basis : np.ndarray, shape (K, P)
    reparam : NullspaceReparam
        Output of :func:`reparameterize` for the same basis.
    """
    lags = np.asarray(lags, dtype=np.float64)
    if lags.ndim != 2 or lags.shape[1] != basis.shape[0]:
        raise ValueError("lag block shape does not match basis")
    return ReducedRegressors(
        fixed=lags @ reparam.base_curve, free=lags @ reparam.kernel_curves
    )


def lag_weights(
    basis: np.ndarray, reparam: NullspaceReparam, wc: np.ndarray
) -> np.ndarray:
    """Lag-weight curve implied by free coordinates ``wc``.

    Evaluates ``base_curve + kernel_curves @ wc`` — the sum-corrected,
    extended-precision contraction of ``basis @ (base + kernel @ wc)`` — so
    the entries sum to one to ~1e-13 for any ``wc`` (see
    :class:`NullspaceReparam`).
    """
    wc = np.asarray(wc, dtype=np.float64)
    return reparam.base_curve + reparam.kernel_curves @ wc
