"""Pure-numpy reference implementation of the inner-loop kernels.

These functions are the fallback twins of the compiled kernels in
``_kernels.pyx``: identical signatures, identical state layout, identical
random-variate consumption.  They are selected at import time when the
compiled extension is unavailable (see :mod:`midasvi._backend`) and serve as
the readable reference the compiled path is tested against.

State layout shared by both implementations
-------------------------------------------
The coefficient factor is ``(mu_xi, sigma_xi)`` over the (J+1)-vector
(intercept, impacts).  The per-predictor weight factors are packed flat:
``mu_wc`` concatenates the J mean vectors (offsets ``qoff``) and ``sigma_wc``
concatenates the row-major covariance blocks (offsets ``sqoff``).  The noise
factor is ``ab = [shape, rate]``.  ``g`` is the (T, J+1) posterior-mean
design (column 0 all ones) and ``vcorr`` the (T, J) aggregate variances;
both are work arrays kept consistent with the state across calls.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .model import digamma

LOG_2PI = math.log(2.0 * math.pi)

name = "python"


def _chol_inverse(L: np.ndarray) -> np.ndarray:
    """Inverse of A from its lower Cholesky factor, symmetrized."""
    inv = cho_solve((L, True), np.eye(L.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)


def cavi_sweep(
    y: np.ndarray,
    fixed: np.ndarray,
    free: np.ndarray,
    qoff: np.ndarray,
    sqoff: np.ndarray,
    rtr: np.ndarray,
    lam: np.ndarray,
    wc_prec: float,
    a0: float,
    b0: float,
    mu_xi: np.ndarray,
    sigma_xi: np.ndarray,
    mu_wc: np.ndarray,
    sigma_wc: np.ndarray,
    ab: np.ndarray,
    g: np.ndarray,
    vcorr: np.ndarray,
    a_buf: np.ndarray,
    inv_buf: np.ndarray,
    vec_buf: np.ndarray,
    lin_buf: np.ndarray,
    logdet_wc: np.ndarray,
    vsum_buf: np.ndarray,
) -> float:
    """One full coordinate-ascent sweep; mutates the state in place.

    Update order: each weight factor in sequence (using the freshest values
    of all other factors), then the coefficient factor, then the noise
    factor; returns the objective (evidence lower bound) evaluated at the
    post-sweep state.  The ``*_buf`` arguments are scratch space sized by the
    caller (see ``make_workspace``); the numpy path only uses ``logdet_wc``
    and ``vsum_buf``.
    """
    T = y.size
    J = fixed.shape[1]
    a_cur = ab[0]
    esi = a_cur / ab[1]
    trace_wc = np.empty(J)
    msq_wc = np.empty(J)

    # -- weight factors -------------------------------------------------------
    for j in range(J):
        o0, o1 = int(qoff[j]), int(qoff[j + 1])
        q = o1 - o0
        gram = rtr[int(sqoff[j]) : int(sqoff[j + 1])].reshape(q, q)
        eb2 = mu_xi[j + 1] ** 2 + sigma_xi[j + 1, j + 1]
        prec = esi * eb2 * gram + wc_prec * np.eye(q)
        # partial residual with predictor j held at its fixed aggregate
        diff = g[:, j + 1] - fixed[:, j]
        resid = y - g @ mu_xi + mu_xi[j + 1] * diff
        # covariance correction: design mean with slot j+1 at the fixed
        # aggregate, contracted with column j+1 of the coefficient covariance
        s = sigma_xi[:, j + 1]
        w = g @ s - diff * s[j + 1]
        coef_t = mu_xi[j + 1] * resid - w
        lin = esi * (free[:, o0:o1].T @ coef_t)
        L = np.linalg.cholesky(prec)
        cov = _chol_inverse(L)
        mean = cho_solve((L, True), lin, check_finite=False)
        mu_wc[o0:o1] = mean
        sigma_wc[int(sqoff[j]) : int(sqoff[j + 1])] = cov.reshape(-1)
        logdet_wc[j] = -2.0 * np.log(np.diag(L)).sum()
        trace_wc[j] = np.trace(cov)
        msq_wc[j] = mean @ mean
        g[:, j + 1] = fixed[:, j] + free[:, o0:o1] @ mean
        vcorr[:, j] = np.einsum("ti,ij,tj->t", free[:, o0:o1], cov, free[:, o0:o1])

    # -- coefficient factor ---------------------------------------------------
    vsum_buf[:] = vcorr.sum(axis=0)
    vsum = vsum_buf
    prec = esi * (g.T @ g) + np.diag(lam)
    idx = np.arange(1, J + 1)
    prec[idx, idx] += esi * vsum
    lin = esi * (g.T @ y)
    L = np.linalg.cholesky(prec)
    sigma_xi[:, :] = _chol_inverse(L)
    mu_xi[:] = cho_solve((L, True), lin, check_finite=False)
    logdet_xi = -2.0 * np.log(np.diag(L)).sum()

    # -- noise factor ---------------------------------------------------------
    resid = y - g @ mu_xi
    quad = np.einsum("ti,ij,tj->t", g, sigma_xi, g)
    eb2_vec = mu_xi[1:] ** 2 + np.diag(sigma_xi)[1:]
    sse = resid @ resid + quad.sum() + vsum @ eb2_vec
    ab[1] = b0 + 0.5 * sse

    # -- objective ------------------------------------------------------------
    a, b = ab[0], ab[1]
    esi = a / b
    elog = math.log(b) - digamma(a)
    ll = -0.5 * T * LOG_2PI - 0.5 * T * elog - 0.5 * esi * sse
    lp_coef = (
        -0.5 * (J + 1) * LOG_2PI
        + 0.5 * np.log(lam).sum()
        - 0.5 * (lam @ (mu_xi**2 + np.diag(sigma_xi)))
    )
    qdims = np.diff(qoff).astype(np.float64)
    lp_wc = (
        -0.5 * qdims.sum() * (LOG_2PI - math.log(wc_prec))
        - 0.5 * wc_prec * (msq_wc.sum() + trace_wc.sum())
    )
    lp_noise = (
        a0 * math.log(b0) - math.lgamma(a0) - (a0 + 1.0) * elog - b0 * esi
    )
    h_coef = 0.5 * (J + 1) * (1.0 + LOG_2PI) + 0.5 * logdet_xi
    h_wc = 0.5 * qdims.sum() * (1.0 + LOG_2PI) + 0.5 * logdet_wc.sum()
    h_noise = a + math.log(b) + math.lgamma(a) - (1.0 + a) * digamma(a)
    return float(ll + lp_coef + lp_wc + lp_noise + h_coef + h_wc + h_noise)


def gibbs_scans(
    y: np.ndarray,
    fixed: np.ndarray,
    free: np.ndarray,
    qoff: np.ndarray,
    sqoff: np.ndarray,
    rtr: np.ndarray,
    lam: np.ndarray,
    wc_prec: float,
    a0: float,
    b0: float,
    xi: np.ndarray,
    wc: np.ndarray,
    s2: np.ndarray,
    z_xi: np.ndarray,
    z_wc: np.ndarray,
    gam: np.ndarray,
    out_xi: np.ndarray,
    out_wc: np.ndarray,
    out_s2: np.ndarray,
    g: np.ndarray,
    a_buf: np.ndarray,
    vec_buf: np.ndarray,
    lin_buf: np.ndarray,
) -> None:
    """Run ``gam.size`` systematic Gibbs scans, recording every scan.

    Scan order: weight vector of each predictor in sequence, then the
    coefficient vector, then the noise variance.  All randomness comes from
    the pre-generated variates ``z_wc``/``z_xi`` (standard normal) and
    ``gam`` (Gamma(shape, 1) with the fixed posterior shape), consumed in
    scan order, so the chain is reproducible across implementations of this
    kernel up to floating-point rounding.
    """
    T = y.size
    J = fixed.shape[1]
    n_scans = gam.size
    g[:, 0] = 1.0
    for j in range(J):
        o0, o1 = int(qoff[j]), int(qoff[j + 1])
        g[:, j + 1] = fixed[:, j] + free[:, o0:o1] @ wc[o0:o1]
    eye_cache = [np.eye(int(qoff[j + 1] - qoff[j])) for j in range(J)]
    for s in range(n_scans):
        inv_s2 = 1.0 / s2[0]
        for j in range(J):
            o0, o1 = int(qoff[j]), int(qoff[j + 1])
            q = o1 - o0
            gram = rtr[int(sqoff[j]) : int(sqoff[j + 1])].reshape(q, q)
            prec = (xi[j + 1] ** 2 * inv_s2) * gram + wc_prec * eye_cache[j]
            resid = y - g @ xi + xi[j + 1] * (g[:, j + 1] - fixed[:, j])
            lin = (xi[j + 1] * inv_s2) * (free[:, o0:o1].T @ resid)
            L = np.linalg.cholesky(prec)
            mean = cho_solve((L, True), lin, check_finite=False)
            draw = mean + solve_triangular(
                L, z_wc[s, o0:o1], trans="T", lower=True, check_finite=False
            )
            wc[o0:o1] = draw
            g[:, j + 1] = fixed[:, j] + free[:, o0:o1] @ draw
        prec = inv_s2 * (g.T @ g) + np.diag(lam)
        lin = inv_s2 * (g.T @ y)
        L = np.linalg.cholesky(prec)
        mean = cho_solve((L, True), lin, check_finite=False)
        xi[:] = mean + solve_triangular(
            L, z_xi[s], trans="T", lower=True, check_finite=False
        )
        resid = y - g @ xi
        s2[0] = (b0 + 0.5 * (resid @ resid)) / gam[s]
        out_xi[s] = xi
        out_wc[s] = wc
        out_s2[s] = s2[0]
