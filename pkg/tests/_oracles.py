"""Independent reference computations the test suite checks the package against.

Everything here is written from first principles with plain numpy so that it
shares no code path with the library: exact conjugate posteriors for linear
models, and a dense-grid posterior for the one-predictor model with a single
free weight coordinate (intercept and slope integrated on the grid, noise
variance integrated analytically).
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp


def conjugate_gaussian_posterior(design, y, prior_precision_diag, noise_var):
    """Exact Gaussian posterior for y = design @ coef + N(0, noise_var)."""
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    prec = design.T @ design / noise_var + np.diag(prior_precision_diag)
    cov = np.linalg.inv(prec)
    mean = cov @ (design.T @ y / noise_var)
    return mean, (cov + cov.T) / 2.0


def inverse_gamma_noise_posterior(expected_sq_resid_sum, n_obs, shape0, rate0):
    """Exact conditional for the noise variance given expected squared residuals."""
    return shape0 + n_obs / 2.0, rate0 + expected_sq_resid_sum / 2.0


def _log_marginal_given_params(sq_resid, n_obs, shape0, rate0):
    """log ∫ Normal(y; m, v I) InvGamma(v; shape0, rate0) dv, up to a constant.

    With S = ||y − m||² the integral is
    (2π)^{−T/2} rate0^{shape0} Γ(shape0 + T/2) / (Γ(shape0) (rate0 + S/2)^{shape0+T/2});
    only the S-dependent term matters for posterior expectations.
    """
    return -(shape0 + n_obs / 2.0) * np.log(rate0 + sq_resid / 2.0)


def _grid_log_posterior(y, fixed_agg, free_agg, alphas, betas, ws, priors):
    """Log posterior on the (alpha, beta, w) grid, noise integrated analytically.

    Model: y_t = alpha + beta * (fixed_agg[t] + free_agg[t] * w) + noise.
    Returns an array of shape (n_alpha, n_beta, n_w).
    """
    var_a, var_b, var_w, shape0, rate0 = priors
    n_obs = y.size
    yy = float(y @ y)
    sy = float(y.sum())
    out = np.empty((alphas.size, betas.size, ws.size))
    a_col = alphas[:, None]
    b_row = betas[None, :]
    log_prior_ab = -0.5 * (a_col**2 / var_a + b_row**2 / var_b)
    for i, w in enumerate(ws):
        agg = fixed_agg + free_agg * w
        y_dot_g = float(y @ agg)
        g_sum = float(agg.sum())
        g_sq = float(agg @ agg)
        sq_resid = (
            yy
            - 2.0 * a_col * sy
            - 2.0 * b_row * y_dot_g
            + 2.0 * a_col * b_row * g_sum
            + n_obs * a_col**2
            + b_row**2 * g_sq
        )
        out[:, :, i] = (
            log_prior_ab
            - 0.5 * w * w / var_w
            + _log_marginal_given_params(sq_resid, n_obs, shape0, rate0)
        )
    return out


def _grid_moments(log_post, alphas, betas, ws):
    norm = logsumexp(log_post)
    prob = np.exp(log_post - norm)
    mean_a = float(np.tensordot(prob.sum(axis=(1, 2)), alphas, axes=1))
    mean_b = float(np.tensordot(prob.sum(axis=(0, 2)), betas, axes=1))
    mean_w = float(np.tensordot(prob.sum(axis=(0, 1)), ws, axes=1))
    var_a = float(np.tensordot(prob.sum(axis=(1, 2)), (alphas - mean_a) ** 2, axes=1))
    var_b = float(np.tensordot(prob.sum(axis=(0, 2)), (betas - mean_b) ** 2, axes=1))
    var_w = float(np.tensordot(prob.sum(axis=(0, 1)), (ws - mean_w) ** 2, axes=1))
    return (mean_a, mean_b, mean_w), (math.sqrt(var_a), math.sqrt(var_b), math.sqrt(var_w))


def _edge_masses(log_post) -> tuple[float, float, float]:
    """Probability mass in the outermost grid layer along each axis.

    A max-density edge test is the wrong guard here: the posterior carries a
    thin slope-at-zero ridge (the null fit, flat in the weight coordinate)
    whose density at any window edge stays within ~20 log units of the peak
    even though its mass is ~1e-6 of the total; what moments actually need is
    that negligible *mass* leaves the window, checked per axis so only the
    offending axis gets widened.
    """
    norm = logsumexp(log_post)
    prob = np.exp(log_post - norm)
    return (
        float(prob[0].sum() + prob[-1].sum()),
        float(prob[:, 0].sum() + prob[:, -1].sum()),
        float(prob[:, :, 0].sum() + prob[:, :, -1].sum()),
    )


def grid_posterior_means(
    y,
    fixed_agg,
    free_agg,
    *,
    alpha_var=100.0,
    beta_var=10.0,
    w_var=1.0,
    noise_shape=0.01,
    noise_rate=0.01,
    n_grid=161,
    spread=8.0,
    max_passes=16,
):
    """Posterior means of (alpha, beta, w) by iteratively zoomed dense grids.

    Each pass re-grids every axis around the current mean ± a per-axis
    spread of posterior sds, but never shrinks a window below several
    current grid steps — that floor prevents a pass whose step is much
    larger than the true marginal sd from aliasing the moments and
    mis-centering the zoom.  Any axis whose outermost grid layer holds more
    than 3e-6 of the mass gets its spread enlarged *persistently* (growing a
    spread cannot oscillate the way a one-off window doubling can); even at
    the spread cap the truncated mass moves a mean by well under 1e-3 sd.
    Iteration stops once every axis resolves its sd with ≥ 4 grid steps
    (lattice-sum error for a smooth density is already below 1e-12 there),
    no axis is clipped, and the means moved by < sd/50 between passes; the
    final moments must also agree with a half-resolution recomputation, so
    an unconverged grid raises instead of returning a wrong oracle value.
    """
    y = np.asarray(y, dtype=float)
    fixed_agg = np.asarray(fixed_agg, dtype=float)
    free_agg = np.asarray(free_agg, dtype=float)
    priors = (alpha_var, beta_var, w_var, noise_shape, noise_rate)

    scale_y = max(float(np.std(y)), 1e-3)
    centers = np.array([float(y.mean()), 0.0, 0.0])
    halves = np.array(
        [10.0 * scale_y, 10.0 * math.sqrt(beta_var), 10.0 * math.sqrt(w_var)]
    )
    spreads = np.full(3, float(spread))
    max_spread = (n_grid - 1) / 8.0  # keeps sd >= 4 steps attainable

    def axes_for(c, h):
        return tuple(np.linspace(c[i] - h[i], c[i] + h[i], n_grid) for i in range(3))

    means = sds = None
    for _ in range(max_passes):
        alphas, betas, ws = axes_for(centers, halves)
        log_post = _grid_log_posterior(y, fixed_agg, free_agg, alphas, betas, ws, priors)
        edges = _edge_masses(log_post)
        clipped = [edges[i] > 3e-6 for i in range(3)]
        new_means, new_sds = _grid_moments(log_post, alphas, betas, ws)
        steps = 2.0 * halves / (n_grid - 1)
        resolved = all(new_sds[i] >= 4.0 * steps[i] for i in range(3))
        settled = means is not None and all(
            abs(new_means[i] - means[i]) < new_sds[i] / 50.0 + 1e-12 for i in range(3)
        )
        means, sds = new_means, new_sds
        if resolved and settled and not any(clipped):
            break
        for i in range(3):
            if clipped[i]:
                spreads[i] = min(spreads[i] * 1.5, max_spread)
        centers = np.array(means)
        halves = np.array(
            [max(spreads[i] * sds[i], 4.0 * steps[i]) for i in range(3)]
        )
    else:
        raise RuntimeError("grid refinement did not settle within max_passes")

    # self-check: moments must be insensitive to halving the resolution
    coarse_axes = tuple(
        np.linspace(centers[i] - halves[i], centers[i] + halves[i], n_grid // 2)
        for i in range(3)
    )
    log_post = _grid_log_posterior(y, fixed_agg, free_agg, *coarse_axes, priors)
    coarse_means, _ = _grid_moments(log_post, *coarse_axes)
    for i in range(3):
        if abs(coarse_means[i] - means[i]) > max(sds[i] / 100.0, 1e-10):
            raise RuntimeError("grid moments not converged in resolution")

    return {
        "alpha": means[0],
        "beta": means[1],
        "w": means[2],
        "sd_alpha": sds[0],
        "sd_beta": sds[1],
        "sd_w": sds[2],
    }


def expected_squared_residual_sum(y, g, coef_mean, coef_cov, agg_vars):
    """E||y − coef·design||² with independent coef and per-predictor aggregate noise.

    ``g`` holds design means (leading 1 column), ``agg_vars`` the aggregate
    variances per predictor column, so the second moment of the design outer
    product is g gᵀ plus a diagonal correction; the coefficient second moment
    is cov + mean meanᵀ, and the cross term contracts the two.
    """
    y = np.asarray(y, dtype=float)
    g = np.asarray(g, dtype=float)
    second = coef_cov + np.outer(coef_mean, coef_mean)
    total = 0.0
    for t in range(y.size):
        m = np.outer(g[t], g[t])
        for j, var in enumerate(agg_vars[t]):
            m[j + 1, j + 1] += var
        total += y[t] ** 2 - 2.0 * y[t] * (g[t] @ coef_mean) + float(np.sum(m * second))
    return total


def ar1_series(n, rho, seed):
    rng = np.random.default_rng(seed)
    x = np.empty(n)
    x[0] = rng.standard_normal() / math.sqrt(1.0 - rho * rho)
    for i in range(1, n):
        x[i] = rho * x[i - 1] + rng.standard_normal()
    return x

