# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner-loop kernels.

Twin of :mod:`midasvi._ref` (same signatures, same state layout, same
random-variate consumption); see that module for the layout contract.  All
linear algebra is hand-rolled dense routines over small blocks so the scan
and sweep cores run without the GIL.
"""

from libc.math cimport log, sqrt, lgamma

name = "compiled"

cdef double LOG_2PI = 1.8378770664093453390819

# Coefficients of the asymptotic expansion of the digamma function
# (Bernoulli terms); matches midasvi.model.digamma.
cdef double* DG = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
]


cdef double _digamma(double x) nogil:
    cdef double acc = 0.0
    cdef double inv2, series
    cdef int i
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    for i in range(6, -1, -1):
        series = inv2 * (DG[i] - series)
    return acc + log(x) - 0.5 / x - series


def digamma(double x):
    """Digamma for positive arguments (compiled twin of model.digamma)."""
    if not x > 0.0:
        raise ValueError("digamma requires a positive argument")
    return _digamma(x)


# -----------------------------------------------------------------------------
# Small dense Cholesky helpers (row-major, lower factor in place)
# -----------------------------------------------------------------------------


cdef int _chol(double* A, int n) nogil:
    """In-place lower Cholesky of a row-major n-by-n SPD matrix."""
    cdef int i, j, k
    cdef double s
    for j in range(n):
        s = A[j * n + j]
        for k in range(j):
            s -= A[j * n + k] * A[j * n + k]
        if s <= 0.0:
            return -1
        A[j * n + j] = sqrt(s)
        for i in range(j + 1, n):
            s = A[i * n + j]
            for k in range(j):
                s -= A[i * n + k] * A[j * n + k]
            A[i * n + j] = s / A[j * n + j]
    return 0


cdef void _chol_solve(double* L, double* x, int n) nogil:
    """Solve (L L^T) x = b in place (x holds b on entry)."""
    cdef int i, k
    cdef double s
    for i in range(n):
        s = x[i]
        for k in range(i):
            s -= L[i * n + k] * x[k]
        x[i] = s / L[i * n + i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= L[k * n + i] * x[k]
        x[i] = s / L[i * n + i]


cdef void _lt_tsolve(double* L, double* x, int n) nogil:
    """Solve L^T x = b in place (x holds b on entry)."""
    cdef int i, k
    cdef double s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= L[k * n + i] * x[k]
        x[i] = s / L[i * n + i]


cdef void _chol_inverse(double* L, double* out, double* tmp, int n) nogil:
    """Symmetric inverse of (L L^T) into ``out`` (column solves + symmetrize)."""
    cdef int i, j
    for j in range(n):
        for i in range(n):
            tmp[i] = 1.0 if i == j else 0.0
        _chol_solve(L, tmp, n)
        for i in range(n):
            out[i * n + j] = tmp[i]
    for j in range(n):
        for i in range(j + 1, n):
            out[i * n + j] = 0.5 * (out[i * n + j] + out[j * n + i])
            out[j * n + i] = out[i * n + j]


cdef double _logdet_from_chol(double* L, int n) nogil:
    """log det of (L L^T)^{-1}, i.e. minus twice the log-diagonal sum."""
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += log(L[i * n + i])
    return -2.0 * s


# -----------------------------------------------------------------------------
# Coordinate-ascent sweep
# -----------------------------------------------------------------------------


def cavi_sweep(
    double[::1] y,
    double[:, ::1] fixed,
    double[:, ::1] free,
    long[::1] qoff,
    long[::1] sqoff,
    double[::1] rtr,
    double[::1] lam,
    double wc_prec,
    double a0,
    double b0,
    double[::1] mu_xi,
    double[:, ::1] sigma_xi,
    double[::1] mu_wc,
    double[::1] sigma_wc,
    double[::1] ab,
    double[:, ::1] g,
    double[:, ::1] vcorr,
    double[::1] a_buf,
    double[::1] inv_buf,
    double[::1] vec_buf,
    double[::1] lin_buf,
    double[::1] logdet_wc,
    double[::1] vsum_buf,
):
    """One full coordinate-ascent sweep (compiled twin of _ref.cavi_sweep)."""
    cdef int T = y.shape[0]
    cdef int J = fixed.shape[1]
    cdef int Jp = J + 1
    cdef int j, t, i, k, a, b2, q, o0, so, err = 0
    cdef double esi, eb2, dgm, dgs, diff, resid, wcv, coef_t, acc, vv, row
    cdef double a_cur, b_cur, elog, sse, quad
    cdef double trace_acc = 0.0, msq_acc = 0.0
    cdef double logdet_xi = 0.0
    cdef double ll, lp_coef, lp_wc, lp_noise, h_coef, h_wc, h_noise
    cdef double sum_log_lam = 0.0, lam_quad = 0.0, qtot = 0.0

    a_cur = ab[0]
    esi = a_cur / ab[1]

    with nogil:
        # -- weight factors ---------------------------------------------------
        for j in range(J):
            o0 = <int> qoff[j]
            q = <int> (qoff[j + 1] - qoff[j])
            so = <int> sqoff[j]
            eb2 = mu_xi[j + 1] * mu_xi[j + 1] + sigma_xi[j + 1, j + 1]
            for a in range(q):
                for b2 in range(q):
                    a_buf[a * q + b2] = esi * eb2 * rtr[so + a * q + b2]
                a_buf[a * q + a] += wc_prec
                lin_buf[a] = 0.0
            for t in range(T):
                dgm = 0.0
                dgs = 0.0
                for i in range(Jp):
                    dgm += g[t, i] * mu_xi[i]
                    dgs += g[t, i] * sigma_xi[i, j + 1]
                diff = g[t, j + 1] - fixed[t, j]
                resid = y[t] - dgm + mu_xi[j + 1] * diff
                wcv = dgs - diff * sigma_xi[j + 1, j + 1]
                coef_t = mu_xi[j + 1] * resid - wcv
                for a in range(q):
                    lin_buf[a] += free[t, o0 + a] * coef_t
            for a in range(q):
                lin_buf[a] *= esi
            if _chol(&a_buf[0], q) != 0:
                err = 1
                break
            logdet_wc[j] = _logdet_from_chol(&a_buf[0], q)
            _chol_inverse(&a_buf[0], &inv_buf[0], &vec_buf[0], q)
            _chol_solve(&a_buf[0], &lin_buf[0], q)
            for a in range(q):
                mu_wc[o0 + a] = lin_buf[a]
                msq_acc += lin_buf[a] * lin_buf[a]
                trace_acc += inv_buf[a * q + a]
                for b2 in range(q):
                    sigma_wc[so + a * q + b2] = inv_buf[a * q + b2]
            vsum_buf[j] = 0.0
            for t in range(T):
                acc = fixed[t, j]
                for a in range(q):
                    acc += free[t, o0 + a] * lin_buf[a]
                g[t, j + 1] = acc
                vv = 0.0
                for a in range(q):
                    row = 0.0
                    for b2 in range(q):
                        row += inv_buf[a * q + b2] * free[t, o0 + b2]
                    vv += free[t, o0 + a] * row
                vcorr[t, j] = vv
                vsum_buf[j] += vv

        if err == 0:
            # -- coefficient factor -------------------------------------------
            for i in range(Jp):
                for k in range(Jp):
                    a_buf[i * Jp + k] = 0.0
                lin_buf[i] = 0.0
            for t in range(T):
                for i in range(Jp):
                    for k in range(i, Jp):
                        a_buf[i * Jp + k] += g[t, i] * g[t, k]
                    lin_buf[i] += g[t, i] * y[t]
            for i in range(Jp):
                for k in range(i, Jp):
                    a_buf[i * Jp + k] *= esi
                    a_buf[k * Jp + i] = a_buf[i * Jp + k]
                a_buf[i * Jp + i] += lam[i]
                lin_buf[i] *= esi
            for j in range(J):
                a_buf[(j + 1) * Jp + (j + 1)] += esi * vsum_buf[j]
            if _chol(&a_buf[0], Jp) != 0:
                err = 1
        if err == 0:
            logdet_xi = _logdet_from_chol(&a_buf[0], Jp)
            _chol_inverse(&a_buf[0], &inv_buf[0], &vec_buf[0], Jp)
            _chol_solve(&a_buf[0], &lin_buf[0], Jp)
            for i in range(Jp):
                mu_xi[i] = lin_buf[i]
                for k in range(Jp):
                    sigma_xi[i, k] = inv_buf[i * Jp + k]

            # -- noise factor --------------------------------------------------
            sse = 0.0
            for t in range(T):
                dgm = 0.0
                for i in range(Jp):
                    dgm += g[t, i] * mu_xi[i]
                resid = y[t] - dgm
                quad = 0.0
                for i in range(Jp):
                    row = 0.0
                    for k in range(Jp):
                        row += sigma_xi[i, k] * g[t, k]
                    quad += g[t, i] * row
                sse += resid * resid + quad
            for j in range(J):
                sse += vsum_buf[j] * (
                    mu_xi[j + 1] * mu_xi[j + 1] + sigma_xi[j + 1, j + 1]
                )
            ab[1] = b0 + 0.5 * sse

    if err != 0:
        raise FloatingPointError("Cholesky factorization failed in cavi_sweep")

    # -- objective -------------------------------------------------------------
    cdef double a_new = ab[0]
    cdef double b_new = ab[1]
    esi = a_new / b_new
    elog = log(b_new) - _digamma(a_new)
    for i in range(Jp):
        sum_log_lam += log(lam[i])
        lam_quad += lam[i] * (mu_xi[i] * mu_xi[i] + sigma_xi[i, i])
    qtot = <double> qoff[J]
    ll = -0.5 * T * LOG_2PI - 0.5 * T * elog - 0.5 * esi * sse
    lp_coef = -0.5 * Jp * LOG_2PI + 0.5 * sum_log_lam - 0.5 * lam_quad
    lp_wc = (
        -0.5 * qtot * (LOG_2PI - log(wc_prec))
        - 0.5 * wc_prec * (msq_acc + trace_acc)
    )
    lp_noise = a0 * log(b0) - lgamma(a0) - (a0 + 1.0) * elog - b0 * esi
    h_coef = 0.5 * Jp * (1.0 + LOG_2PI) + 0.5 * logdet_xi
    h_wc = 0.0
    for j in range(J):
        h_wc += 0.5 * logdet_wc[j]
    h_wc += 0.5 * qtot * (1.0 + LOG_2PI)
    h_noise = a_new + log(b_new) + lgamma(a_new) - (1.0 + a_new) * _digamma(a_new)
    return ll + lp_coef + lp_wc + lp_noise + h_coef + h_wc + h_noise


# -----------------------------------------------------------------------------
# Gibbs scans
# -----------------------------------------------------------------------------


def gibbs_scans(
    double[::1] y,
    double[:, ::1] fixed,
    double[:, ::1] free,
    long[::1] qoff,
    long[::1] sqoff,
    double[::1] rtr,
    double[::1] lam,
    double wc_prec,
    double a0,
    double b0,
    double[::1] xi,
    double[::1] wc,
    double[::1] s2,
    double[:, ::1] z_xi,
    double[:, ::1] z_wc,
    double[::1] gam,
    double[:, ::1] out_xi,
    double[:, ::1] out_wc,
    double[::1] out_s2,
    double[:, ::1] g,
    double[::1] a_buf,
    double[::1] vec_buf,
    double[::1] lin_buf,
):
    """Systematic Gibbs scans (compiled twin of _ref.gibbs_scans)."""
    cdef int T = y.shape[0]
    cdef int J = fixed.shape[1]
    cdef int Jp = J + 1
    cdef int n_scans = gam.shape[0]
    cdef int s, j, t, i, k, a, b2, q, o0, so, err = 0
    cdef double inv_s2, dgm, diff, resid, acc, rate

    with nogil:
        for j in range(J):
            o0 = <int> qoff[j]
            q = <int> (qoff[j + 1] - qoff[j])
            for t in range(T):
                acc = fixed[t, j]
                for a in range(q):
                    acc += free[t, o0 + a] * wc[o0 + a]
                g[t, j + 1] = acc
        for t in range(T):
            g[t, 0] = 1.0

        for s in range(n_scans):
            inv_s2 = 1.0 / s2[0]
            # -- weight vectors ----------------------------------------------
            for j in range(J):
                o0 = <int> qoff[j]
                q = <int> (qoff[j + 1] - qoff[j])
                so = <int> sqoff[j]
                for a in range(q):
                    for b2 in range(q):
                        a_buf[a * q + b2] = (
                            xi[j + 1] * xi[j + 1] * inv_s2 * rtr[so + a * q + b2]
                        )
                    a_buf[a * q + a] += wc_prec
                    lin_buf[a] = 0.0
                for t in range(T):
                    dgm = 0.0
                    for i in range(Jp):
                        dgm += g[t, i] * xi[i]
                    diff = g[t, j + 1] - fixed[t, j]
                    resid = y[t] - dgm + xi[j + 1] * diff
                    for a in range(q):
                        lin_buf[a] += free[t, o0 + a] * resid
                for a in range(q):
                    lin_buf[a] *= xi[j + 1] * inv_s2
                if _chol(&a_buf[0], q) != 0:
                    err = 1
                    break
                _chol_solve(&a_buf[0], &lin_buf[0], q)
                for a in range(q):
                    vec_buf[a] = z_wc[s, o0 + a]
                _lt_tsolve(&a_buf[0], &vec_buf[0], q)
                for a in range(q):
                    wc[o0 + a] = lin_buf[a] + vec_buf[a]
                for t in range(T):
                    acc = fixed[t, j]
                    for a in range(q):
                        acc += free[t, o0 + a] * wc[o0 + a]
                    g[t, j + 1] = acc
            if err != 0:
                break
            # -- coefficient vector -------------------------------------------
            for i in range(Jp):
                for k in range(Jp):
                    a_buf[i * Jp + k] = 0.0
                lin_buf[i] = 0.0
            for t in range(T):
                for i in range(Jp):
                    for k in range(i, Jp):
                        a_buf[i * Jp + k] += g[t, i] * g[t, k]
                    lin_buf[i] += g[t, i] * y[t]
            for i in range(Jp):
                for k in range(i, Jp):
                    a_buf[i * Jp + k] *= inv_s2
                    a_buf[k * Jp + i] = a_buf[i * Jp + k]
                a_buf[i * Jp + i] += lam[i]
                lin_buf[i] *= inv_s2
            if _chol(&a_buf[0], Jp) != 0:
                err = 1
                break
            _chol_solve(&a_buf[0], &lin_buf[0], Jp)
            for i in range(Jp):
                vec_buf[i] = z_xi[s, i]
            _lt_tsolve(&a_buf[0], &vec_buf[0], Jp)
            for i in range(Jp):
                xi[i] = lin_buf[i] + vec_buf[i]
            # -- noise variance ------------------------------------------------
            rate = 0.0
            for t in range(T):
                dgm = 0.0
                for i in range(Jp):
                    dgm += g[t, i] * xi[i]
                resid = y[t] - dgm
                rate += resid * resid
            s2[0] = (b0 + 0.5 * rate) / gam[s]
            # -- record --------------------------------------------------------
            for i in range(Jp):
                out_xi[s, i] = xi[i]
            for a in range(<int> qoff[J]):
                out_wc[s, a] = wc[a]
            out_s2[s] = s2[0]

    if err != 0:
        raise FloatingPointError("Cholesky factorization failed in gibbs_scans")
