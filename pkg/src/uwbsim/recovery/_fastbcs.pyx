# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled twin of the shared-support fast-BCS kernel.

Same contract and same math as _fastbcs_py.solve_shared (keep the two in
lockstep); the differences are mechanical: the per-candidate statistics and
gain scans run as fused typed loops instead of chains of NumPy temporaries,
the posterior refresh uses LAPACK dpotrf/dpotri directly, and the active-row
cache grows by doubling instead of re-stacking.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, isfinite, log1p

from scipy.linalg.cython_lapack cimport dpotrf, dpotri

cnp.import_array()

KERNEL_NAME = "compiled"

# update codes in the trace
ADD, REESTIMATE, DELETE = 0, 1, 2


cdef inline double _l1(double alpha, double g, double h2) noexcept nogil:
    """Per-station likelihood contribution of an atom at hyperparameter alpha."""
    return 0.5 * (-log1p(g / alpha) + h2 / (alpha + g))


cdef void _colwise_dot(double[:, ::1] u, double[:, ::1] t, double[::1] acc,
                       Py_ssize_t a, Py_ssize_t n) noexcept nogil:
    """acc[j] = sum_k u[k, j] * t[k, j] over the first a rows."""
    cdef Py_ssize_t k, j
    for j in range(n):
        acc[j] = 0.0
    for k in range(a):
        for j in range(n):
            acc[j] += u[k, j] * t[k, j]


cdef void _station_stats(double ib2, double[::1] col_sq, double[::1] b,
                         double[::1] acc, double[::1] utmu, bint has_active,
                         double[::1] g, double[::1] h, double[::1] g_pool,
                         double[::1] theta_num, Py_ssize_t n) noexcept nogil:
    """Fused S/Q -> (g, h) pass plus pooled accumulators for one station."""
    cdef Py_ssize_t j
    cdef double s, q
    for j in range(n):
        if has_active:
            s = ib2 * col_sq[j] - ib2 * ib2 * acc[j]
            q = ib2 * (b[j] - utmu[j])
        else:
            s = ib2 * col_sq[j]
            q = ib2 * b[j]
        g[j] = s
        h[j] = q
        g_pool[j] += s
        theta_num[j] += q * q


cdef void _joint_gains(double[:, ::1] g_all, double[:, ::1] h_all,
                       double[::1] g_pool, double[::1] theta,
                       double[::1] gain, Py_ssize_t n_st, Py_ssize_t n) noexcept nogil:
    """gain[j] = joint likelihood of adding candidate j at its optimal alpha."""
    cdef Py_ssize_t i, j
    cdef double anew, tot
    for j in range(n):
        if theta[j] > 0.0 and g_pool[j] > 0.0:
            anew = g_pool[j] * g_pool[j] / theta[j]
            tot = 0.0
            for i in range(n_st):
                tot += _l1(anew, g_all[i, j], h_all[i, j] * h_all[i, j])
            gain[j] = tot if isfinite(tot) else -INFINITY
        else:
            gain[j] = -INFINITY


cdef Py_ssize_t _argmax(double[::1] gain, Py_ssize_t n) noexcept nogil:
    """First index of the maximum (matches np.argmax tie-breaking)."""
    cdef Py_ssize_t j, best = 0
    cdef double top = gain[0]
    for j in range(1, n):
        if gain[j] > top:
            top = gain[j]
            best = j
    return best


cdef int _spd_inverse(double[:, ::1] h_mat, Py_ssize_t a) noexcept nogil:
    """In-place inverse of a symmetric positive-definite (a, a) matrix.

    LAPACK reads the row-major buffer as its transpose; H is symmetric, so
    factoring its 'L' triangle works on what C sees as the upper triangle,
    and the other triangle is mirrored back afterwards.  Returns the LAPACK
    info code (0 on success).
    """
    cdef int n_ = <int> a
    cdef int info = 0
    cdef char uplo = b"L"
    cdef Py_ssize_t r, c
    dpotrf(&uplo, &n_, &h_mat[0, 0], &n_, &info)
    if info != 0:
        return info
    dpotri(&uplo, &n_, &h_mat[0, 0], &n_, &info)
    if info != 0:
        return info
    for r in range(a):
        for c in range(r):
            h_mat[r, c] = h_mat[c, r]
    return 0


cdef class _Rows:
    """Per-station cache of psi_k^T Psi_i rows with amortized growth."""

    cdef object buf
    cdef Py_ssize_t count, n

    def __init__(self, Py_ssize_t n):
        self.buf = np.zeros((4, n))
        self.count = 0
        self.n = n

    cdef void append(self, object row) except *:
        if self.count == len(self.buf):
            grown = np.zeros((2 * len(self.buf), self.n))
            grown[: self.count] = self.buf[: self.count]
            self.buf = grown
        self.buf[self.count] = row
        self.count += 1

    cdef void remove(self, Py_ssize_t k) except *:
        self.buf[k : self.count - 1] = self.buf[k + 1 : self.count]
        self.count -= 1

    cdef object view(self):
        return self.buf[: self.count]


def _refresh(list active, list alpha_a, list rows, list sigmas, list mus,
             list b, double ib2, Py_ssize_t n_st):
    """Recompute Sigma_i, mu_i for the current active set (dpotrf/dpotri)."""
    cdef Py_ssize_t i, a = len(active)
    cdef int info
    cdef _Rows r
    idx = np.asarray(active, dtype=np.intp)
    al = np.asarray(alpha_a)
    diag = np.diag(al)
    for i in range(n_st):
        r = <_Rows> rows[i]
        k = r.view()[:, idx]
        h_mat = np.ascontiguousarray(ib2 * k + diag)
        info = _spd_inverse(h_mat, a)
        if info != 0:
            raise np.linalg.LinAlgError(
                "posterior covariance lost positive definiteness"
            )
        sigmas[i] = h_mat
        mus[i] = ib2 * (h_mat @ b[i][idx])


def solve_shared(
    psis,
    ys,
    beta,
    grams=None,
    max_iters=1000,
    tol_abs=1e-9,
    tol_rel=1e-6,
    max_active=None,
    callback=None,
):
    """Run the shared-support engine (see _fastbcs_py.solve_shared)."""
    cdef Py_ssize_t n, n_st, a, i, j_best
    cdef double ib2
    cdef _Rows rr

    n_st = len(psis)
    if n_st == 0 or len(ys) != n_st:
        raise ValueError("need one measurement per station")
    n = psis[0].shape[1]
    psis = [np.ascontiguousarray(p, dtype=float) for p in psis]
    ys = [np.asarray(y, dtype=float) for y in ys]
    for p, y in zip(psis, ys):
        if p.shape[1] != n:
            raise ValueError("all stations must share the candidate count N")
        if p.shape[0] != y.size:
            raise ValueError("measurement length must match matrix rows")
    beta = float(beta)
    if not beta > 0:
        raise ValueError("beta must be positive")
    if max_active is None:
        max_active = min(p.shape[0] for p in psis)
    max_active = min(max_active, n, min(p.shape[0] for p in psis))

    ib2 = 1.0 / (beta * beta)
    col_sq = [np.ascontiguousarray(np.einsum("mj,mj->j", p, p)) for p in psis]
    b = [np.ascontiguousarray(p.T @ y) for p, y in zip(psis, ys)]

    active = []
    alpha_a = []
    rows = [_Rows(n) for _ in range(n_st)]
    sigmas = [np.zeros((0, 0)) for _ in range(n_st)]
    mus = [np.zeros(0) for _ in range(n_st)]

    l0 = -0.5 * sum(
        y.size * np.log(2.0 * np.pi * beta * beta) + ib2 * float(y @ y) for y in ys
    )
    l_cur = l0
    l_trace = [l0]
    converged = False
    stopped_by_callback = False
    it = 0

    # scratch reused across iterations
    g_all = np.zeros((n_st, n))
    h_all = np.zeros((n_st, n))
    gain_arr = np.zeros(n)
    acc_arr = np.zeros(n)
    g_pool_arr = np.zeros(n)
    theta_num_arr = np.zeros(n)
    cdef double[:, ::1] g_mv = g_all
    cdef double[:, ::1] h_mv = h_all
    cdef double[::1] gain_mv = gain_arr
    cdef double[::1] acc_mv = acc_arr
    cdef double[::1] g_pool_mv = g_pool_arr
    cdef double[::1] theta_num_mv = theta_num_arr

    for i in range(n_st):
        g_all[i] = col_sq[i] * ib2
        h_all[i] = b[i] * ib2

    while it < max_iters:
        a = len(active)
        idx = np.asarray(active, dtype=np.intp)

        g_pool_arr[:] = 0.0
        theta_num_arr[:] = 0.0
        for i in range(n_st):
            rr = <_Rows> rows[i]
            u = rr.view()
            if a:
                t_i = sigmas[i] @ u
                _colwise_dot(u, t_i, acc_mv, a, n)
                utmu = np.ascontiguousarray(u.T @ mus[i])
            else:
                utmu = acc_arr  # never read when has_active is false
            _station_stats(ib2, col_sq[i], b[i], acc_arr, utmu, a > 0,
                           g_all[i], h_all[i], g_pool_mv, theta_num_mv, n)
        if a:
            # active atoms: convert to leave-one-out stats; the pooled
            # accumulators get the matching corrections on the a-sized slices
            al = np.asarray(alpha_a)
            for i in range(n_st):
                s_idx = g_all[i, idx].copy()
                q_idx = h_all[i, idx].copy()
                denom = np.maximum(al - s_idx, 1e-12 * al)
                g_loo = al * s_idx / denom
                h_loo = al * q_idx / denom
                g_pool_arr[idx] += g_loo - s_idx
                theta_num_arr[idx] += h_loo * h_loo - q_idx * q_idx
                g_all[i, idx] = g_loo
                h_all[i, idx] = h_loo
        theta_arr = np.ascontiguousarray(theta_num_arr - g_pool_arr)

        _joint_gains(g_mv, h_mv, g_pool_mv, theta_arr, gain_mv, n_st, n)
        if a:
            al = np.asarray(alpha_a)
            pos_idx = (theta_arr[idx] > 0) & (g_pool_arr[idx] > 0)
            with np.errstate(invalid="ignore", divide="ignore"):
                l_old = np.zeros(a)
                for i in range(n_st):
                    g_i = g_all[i, idx]
                    h_i = h_all[i, idx]
                    l_old += 0.5 * (-np.log1p(g_i / al) + h_i * h_i / (al + g_i))
                # re-estimate replaces the old contribution; delete removes it
                gain_arr[idx] = np.where(pos_idx, gain_arr[idx] - l_old, -l_old)
        if a >= max_active:
            inactive_mask = np.ones(n, dtype=bool)
            inactive_mask[idx] = False
            gain_arr[inactive_mask] = -np.inf
        gain_arr[~np.isfinite(gain_arr)] = -np.inf

        j_best = _argmax(gain_mv, n)
        j = int(j_best)
        best = float(gain_arr[j])
        if not np.isfinite(best) or best <= max(tol_abs, tol_rel * (l_cur - l0)):
            converged = True
            break

        if theta_arr[j] > 0 and g_pool_arr[j] > 0:
            alpha_new_j = float(g_pool_arr[j] * g_pool_arr[j] / theta_arr[j])
        else:
            alpha_new_j = np.inf
        if j in active:
            k = active.index(j)
            if theta_arr[j] > 0:
                alpha_a[k] = alpha_new_j
            else:
                del active[k]
                del alpha_a[k]
                for i in range(n_st):
                    (<_Rows> rows[i]).remove(k)
        else:
            active.append(j)
            alpha_a.append(alpha_new_j)
            for i in range(n_st):
                row = grams[i][j] if grams is not None else psis[i][:, j] @ psis[i]
                (<_Rows> rows[i]).append(np.asarray(row, dtype=float))
        _refresh(active, alpha_a, rows, sigmas, mus, b, ib2, n_st)
        l_cur += best
        l_trace.append(l_cur)
        it += 1
        if callback is not None and callback(it, np.asarray(active), [m.copy() for m in mus]):
            stopped_by_callback = True
            break

    return {
        "active": np.asarray(active, dtype=np.intp),
        "alpha": np.asarray(alpha_a),
        "mus": mus,
        "sigmas": sigmas,
        "gs": [g_all[si].copy() for si in range(n_st)],
        "hs": [h_all[si].copy() for si in range(n_st)],
        "L": l_cur,
        "L_trace": np.asarray(l_trace),
        "iterations": it,
        "converged": converged,
        "stopped_by_callback": stopped_by_callback,
    }
