"""NumPy implementation of the shared-support fast-BCS kernel.

Incremental (add / re-estimate / delete) maximization of the marginal
log-likelihood of a Gaussian linear model with independent zero-mean
priors x_j ~ N(0, 1/alpha_j) and known noise std beta, jointly over one or
more stations that share the hyperparameter vector alpha while keeping
per-station amplitudes.

Per station i with sensing matrix Psi_i and measurement y_i, each candidate
column j carries the sparsity/quality pair (g_j, h_j); the single-station
contribution of atom j to the likelihood at hyperparameter alpha is

    l1(alpha; g, h) = 0.5 * (ln alpha - ln(alpha + g) + h^2 / (alpha + g))

Stations are coupled by summing: G_j = sum_i g_j^(i), H2_j = sum_i h_j^(i)^2,
and the stationary point of sum_i l1 is alpha_j = G_j^2 / (H2_j - G_j) when
H2_j > G_j, else alpha_j = inf (atom excluded).  Every accepted update is
the exact candidate with the largest joint likelihood gain (ties: lowest
index), so the likelihood trace is non-decreasing by construction.

The compiled kernel in _fastbcs.pyx implements the identical contract; see
backend.py for selection.  Keep the two in lockstep.
"""

from __future__ import annotations

import numpy as np

KERNEL_NAME = "python"

# update codes in the trace
ADD, REESTIMATE, DELETE = 0, 1, 2


def _l1(alpha, g, h2):
    """Per-station likelihood contribution of an atom at hyperparameter alpha."""
    return 0.5 * (-np.log1p(g / alpha) + h2 / (alpha + g))


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
    """Run the shared-support engine.

    Parameters
    ----------
    psis : list of (M_i, N) float arrays
        Per-station effective sensing matrices (all share N columns).
    ys : list of (M_i,) float arrays
    beta : float
        Known noise standard deviation, > 0.
    grams : list of (N, N) arrays, optional
        Precomputed Psi_i^T Psi_i; worthwhile when one matrix serves many
        solves.  Without it active-row products are formed on demand.
    max_iters : int
        Cap on accepted updates; hitting it flags converged=False.
    tol_abs, tol_rel : float
        Stop when the best available likelihood gain falls below
        max(tol_abs, tol_rel * (L - L0)).
    max_active : int, optional
        Hard cap on the active-set size (default min_i M_i).
    callback : callable, optional
        callback(iteration, active, mus) -> bool, invoked after each
        accepted update; returning True stops the solve early.

    Returns
    -------
    dict with keys active, alpha, mus, sigmas, gs, hs, L, L_trace,
    iterations, converged, stopped_by_callback.
    """
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
    if not beta > 0:
        raise ValueError("beta must be positive")
    if max_active is None:
        max_active = min(p.shape[0] for p in psis)
    max_active = min(max_active, n, min(p.shape[0] for p in psis))

    ib2 = 1.0 / (beta * beta)
    # static per-station candidate stats
    col_sq = [np.einsum("mj,mj->j", p, p) for p in psis]
    b = [p.T @ y for p, y in zip(psis, ys)]

    # active-set state
    active: list[int] = []
    alpha_a: list[float] = []
    us = [np.zeros((0, n)) for _ in range(n_st)]  # rows: psi_k^T Psi_i, k active
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
    gs = [col_sq[i] * ib2 for i in range(n_st)]
    hs = [b[i] * ib2 for i in range(n_st)]

    def refresh():
        """Recompute Sigma_i, mu_i for the current active set (Cholesky)."""
        idx = np.asarray(active, dtype=np.intp)
        al = np.asarray(alpha_a)
        for i in range(n_st):
            k = us[i][:, idx]  # active Gram block
            h_mat = ib2 * k + np.diag(al)
            try:
                c = np.linalg.cholesky(h_mat)
            except np.linalg.LinAlgError:
                raise np.linalg.LinAlgError(
                    "posterior covariance lost positive definiteness"
                ) from None
            inv = np.linalg.inv(c)
            sigmas[i] = inv.T @ inv
            mus[i] = ib2 * (sigmas[i] @ b[i][idx])

    while it < max_iters:
        a = len(active)
        idx = np.asarray(active, dtype=np.intp)

        # per-station S (sparsity) and Q (quality) for every candidate
        theta_num = np.zeros(n)  # H2 - G accumulators
        g_pool = np.zeros(n)
        gs = []
        hs = []
        for i in range(n_st):
            if a:
                t_i = sigmas[i] @ us[i]
                s_i = ib2 * col_sq[i] - ib2 * ib2 * np.einsum("kj,kj->j", us[i], t_i)
                q_i = ib2 * (b[i] - us[i].T @ mus[i])
            else:
                s_i = ib2 * col_sq[i].copy()
                q_i = ib2 * b[i].copy()
            g_i = s_i.copy()
            h_i = q_i.copy()
            if a:
                # active atoms: convert to leave-one-out stats
                al = np.asarray(alpha_a)
                denom = np.maximum(al - s_i[idx], 1e-12 * al)
                g_i[idx] = al * s_i[idx] / denom
                h_i[idx] = al * q_i[idx] / denom
            gs.append(g_i)
            hs.append(h_i)
            g_pool += g_i
            theta_num += h_i * h_i
        theta = theta_num - g_pool

        # joint likelihood gain of the best move for every candidate
        gain = np.full(n, -np.inf)
        # g_pool > 0 holds exactly but cancellation at extreme beta^-2 can
        # break it; such candidates are numerically unusable, not maximal
        pos = (theta > 0) & (g_pool > 0)
        alpha_new = np.full(n, np.inf)
        alpha_new[pos] = g_pool[pos] ** 2 / theta[pos]
        if pos.any():
            with np.errstate(invalid="ignore", divide="ignore"):
                tot = np.zeros(n)
                for i in range(n_st):
                    tot[pos] += _l1(alpha_new[pos], gs[i][pos], hs[i][pos] ** 2)
            gain[pos] = tot[pos]
        if a:
            al = np.asarray(alpha_a)
            with np.errstate(invalid="ignore", divide="ignore"):
                l_old = np.zeros(a)
                for i in range(n_st):
                    l_old += _l1(al, gs[i][idx], hs[i][idx] ** 2)
                # re-estimate replaces the old contribution; delete removes it
                gain[idx] = np.where(pos[idx], gain[idx] - l_old, -l_old)
        if a >= max_active:
            inactive_mask = np.ones(n, dtype=bool)
            inactive_mask[idx] = False
            gain[inactive_mask] = -np.inf
        gain[~np.isfinite(gain)] = -np.inf

        j = int(np.argmax(gain))
        best = gain[j]
        if not np.isfinite(best) or best <= max(tol_abs, tol_rel * (l_cur - l0)):
            converged = True
            break

        if j in active:
            k = active.index(j)
            if theta[j] > 0:
                alpha_a[k] = float(alpha_new[j])
            else:
                del active[k]
                del alpha_a[k]
                for i in range(n_st):
                    us[i] = np.delete(us[i], k, axis=0)
        else:
            active.append(j)
            alpha_a.append(float(alpha_new[j]))
            for i in range(n_st):
                row = grams[i][j] if grams is not None else psis[i][:, j] @ psis[i]
                us[i] = np.vstack([us[i], row[None, :]])
        refresh()
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
        "gs": gs,
        "hs": hs,
        "L": l_cur,
        "L_trace": np.asarray(l_trace),
        "iterations": it,
        "converged": converged,
        "stopped_by_callback": stopped_by_callback,
    }
