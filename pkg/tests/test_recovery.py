"""Oracle tests for the sparse-recovery algorithms.

Each algorithm is checked against targets computed independently of the
implementation: exhaustive searches for 1-sparse problems, least squares on
the true support, dense linear solves in the square noiseless regime, and
KKT optimality conditions for the l1 solver.
"""

import numpy as np
import pytest

from conftest import well_posed_square
from uwbsim.recovery.bp import bp_denoise
from uwbsim.recovery.engine import CsUwbSolver, bcs, cs_uwb
from uwbsim.recovery.omp import omp
from uwbsim.recovery.types import TemplateDictionary
from uwbsim.signal_model import PulseSpec


def _sparse_problem(m, n, k, seed, noise=0.0):
    g = np.random.default_rng(seed)
    phi = g.standard_normal((m, n)) / np.sqrt(m)
    x = np.zeros(n)
    support = g.choice(n, size=k, replace=False)
    x[support] = g.uniform(1.0, 2.0, size=k) * g.choice([-1.0, 1.0], size=k)
    y = phi @ x + noise * g.standard_normal(m)
    return phi, x, np.sort(support), y


# ---------------------------------------------------------------- OMP


def test_omp_recovers_known_support_noiseless():
    phi, x, support, y = _sparse_problem(64, 256, 4, seed=0)
    res = omp(y, phi, max_nonzeros=4)
    got = np.sort(np.flatnonzero(res.s_hat))
    np.testing.assert_array_equal(got, support)
    # coefficients must match least squares on the true support
    ls, *_ = np.linalg.lstsq(phi[:, support], y, rcond=None)
    np.testing.assert_allclose(res.s_hat[support], ls, rtol=1e-10)
    np.testing.assert_allclose(res.s_hat[support], x[support], rtol=1e-10)
    assert res.converged


def test_omp_one_sparse_exhaustive_oracle():
    g = np.random.default_rng(1)
    m, n = 24, 48
    phi = g.standard_normal((m, n))
    phi /= np.linalg.norm(phi, axis=0, keepdims=True)
    for j in range(n):
        y = 1.7 * phi[:, j]
        # oracle: the best single atom by exhaustive correlation search
        best = int(np.argmax(np.abs(phi.T @ y)))
        assert best == j
        res = omp(y, phi, max_nonzeros=1)
        assert np.flatnonzero(res.s_hat).tolist() == [j]
        assert res.s_hat[j] == pytest.approx(1.7, rel=1e-12)


def test_omp_residual_tol_stop():
    phi, x, support, y = _sparse_problem(64, 128, 3, seed=2)
    res = omp(y, phi, residual_tol=1e-10)
    assert np.linalg.norm(y - phi @ res.s_hat) <= 1e-10
    assert res.iterations <= 6


def test_omp_max_nonzeros_cap():
    phi, x, support, y = _sparse_problem(32, 64, 5, seed=3)
    res = omp(y, phi, max_nonzeros=2)
    assert np.count_nonzero(res.s_hat) <= 2


# ---------------------------------------------------------------- BP denoise


def test_bp_square_noiseless_matches_dense_solve():
    n = 10
    phi = well_posed_square(n, seed=4)
    x = np.random.default_rng(5).standard_normal(n)
    y = phi @ x
    res = bp_denoise(y, phi, lam=1e-9, tol=1e-14, max_iters=200_000)
    direct = np.linalg.solve(phi, y)
    np.testing.assert_allclose(res.s_hat, direct, rtol=0, atol=1e-6)


def test_bp_one_sparse_exhaustive_oracle():
    g = np.random.default_rng(6)
    m, n = 20, 40
    phi = g.standard_normal((m, n))
    phi /= np.linalg.norm(phi, axis=0, keepdims=True)
    for j in range(0, n, 5):
        y = 2.0 * phi[:, j]
        res = bp_denoise(y, phi, lam=1e-6, tol=1e-12, max_iters=100_000)
        assert int(np.argmax(np.abs(res.s_hat))) == j
        assert res.s_hat[j] == pytest.approx(2.0, abs=1e-4)
        off = np.delete(res.s_hat, j)
        assert np.max(np.abs(off)) < 1e-4


def test_bp_solution_satisfies_kkt_conditions():
    # independent optimality check: at the minimizer of
    # 0.5||y - Phi x||^2 + lam*||x||_1 the gradient of the smooth part must
    # equal -lam*sign(x_i) on the support and lie within [-lam, lam] off it
    phi, x, support, y = _sparse_problem(48, 96, 4, seed=7, noise=0.01)
    lam = 0.02
    res = bp_denoise(y, phi, lam=lam, tol=1e-13, max_iters=300_000)
    grad = phi.T @ (phi @ res.s_hat - y)
    on = np.abs(res.s_hat) > 1e-9
    np.testing.assert_allclose(grad[on], -lam * np.sign(res.s_hat[on]), atol=1e-6)
    assert np.all(np.abs(grad[~on]) <= lam + 1e-6)


def test_bp_default_lambda_runs():
    phi, x, support, y = _sparse_problem(32, 64, 3, seed=8, noise=0.02)
    res = bp_denoise(y, phi)
    assert res.s_hat.shape == (64,)
    assert np.isfinite(res.s_hat).all()


# ---------------------------------------------------------------- fast BCS


def test_bcs_square_noiseless_matches_dense_solve():
    n = 12
    phi = well_posed_square(n, seed=9)
    x = np.zeros(n)
    x[[1, 4, 9]] = [1.2, -0.8, 0.5]
    y = phi @ x
    res, _state = bcs(y, phi, beta=1e-5)
    np.testing.assert_allclose(res.s_hat, np.linalg.solve(phi, y), atol=1e-6)


def test_bcs_shrinkage_vanishes_with_beta():
    # the posterior mean approaches the exact solve as beta^2 (Bayesian
    # shrinkage), so halving beta must cut the gap by about 4x
    n = 12
    phi = well_posed_square(n, seed=9)
    x = np.random.default_rng(10).standard_normal(n)
    y = phi @ x
    direct = np.linalg.solve(phi, y)
    gaps = []
    for beta in (2e-5, 1e-5, 5e-6):
        res, _ = bcs(y, phi, beta=beta)
        gaps.append(np.max(np.abs(res.s_hat - direct)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.3)
    assert gaps[2] < 1e-6


def test_bcs_sparse_recovery_with_noise():
    phi, x, support, y = _sparse_problem(96, 256, 3, seed=11, noise=0.01)
    res, state = bcs(y, phi, beta=0.01)
    assert np.all(np.diff(state.l_trace) >= -1e-9)
    got = np.sort(np.flatnonzero(np.abs(res.s_hat) > 0.1))
    np.testing.assert_array_equal(got, support)
    np.testing.assert_allclose(res.s_hat[support], x[support], atol=0.05)


# ---------------------------------------------------------------- shared support


def _station_dictionary(n=64):
    return TemplateDictionary.from_pulse(PulseSpec(sigma=150e-12), n=n, dt=40e-12)


def test_cs_uwb_square_noiseless_matches_dense_solve():
    n = 12
    dictionary = TemplateDictionary.from_pulse(PulseSpec(sigma=1.5e-10), n=n, dt=1e-10)
    g = np.random.default_rng(12)
    phi = np.eye(n)
    x = np.zeros(n)
    x[[3, 8]] = [1.0, -0.7]
    y = dictionary.columns @ x
    res = cs_uwb([y], [phi], dictionary, beta=1e-5)[0]
    direct = dictionary.columns @ np.linalg.solve(dictionary.columns, y)
    np.testing.assert_allclose(res.s_hat, direct, atol=1e-6)


def test_cs_uwb_shared_support_across_stations():
    # three stations see the same two arrival bins with different amplitudes;
    # the joint solver must return one support for all of them
    n, m = 96, 48
    dictionary = _station_dictionary(n)
    g = np.random.default_rng(13)
    bins = [20, 55]
    phis, ys, amps = [], [], []
    for s in range(3):
        phi = g.standard_normal((m, n)) / np.sqrt(m)
        a = g.uniform(0.8, 1.2, size=2)
        s_true = dictionary.reconstruct(np.array(bins), a)
        phis.append(phi)
        ys.append(phi @ s_true + 1e-3 * g.standard_normal(m))
        amps.append(a)
    solver = CsUwbSolver(phis, dictionary)
    results = solver.solve(ys, beta=1e-3)
    supports = [np.flatnonzero(np.abs(r.coeffs) > 1e-6) for r in results]
    for sup in supports[1:]:
        np.testing.assert_array_equal(sup, supports[0])
    assert set(bins) <= set(supports[0].tolist())
    for r, a in zip(results, amps):
        np.testing.assert_allclose(r.coeffs[bins], a, atol=0.05)


def test_cs_uwb_strategies_agree_on_clean_problem():
    n, m = 64, 48
    dictionary = _station_dictionary(n)
    g = np.random.default_rng(14)
    phi = [g.standard_normal((m, n)) / np.sqrt(m) for _ in range(2)]
    s_true = dictionary.reconstruct(np.array([30]), np.array([1.0]))
    ys = [p @ s_true for p in phi]
    summed = cs_uwb(ys, phi, dictionary, beta=1e-4, strategy="summed")
    indep = cs_uwb(ys, phi, dictionary, beta=1e-4, strategy="independent")
    for a, b in zip(summed, indep):
        assert int(np.argmax(np.abs(a.coeffs))) == int(np.argmax(np.abs(b.coeffs))) == 30


def test_cs_uwb_rejects_mismatched_station_counts():
    dictionary = _station_dictionary(32)
    phi = np.random.default_rng(15).standard_normal((16, 32))
    with pytest.raises(Exception):
        cs_uwb([np.zeros(16)], [phi, phi], dictionary, beta=1e-3)
