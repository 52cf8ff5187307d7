"""Built-in sanity suite: fast oracle and invariant checks.

Each check is a plain function that raises AssertionError with a readable
message on failure.  They are deliberately small (the whole suite runs in a
few seconds) so they can gate an installation or a rebuilt extension from
the command line: `uwbsim selftest`.
"""

from __future__ import annotations

import numpy as np

from .recovery import CsUwbSolver, TemplateDictionary, bcs, bp_denoise, omp
from .recovery.backend import available_kernels
from .recovery._fastbcs_py import _l1
from .signal_model import PulseSpec, SignalFrame, gaussian_pulse
from .arrival import detect_arrival
from .sequential import SequentialConfig, equivalent_rate, extension_scale
from .tdoa import (AnchorSet, TdoaProblem, range_diff_to_tau, range_difference,
                   solve_tdoa, tdoa_jacobian)

__all__ = ["CHECKS", "check_names", "run"]


def _square_noiseless(seed: int, n: int = 10, k: int = 2):
    """A well-conditioned square system with a k-sparse ground truth."""
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((n, n)) + 3.0 * np.eye(n)
    phi /= np.linalg.norm(phi, axis=0, keepdims=True)
    x = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    x[support] = rng.uniform(1.0, 2.0, size=k) * rng.choice([-1.0, 1.0], size=k)
    return phi, x, phi @ x


def check_recovery_small_n() -> None:
    """On square noiseless systems every algorithm matches the direct solve."""
    for seed in range(3):
        phi, x, y = _square_noiseless(seed)
        direct = np.linalg.solve(phi, y)
        assert np.max(np.abs(direct - x)) < 1e-10, "direct solve is not the ground truth"

        rec = omp(y, phi, residual_tol=1e-10)
        err = np.max(np.abs(rec.s_hat - direct))
        assert err < 1e-6, f"omp deviates from direct solve by {err:.2e}"

        rec = bp_denoise(y, phi, lam=1e-9, tol=1e-14, max_iters=200_000)
        err = np.max(np.abs(rec.s_hat - direct))
        assert err < 1e-6, f"bp deviates from direct solve by {err:.2e}"

        rec, _ = bcs(y, phi, beta=1e-5)
        err = np.max(np.abs(rec.s_hat - direct))
        assert err < 1e-6, f"bcs deviates from direct solve by {err:.2e}"


def check_multistation_small_n() -> None:
    """The shared-support solver agrees with per-station direct solves."""
    n, dt = 12, 1e-10
    dictionary = TemplateDictionary.from_pulse(PulseSpec(sigma=1.5e-10), n, dt)
    rng = np.random.default_rng(11)
    phi = rng.standard_normal((n, n)) + 3.0 * np.eye(n)
    x = np.zeros(n)
    x[[3, 8]] = (1.4, 0.9)
    s = dictionary.columns @ x
    y = phi @ s
    solver = CsUwbSolver([phi], dictionary)
    res = solver.solve([y], beta=1e-5)[0]
    direct = np.linalg.solve(phi, y)
    err = np.max(np.abs(res.s_hat - direct))
    assert err < 1e-6, f"cs_uwb deviates from direct solve by {err:.2e}"


def _range_diffs(anchors: AnchorSet, tag) -> np.ndarray:
    return np.array([range_difference(anchors, tag, i)
                     for i in range(1, anchors.count)])


def check_tdoa_jacobian_fd() -> None:
    """Analytic TDOA Jacobian matches central finite differences."""
    rng = np.random.default_rng(2)
    anchors = AnchorSet(rng.uniform(0.0, 5000.0, size=(4, 3)))
    h = 1e-3
    for _ in range(10):
        guess = rng.uniform(500.0, 4500.0, size=3)
        jac = tdoa_jacobian(anchors, guess)
        fd = np.zeros_like(jac)
        for d in range(3):
            e = np.zeros(3)
            e[d] = h
            fd[:, d] = (_range_diffs(anchors, guess + e)
                        - _range_diffs(anchors, guess - e)) / (2.0 * h)
        err = np.max(np.abs(jac - fd))
        assert err < 1e-6, f"jacobian mismatch {err:.2e} at guess {guess}"


def check_tdoa_roundtrip() -> None:
    """Noiseless range differences are solved back to the true position."""
    rng = np.random.default_rng(3)
    anchors = AnchorSet([[0.0, 0.0, 170.0], [4000.0, 0.0, 1855.0],
                         [4410.0, 4435.0, 2860.0], [0.0, 4545.0, 3260.0]])
    for _ in range(5):
        tag = rng.uniform(1000.0, 3500.0, size=3)
        tau = range_diff_to_tau(_range_diffs(anchors, tag))
        est = solve_tdoa(TdoaProblem(anchors, tau))
        err = float(np.linalg.norm(est.position - tag))
        assert est.converged and err < 1e-3, f"roundtrip error {err:.2e} mm"


def check_alpha_update_numeric_max() -> None:
    """The closed-form hyperparameter update maximizes the likelihood term.

    For pooled statistics (g, h^2) the stationary point g^2 / (h^2 - g) must
    beat every alpha on a wide log grid; when h^2 <= g the supremum sits at
    alpha -> infinity instead.
    """
    rng = np.random.default_rng(4)
    grid = np.logspace(-8.0, 14.0, 2000)
    for _ in range(50):
        g = float(rng.uniform(0.1, 10.0))
        h2 = float(rng.uniform(0.0, 30.0))
        values = _l1(grid, g, h2)
        if h2 > g:
            alpha_star = g * g / (h2 - g)
            best = _l1(alpha_star, g, h2)
            assert best >= values.max() - 1e-9, (
                f"closed form loses to the grid: {best:.6e} < {values.max():.6e}"
            )
        else:
            # no finite maximizer: the term increases toward its limit 0
            assert values.max() <= 1e-6, (
                f"expected supremum at infinity, grid found {values.max():.2e}"
            )
            assert abs(_l1(1e16, g, h2)) < 1e-12


def check_arrival_subbin() -> None:
    """Sub-bin interpolation is exact for an off-grid sampled pulse."""
    pulse = PulseSpec(sigma=150e-12)
    dt = 10e-12
    t = dt * np.arange(512)
    for frac in (0.17, 0.5, 0.83):
        t0 = (200 + frac) * dt
        frame = SignalFrame(gaussian_pulse(t - t0, pulse), dt)
        est = detect_arrival(frame)
        err = abs(est.time - t0)
        assert err < 1e-3 * dt, f"sub-bin error {err / dt:.2e} bins at offset {frac}"


def check_sequential_rate() -> None:
    """Slightly detuned sampling stretches time by f_p / (f_p - f_s)."""
    cfg = SequentialConfig(f_p=10e6, f_s=9.999e6)
    scale = extension_scale(cfg)
    assert abs(scale.k_nominal - 10_000.0) < 1e-6, f"round count {scale.k_nominal}"
    assert abs(scale.delta_k) < 1e-9, "no drift must mean no extension shift"
    f_eq = equivalent_rate(cfg.f_p, cfg.f_s)
    assert abs(f_eq - scale.k_nominal * cfg.f_s) / f_eq < 1e-12, "equivalent rate identity"


def check_backend_agreement() -> None:
    """All importable kernels pick the same support on a random problem."""
    kernels = available_kernels()
    rng = np.random.default_rng(6)
    phi = rng.standard_normal((20, 40))
    phi /= np.linalg.norm(phi, axis=0, keepdims=True)
    x = np.zeros(40)
    x[[7, 23]] = (1.5, -1.1)
    y = phi @ x + 0.01 * rng.standard_normal(20)
    results = {
        name: kern.solve_shared([phi], [y], 0.01) for name, kern in kernels.items()
    }
    baseline = results["python"]
    for name, res in results.items():
        assert np.array_equal(np.sort(res["active"]), np.sort(baseline["active"])), (
            f"kernel {name} picked a different support"
        )
        assert abs(res["L"] - baseline["L"]) <= 1e-7 * max(1.0, abs(baseline["L"])), (
            f"kernel {name} likelihood differs"
        )


CHECKS = (
    ("recovery-small-n-equivalence", check_recovery_small_n),
    ("multistation-small-n-equivalence", check_multistation_small_n),
    ("tdoa-jacobian-fd", check_tdoa_jacobian_fd),
    ("tdoa-noiseless-roundtrip", check_tdoa_roundtrip),
    ("alpha-update-numeric-max", check_alpha_update_numeric_max),
    ("arrival-subbin-exact", check_arrival_subbin),
    ("sequential-rate-identity", check_sequential_rate),
    ("kernel-backend-agreement", check_backend_agreement),
)


def check_names() -> list:
    return [name for name, _ in CHECKS]


def run(names=None, out=print) -> bool:
    """Run the named checks (all by default); returns True when all pass."""
    wanted = set(names) if names else None
    unknown = (wanted or set()) - set(check_names())
    if unknown:
        raise ValueError(f"unknown checks: {', '.join(sorted(unknown))}")
    all_ok = True
    for name, fn in CHECKS:
        if wanted is not None and name not in wanted:
            continue
        try:
            fn()
        except AssertionError as exc:
            all_ok = False
            out(f"FAIL {name}: {exc}")
        except Exception as exc:  # noqa: BLE001 -- a crash is a failure, not an abort
            all_ok = False
            out(f"FAIL {name}: {type(exc).__name__}: {exc}")
        else:
            out(f"ok   {name}")
    return all_ok
