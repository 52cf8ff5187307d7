"""Iterative linearized least-squares TDOA position solver (2D and 3D).

Measurement model: tau_1i is the arrival-time difference between the
reference anchor (index 0) and anchor i, giving the range difference
D_1i = c * tau_1i = ||a_1 - t|| - ||a_i - t||.  Starting from a guess, each
iteration solves the linearized system A d = (measured - predicted) and
moves the guess by d until ||d|| drops below the threshold.

The Jacobian is the exact derivative of the range difference,

    dD_1i/dx = (x - x_1)/D_1 - (x - x_i)/D_i

verified against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UwbSimError

__all__ = [
    "C_MM_PER_S",
    "AnchorSet",
    "TdoaProblem",
    "PositionEstimate",
    "tau_to_range_diff",
    "range_diff_to_tau",
    "range_difference",
    "tdoa_jacobian",
    "solve_tdoa",
    "solve_tdoa_bounded",
]

# speed of light in mm/s: positions are millimeters, times are seconds
C_MM_PER_S = 2.99792458e11


def tau_to_range_diff(tau, c: float = C_MM_PER_S):
    """Range difference (mm) from an arrival-time difference (s): D = c * tau.

    Single authority for the time/range conversion.
    """
    return c * np.asarray(tau, dtype=float) if np.ndim(tau) else c * float(tau)


def range_diff_to_tau(d, c: float = C_MM_PER_S):
    """Inverse of tau_to_range_diff."""
    return np.asarray(d, dtype=float) / c if np.ndim(d) else float(d) / c


@dataclass(frozen=True)
class AnchorSet:
    """I anchor positions in millimeters, shape (I, dim) with dim in {2, 3}."""

    positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        p = self.positions
        if p.ndim != 2 or p.shape[1] not in (2, 3):
            raise ValueError("positions must be (I, 2) or (I, 3)")
        if p.shape[0] < p.shape[1] + 1:
            raise ValueError(
                f"need at least dim+1 anchors, got {p.shape[0]} for dim {p.shape[1]}"
            )
        if not np.all(np.isfinite(p)):
            raise ValueError("anchor positions must be finite")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def max_pair_distance(self) -> float:
        p = self.positions
        d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
        return float(d.max())

    def rank_check(self) -> None:
        """Reject collinear (2D) / coplanar (3D) anchor layouts."""
        centered = self.positions - self.centroid()
        if np.linalg.matrix_rank(centered, tol=1e-6) < self.dim:
            raise UwbSimError("degenerate anchor geometry: rank below dimension")


@dataclass(frozen=True)
class TdoaProblem:
    """Anchors plus measured arrival-time differences tau_1i (i = 2..I)."""

    anchors: AnchorSet
    tau: np.ndarray
    c: float = C_MM_PER_S

    def __post_init__(self):
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float))
        if self.tau.shape != (self.anchors.count - 1,):
            raise ValueError(
                f"need {self.anchors.count - 1} differences, got {self.tau.shape}"
            )
        if not self.c > 0:
            raise ValueError("c must be positive")
        limit = 1.05 * self.anchors.max_pair_distance() + 100.0
        ranges = np.abs(tau_to_range_diff(self.tau, self.c))
        if np.any(ranges > limit):
            raise ValueError(
                f"range difference {ranges.max():.1f} mm exceeds anchor span "
                f"(limit {limit:.1f} mm): measurements are inconsistent"
            )


@dataclass(frozen=True)
class PositionEstimate:
    """Solver output: position (mm), iteration count, last step norm (mm)."""

    position: np.ndarray
    iterations: int
    final_err: float
    converged: bool

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


def _distances(anchors: np.ndarray, point: np.ndarray) -> np.ndarray:
    return np.linalg.norm(anchors - point[None, :], axis=1)


def range_difference(anchors: AnchorSet, tag, i: int) -> float:
    """D_1i = ||a_1 - tag|| - ||a_i - tag|| in mm, for anchor index i >= 1."""
    tag = np.asarray(tag, dtype=float)
    if not 1 <= i < anchors.count:
        raise ValueError(f"anchor index must be in [1, {anchors.count - 1}], got {i}")
    d = _distances(anchors.positions[[0, i]], tag)
    if np.any(d == 0.0):
        raise UwbSimError("tag coincides with an anchor: range difference is singular there")
    return float(d[0] - d[1])


def _predicted(anchors: AnchorSet, tag: np.ndarray) -> np.ndarray:
    d = _distances(anchors.positions, tag)
    if np.any(d == 0.0):
        raise UwbSimError("guess coincides with an anchor")
    return d[0] - d[1:]


def tdoa_jacobian(anchors: AnchorSet, guess) -> np.ndarray:
    """Derivative of each range difference with respect to the guess.

    Row i-1 holds dD_1i/d(guess) = (guess - a_1)/D_1 - (guess - a_i)/D_i.
    """
    guess = np.asarray(guess, dtype=float)
    p = anchors.positions
    d = _distances(p, guess)
    if np.any(d == 0.0):
        raise UwbSimError("guess coincides with an anchor: Jacobian singular")
    units = (guess[None, :] - p) / d[:, None]
    return units[0][None, :] - units[1:]


def solve_tdoa(
    problem: TdoaProblem,
    initial_guess=None,
    err_threshold: float = 1e-6,
    max_iters: int = 100,
) -> PositionEstimate:
    """Gauss-Newton iteration on the range-difference residuals.

    Stops when the step norm ||d|| falls under err_threshold (converged) or
    at max_iters; five consecutive iterations with a growing step norm count
    as divergence and return a non-converged estimate.  Steps that increase
    the residual norm are halved up to 10 times (plain iteration overshoots
    near anchors).
    """
    anchors = problem.anchors
    anchors.rank_check()
    if not err_threshold > 0:
        raise ValueError("err_threshold must be positive")
    measured = tau_to_range_diff(problem.tau, problem.c)
    guess = (
        anchors.centroid() if initial_guess is None else np.asarray(initial_guess, dtype=float)
    )
    if guess.shape != (anchors.dim,):
        raise ValueError(f"initial guess must have shape ({anchors.dim},)")

    err = np.inf
    growing = 0
    it = 0
    for it in range(1, max_iters + 1):
        resid = measured - _predicted(anchors, guess)
        jac = tdoa_jacobian(anchors, guess)
        if np.linalg.matrix_rank(jac, tol=1e-12) < anchors.dim:
            # all sight lines collapse to parallel: the iterate wandered far
            # outside the anchor span, which is divergence, not a geometry error
            return PositionEstimate(guess, it, err, False)
        step, *_ = np.linalg.lstsq(jac, resid, rcond=None)
        # damping: back off while the step makes the residual worse
        r0 = float(np.linalg.norm(resid))
        for _ in range(10):
            new_resid = measured - _predicted(anchors, guess + step)
            if float(np.linalg.norm(new_resid)) <= r0:
                break
            step = 0.5 * step
        guess = guess + step
        prev_err, err = err, float(np.linalg.norm(step))
        if err < err_threshold:
            return PositionEstimate(guess, it, err, True)
        growing = growing + 1 if err > prev_err else 0
        if growing >= 5:
            break
    return PositionEstimate(guess, it, err, False)


def _residual_norm(problem: TdoaProblem, point: np.ndarray) -> float:
    measured = tau_to_range_diff(problem.tau, problem.c)
    return float(np.linalg.norm(measured - _predicted(problem.anchors, point)))


def solve_tdoa_bounded(
    problem: TdoaProblem,
    bounds,
    initial_guess=None,
    err_threshold: float = 1e-6,
    max_iters: int = 100,
    margin: float = 500.0,
) -> PositionEstimate:
    """Solve within a known service region, restarting past mirror roots.

    The range-difference equations generically have two exact intersection
    points; plain iteration started from an unlucky guess converges to the
    mirror root, which satisfies the measurements to machine precision, so no
    residual test can reject it.  What does distinguish the two is location:
    the system knows the region it serves (the room), and mirror roots fall
    outside it.  This wrapper runs solve_tdoa from a deterministic sequence of
    starting points -- caller's guess (or the anchor centroid), the region
    center, then the region's interior corner points -- and accepts the first
    converged estimate that lies within ``bounds`` inflated by ``margin`` mm
    (the margin keeps legitimately noisy fixes near the walls).

    If no start produces an in-region root, the best out-of-region converged
    root is returned with ``converged`` forced to False: a fix outside the
    service area is a detectable outage, not a position.  The returned
    ``iterations`` is the total spent across all attempts.
    """
    lo_hi = np.asarray(bounds, dtype=float)
    dim = problem.anchors.dim
    if lo_hi.shape != (dim, 2) or not np.all(lo_hi[:, 0] < lo_hi[:, 1]):
        raise ValueError(f"bounds must be {dim} (low, high) pairs with low < high")
    if not np.all(np.isfinite(lo_hi)) or margin < 0:
        raise ValueError("bounds must be finite and margin non-negative")
    lo, hi = lo_hi[:, 0], lo_hi[:, 1]

    starts = [np.asarray(initial_guess, dtype=float)] if initial_guess is not None else []
    starts.append(problem.anchors.centroid())
    # rescue starts: region center plus every interior corner (low/high
    # combinations at 1/4 and 3/4 of the span), tried in order of increasing
    # residual -- in-region points with small residual sit near the true root
    rescue = [0.5 * (lo + hi)]
    for bits in range(2**dim):
        frac = np.array([0.75 if bits >> k & 1 else 0.25 for k in range(dim)])
        rescue.append(lo + frac * (hi - lo))
    starts.extend(sorted(rescue, key=lambda p: _residual_norm(problem, p)))

    spent = 0
    fallback = None
    fallback_gap = np.inf
    for start in starts:
        try:
            est = solve_tdoa(problem, start, err_threshold, max_iters)
        except UwbSimError:
            continue  # e.g. a start coinciding with an anchor: try the next one
        spent += est.iterations
        if not est.converged:
            continue
        gap = float(np.maximum(lo - margin - est.position, est.position - hi - margin).max())
        if gap <= 0:
            return PositionEstimate(est.position, spent, est.final_err, True)
        if gap < fallback_gap:
            fallback, fallback_gap = est, gap
    if fallback is not None:
        return PositionEstimate(fallback.position, spent, fallback.final_err, False)
    return PositionEstimate(starts[0], spent, np.inf, False)
