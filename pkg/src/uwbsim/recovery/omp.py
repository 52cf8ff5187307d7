"""Orthogonal matching pursuit."""

from __future__ import annotations

import numpy as np

from ..errors import UwbSimError
from .engine import _entries, _values
from .types import ReconResult

__all__ = ["omp", "RankDeficientError"]


class RankDeficientError(UwbSimError):
    """Active-set least squares became rank deficient; carries the last
    full-rank result in .partial."""

    def __init__(self, message: str, partial: ReconResult):
        super().__init__(message)
        self.partial = partial


def omp(y, phi, max_nonzeros: int | None = None, residual_tol: float | None = None) -> ReconResult:
    """Greedy sparse recovery: pick the atom best correlated with the
    residual, re-fit the active set by least squares, repeat.

    Parameters
    ----------
    y : (M,) array or MeasurementVector
    phi : (M, N) array or ProjectionMatrix
    max_nonzeros : int, optional
        Stop after this many atoms.
    residual_tol : float, optional
        Stop once ||y - Phi x|| drops to this level.  At least one stopping
        criterion must be given.

    Returns
    -------
    ReconResult
        coeffs in the identity basis; s_hat == coeffs.
    """
    a = _entries(phi)
    yv = _values(y)
    m, n = a.shape
    if yv.size != m:
        raise ValueError(f"y has length {yv.size}, matrix has M={m}")
    if max_nonzeros is None and residual_tol is None:
        raise ValueError("need max_nonzeros and/or residual_tol as a stopping criterion")
    if max_nonzeros is None:
        max_nonzeros = m
    max_nonzeros = min(max_nonzeros, m, n)

    x = np.zeros(n)
    active: list[int] = []
    resid = yv.copy()
    # machine-noise floor: an exactly fit residual must stop the greedy loop
    floor = 1e-12 * float(np.linalg.norm(yv))
    it = 0
    while len(active) < max_nonzeros:
        r_norm = float(np.linalg.norm(resid))
        if r_norm <= floor or (residual_tol is not None and r_norm <= residual_tol):
            break
        corr = np.abs(a.T @ resid)
        if active:
            corr[active] = -1.0  # never re-pick an active atom
        j = int(np.argmax(corr))
        if corr[j] <= 0.0:
            break  # residual orthogonal to every remaining atom
        active.append(j)
        sub = a[:, active]
        sol, _, rank, _ = np.linalg.lstsq(sub, yv, rcond=None)
        if rank < len(active):
            partial = ReconResult(s_hat=x.copy(), coeffs=x.copy(), iterations=it, converged=False)
            raise RankDeficientError(
                f"active set of size {len(active)} is rank deficient (rank {rank})", partial
            )
        x = np.zeros(n)
        x[active] = sol
        resid = yv - sub @ sol
        it += 1
    r_norm = float(np.linalg.norm(resid))
    converged = (
        residual_tol is None
        or r_norm <= residual_tol
        or r_norm <= floor
        or not np.any(np.abs(a.T @ resid) > 0.0)
    )
    return ReconResult(s_hat=x.copy(), coeffs=x, iterations=it, converged=bool(converged))
