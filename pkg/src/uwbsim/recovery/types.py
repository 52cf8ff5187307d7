"""Shared types for the reconstruction algorithms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from ..signal_model import PulseSpec, SignalFrame, gaussian_pulse

__all__ = ["TemplateDictionary", "ReconResult", "BcsState", "recon_percentage"]


@dataclass(frozen=True)
class TemplateDictionary:
    """Dictionary whose k-th column is the unit-norm pulse centered at grid index k.

    A frame expressed in this dictionary is by construction a superposition
    of pulse-shaped atoms, which is the template prior: reconstructions can
    never contain an isolated single-sample spike.
    """

    columns: np.ndarray
    pulse: PulseSpec
    # set by from_pulse: grid spacing and pre-normalization column norms,
    # which enable the convolutional fast path in project()
    dt: float | None = None
    prenorms: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "columns", np.asarray(self.columns, dtype=float))
        d = self.columns
        if d.ndim != 2 or d.shape[0] < d.shape[1]:
            raise ValueError("columns must be N x K with K <= N")
        norms = np.linalg.norm(d, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-8):
            raise ValueError("columns must be unit-normalized")
        peaks = np.argmax(np.abs(d), axis=0)
        if not np.array_equal(peaks, np.arange(d.shape[1])):
            raise ValueError("column k must peak at grid index k")

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def k(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def from_pulse(cls, pulse: PulseSpec, n: int, dt: float) -> "TemplateDictionary":
        """Build the N x N shifted-pulse dictionary on an n-point grid with spacing dt.

        Edge columns lose part of the pulse to truncation and are
        re-normalized to unit energy.
        """
        if n < 1 or not dt > 0:
            raise ValueError("need n >= 1 and dt > 0")
        t = dt * np.arange(n)
        cols = gaussian_pulse(t[:, None] - t[None, :], pulse)
        prenorms = np.linalg.norm(cols, axis=0)
        cols /= prenorms[None, :]
        return cls(cols, pulse, dt, prenorms)

    def project(self, phi: np.ndarray) -> np.ndarray:
        """Effective sensing matrix Psi = Phi @ D.

        Shifted-pulse columns make Phi @ D a row-wise correlation with the
        pulse, so pulse-built dictionaries take an FFT path; explicit-column
        dictionaries fall back to the dense product.
        """
        phi = np.asarray(phi, dtype=float)
        if phi.shape[1] != self.n:
            raise ValueError(f"phi expects N={phi.shape[1]}, dictionary has N={self.n}")
        if self.dt is None or self.prenorms is None or self.k != self.n:
            return phi @ self.columns
        # kernel wide enough that the discarded tail is below double rounding
        half = min(self.n - 1, int(np.ceil(9.3 * self.pulse.sigma / self.dt)))
        offs = self.dt * np.arange(-half, half + 1)
        kernel = gaussian_pulse(offs, self.pulse)
        out = fftconvolve(phi, kernel[None, :], mode="same", axes=1)
        return out / self.prenorms[None, :]

    def reconstruct(self, active: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Frame D @ x for a sparse x given by (active indices, weights)."""
        return self.columns[:, active] @ weights


@dataclass
class ReconResult:
    """Output of one reconstruction.

    `coeffs` is the sparse coefficient vector in whichever basis the solver
    worked (identity for omp/bp/bcs, template shifts for cs_uwb); `s_hat` is
    always the reconstructed frame.  `p_re` is filled by the caller when the
    ground truth is known.
    """

    s_hat: np.ndarray
    coeffs: np.ndarray
    iterations: int
    converged: bool = True
    p_re: float | None = None
    arrival_time_estimate: float | None = None

    def __post_init__(self):
        self.s_hat = np.asarray(self.s_hat, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.p_re is not None and not self.p_re <= 1.0 + 1e-12:
            raise ValueError(f"p_re cannot exceed 1, got {self.p_re}")

    def as_frame(self, dt: float, t0: float = 0.0) -> SignalFrame:
        return SignalFrame(self.s_hat, dt, t0)


@dataclass
class BcsState:
    """Final state of the fast marginal-likelihood optimization.

    alpha holds one hyperparameter per candidate with np.inf marking
    excluded atoms; mu and sigma_cov live on the active set in order of
    addition; g and h are the final per-candidate statistics; L is the
    marginal log-likelihood, with the accepted-update trace in l_trace.
    """

    alpha: np.ndarray
    beta: float
    mu: np.ndarray
    sigma_cov: np.ndarray
    active_set: np.ndarray
    g: np.ndarray
    h: np.ndarray
    L: float
    l_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))


def recon_percentage(s, s_hat) -> float:
    """Reconstruction percentage P_re = 1 - ||s - s_hat|| / ||s||."""
    s = s.samples if isinstance(s, SignalFrame) else np.asarray(s, dtype=float)
    s_hat = s_hat.samples if isinstance(s_hat, SignalFrame) else np.asarray(s_hat, dtype=float)
    if s.shape != s_hat.shape:
        raise ValueError(f"length mismatch: {s.shape} vs {s_hat.shape}")
    denom = float(np.linalg.norm(s))
    if denom == 0.0:
        raise ValueError("P_re undefined for a zero true signal")
    return 1.0 - float(np.linalg.norm(s - s_hat)) / denom
