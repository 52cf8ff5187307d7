"""Compressed-sensing measurement path.

Random projection matrices, noisy measurement synthesis y = Phi(s + n1) + n2,
and the reduction-ratio metric R_r = M/N.  The combined measurement noise is
eps = Phi n1 + n2, with effective scale

    beta^2 = sigma1^2 * mean_i ||Phi_i,:||^2 + sigma2^2

recorded on the measurement (the receiver is assumed to know it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_model import SignalFrame

__all__ = [
    "ProjectionMatrix",
    "MeasurementVector",
    "make_projection",
    "measure",
    "reduction_ratio",
    "save_projection",
    "load_projection",
]

_KINDS = ("gaussian", "bernoulli")


@dataclass(frozen=True)
class ProjectionMatrix:
    """M x N sensing matrix with its generation recipe."""

    entries: np.ndarray
    kind: str = "custom"
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=float))
        if self.entries.ndim != 2:
            raise ValueError("entries must be a 2-D matrix")
        m, n = self.entries.shape
        if m < 1 or n < 1 or m > n:
            raise ValueError(f"need 1 <= M <= N, got M={m}, N={n}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("entries must be finite")
        if not np.all(np.any(self.entries != 0.0, axis=1)):
            raise ValueError("every row must be nonzero")

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class MeasurementVector:
    """Measurement y with the noise scale beta the receiver assumes."""

    y: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.y.ndim != 1:
            raise ValueError("y must be 1-D")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("y must be finite")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")

    @property
    def m(self) -> int:
        return self.y.size


def make_projection(m: int, n: int, kind: str = "gaussian", seed=0) -> ProjectionMatrix:
    """Draw an M x N projection matrix, deterministically in the seed.

    gaussian entries ~ N(0, 1/M); bernoulli entries = +-1/sqrt(M).  Either
    normalization gives unit expected column norm.
    """
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= M <= N, got M={m}, N={n}")
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        entries = rng.standard_normal((m, n)) / np.sqrt(m)
    else:
        entries = rng.choice([-1.0, 1.0], size=(m, n)) / np.sqrt(m)
    return ProjectionMatrix(entries, kind, seed)


def _noise_sigma(ref: np.ndarray, snr_db: float) -> float:
    """Noise std at snr_db below the mean power of `ref`; zero ref gives zero."""
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    power = float(np.mean(ref**2))
    return float(np.sqrt(power * 10.0 ** (-snr_db / 10.0)))


def measure(
    phi: ProjectionMatrix,
    s: SignalFrame,
    n1_snr_db: float = np.inf,
    n2_snr_db: float = np.inf,
    rng_seed=0,
) -> MeasurementVector:
    """Project a frame: y = Phi (s + n1) + n2.

    n1 is signal-domain noise at n1_snr_db relative to the frame's mean
    power; n2 is measurement-domain noise at n2_snr_db relative to the clean
    measurement Phi s.  The recorded beta is the per-component std of the
    combined noise Phi n1 + n2 (with the mean row norm standing in for the
    per-row norms).
    """
    a = phi.entries
    if a.shape[1] != s.n:
        raise ValueError(f"matrix expects N={a.shape[1]}, frame has N={s.n}")
    sigma1 = _noise_sigma(s.samples, n1_snr_db)
    sigma2 = _noise_sigma(a @ s.samples, n2_snr_db)
    rng = np.random.default_rng(rng_seed)
    x = s.samples
    if sigma1 > 0:
        x = x + sigma1 * rng.standard_normal(s.n)
    y = a @ x
    if sigma2 > 0:
        y = y + sigma2 * rng.standard_normal(phi.m)
    row_sq = float(np.mean(np.sum(a * a, axis=1)))
    beta = float(np.sqrt(sigma1**2 * row_sq + sigma2**2))
    return MeasurementVector(y, beta)


def reduction_ratio(m: int, n: int) -> float:
    """Sampling reduction ratio R_r = M/N."""
    if n <= 0:
        raise ValueError(f"N must be positive, got {n}")
    return m / n


def save_projection(path, phi: ProjectionMatrix) -> None:
    """Write a matrix as plain text: one row per line, comma-separated, with
    a '# kind=... seed=...' header comment so the recipe round-trips."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# kind={phi.kind} seed={phi.seed if phi.seed is not None else 'none'}\n")
        for row in phi.entries:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_projection(path) -> ProjectionMatrix:
    """Read a matrix written by save_projection (header comment optional)."""
    kind, seed = "custom", None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if token.startswith("kind="):
                        kind = token[5:]
                    elif token.startswith("seed=") and token[5:] != "none":
                        seed = int(token[5:])
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no matrix rows found")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged rows")
    return ProjectionMatrix(np.array(rows), kind, seed)
