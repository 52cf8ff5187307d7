"""Equivalent-time (sequential) acquisition with a drifting sampling clock.

A repetitive pulse train sampled at a rate slightly off the repetition
frequency walks through the pulse period one small phase step per sample,
so the record shows the waveform stretched by

    K = f_p / |f_s - f_p|

With a clock drift delta_f the actual stretch becomes
K_r = f_p / |f_s + delta_f - f_p|, and a receiver that converts record time
back with the nominal K misestimates every arrival by the factor K_r / K.

The record timestamps use the nominal sampling period 1/f_s: the receiver
cannot observe its own drift, which is exactly what produces the bias.
f_s below f_p gives the ascending sweep assumed by the record-to-real-time
conversion; f_s above f_p time-reverses the record (formulas here take
absolute values and do not care, but estimate_arrival_sequential assumes
the ascending orientation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrival import detect_arrival
from .signal_model import ChannelRealization, PulseSpec, SignalFrame, add_noise, gaussian_pulse

__all__ = [
    "SequentialConfig",
    "ExtensionScale",
    "equivalent_rate",
    "extension_scale",
    "drift_for_scale",
    "acquire_sequential",
    "estimate_arrival_sequential",
]


@dataclass(frozen=True)
class SequentialConfig:
    """Sequential-sampling parameters.

    Parameters
    ----------
    f_p : float
        Pulse repetition frequency (Hz).
    f_s : float
        Nominal sampling frequency (Hz).
    delta_f : float
        Signed sampling-clock drift (Hz).
    n_samples : int
        Length of the extended-time record.
    """

    f_p: float = 10e6
    f_s: float = 9.999e6
    delta_f: float = 0.0
    n_samples: int = 10_000

    def __post_init__(self):
        if not self.f_p > 0:
            raise ValueError(f"f_p must be positive, got {self.f_p}")
        if not self.f_s > 0:
            raise ValueError(f"f_s must be positive, got {self.f_s}")
        if self.f_s == self.f_p:
            raise ValueError("f_s must differ from f_p (infinite equivalent rate)")
        if abs(self.delta_f) >= abs(self.f_s - self.f_p):
            raise ValueError(
                f"|delta_f|={abs(self.delta_f)} must stay below |f_s - f_p|="
                f"{abs(self.f_s - self.f_p)} to keep the time scale finite and sign-stable"
            )
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass(frozen=True)
class ExtensionScale:
    """Actual stretch K_r, nominal K, and their difference."""

    k_r: float
    k_nominal: float
    delta_k: float


def equivalent_rate(f_p: float, f_s: float) -> float:
    """Equivalent sampling rate |f_s * f_p / (f_s - f_p)| in Hz."""
    if f_s == f_p:
        raise ValueError("f_s = f_p gives an infinite equivalent rate")
    return abs(f_s * f_p / (f_s - f_p))


def extension_scale(cfg: SequentialConfig) -> ExtensionScale:
    """Time-scale extension of the record under the configured drift."""
    denom = abs(cfg.f_s + cfg.delta_f - cfg.f_p)
    if denom == 0.0:
        raise ValueError("f_s + delta_f = f_p: extension scale is infinite")
    k_r = cfg.f_p / denom
    k = cfg.f_p / abs(cfg.f_s - cfg.f_p)
    return ExtensionScale(k_r, k, k_r - k)


def drift_for_scale(f_p: float, f_s: float, factor: float) -> float:
    """delta_f that makes K_r = factor * K, preserving the sweep direction."""
    if not factor > 0:
        raise ValueError("factor must be positive")
    return (f_s - f_p) * (1.0 / factor - 1.0)


def acquire_sequential(
    channel: ChannelRealization,
    pulse: PulseSpec,
    cfg: SequentialConfig,
    snr_db: float = np.inf,
    rng_seed=0,
) -> SignalFrame:
    """Simulate one equivalent-time acquisition sweep.

    Sample n is taken at wall-clock time n/(f_s + delta_f), which lands at
    phase (n/(f_s + delta_f)) mod (1/f_p) of the repeating waveform; the
    record therefore shows the pulse stretched by K_r in record time.  Noise
    is added per record sample at `snr_db` relative to the clean record.

    Returns
    -------
    SignalFrame
        Record with dt = 1/f_s (the receiver's nominal clock).
    """
    f_actual = cfg.f_s + cfg.delta_f
    tau = np.mod(np.arange(cfg.n_samples) / f_actual, 1.0 / cfg.f_p)
    samples = np.zeros(cfg.n_samples)
    for a_m, t_m in zip(channel.amplitudes, channel.delays):
        samples += a_m * gaussian_pulse(tau - t_m, pulse)
    record = SignalFrame(samples, dt=1.0 / cfg.f_s, t0=0.0)
    if np.isinf(snr_db) and snr_db > 0:
        return record
    return add_noise(record, snr_db, rng_seed)


def estimate_arrival_sequential(
    record: SignalFrame, assumed_k: float, min_amplitude: float | None = None
) -> float:
    """Convert the record's detected peak back to real time: t_detected / assumed_k.

    When the acquisition drifted (true stretch K_r != assumed K), the result
    is biased by the factor K_r / K.  Raises NoPulseError when the record has
    no detectable pulse.
    """
    if not assumed_k > 0:
        raise ValueError("assumed_k must be positive")
    est = detect_arrival(record, min_amplitude)
    return est.time / assumed_k
