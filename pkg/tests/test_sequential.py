"""Oracle tests for the sequential equivalent-time sampling model."""

import numpy as np
import pytest

from uwbsim.sequential import (
    SequentialConfig,
    acquire_sequential,
    drift_for_scale,
    equivalent_rate,
    estimate_arrival_sequential,
    extension_scale,
)
from uwbsim.signal_model import ChannelRealization, PulseSpec


def test_equivalent_rate_direct_formula():
    f_p, f_s = 10e6, 9.999e6
    assert equivalent_rate(f_p, f_s) == pytest.approx(f_s * f_p / (f_p - f_s), rel=1e-12)
    # 10 MHz against 9.999 MHz: the offset of 1 kHz stretches the effective
    # rate to ~10 GHz
    assert equivalent_rate(f_p, f_s) == pytest.approx(9.999e10, rel=1e-12)
    # symmetric in sign of the offset
    assert equivalent_rate(f_s, f_p) == equivalent_rate(f_p, f_s)


def test_extension_scale_nominal():
    cfg = SequentialConfig(f_p=10e6, f_s=9.999e6, delta_f=0.0)
    scale = extension_scale(cfg)
    # one full frame takes f_p/(f_p - f_s) rounds
    assert scale.k_nominal == pytest.approx(10_000.0, rel=1e-12)
    assert scale.k_r == pytest.approx(scale.k_nominal, rel=1e-12)
    assert scale.delta_k == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("factor", [1.01, 1.03, 1.05, 0.98])
def test_drift_for_scale_identity(factor):
    f_p, f_s = 10e6, 9.999e6
    delta_f = drift_for_scale(f_p, f_s, factor)
    scale = extension_scale(SequentialConfig(f_p=f_p, f_s=f_s, delta_f=delta_f))
    assert scale.k_r / scale.k_nominal == pytest.approx(factor, rel=1e-12)


def test_acquire_and_estimate_roundtrip_no_drift():
    cfg = SequentialConfig(f_p=10e6, f_s=9.999e6, delta_f=0.0, n_samples=10_000)
    pulse = PulseSpec(sigma=150e-12)
    true_t = 23.4e-9
    ch = ChannelRealization(np.array([true_t]), np.array([1.0]))
    record = acquire_sequential(ch, pulse, cfg, snr_db=np.inf, rng_seed=0)
    k = extension_scale(cfg).k_r
    t_hat = estimate_arrival_sequential(record, assumed_k=k)
    bin_eq = 1.0 / equivalent_rate(cfg.f_p, cfg.f_s)
    assert abs(t_hat - true_t) <= bin_eq


def test_drift_bias_follows_extension_ratio():
    # interpreting a drifted record with the nominal round count biases the
    # arrival estimate by exactly k_r / k_nominal
    f_p, f_s = 10e6, 9.999e6
    cfg = SequentialConfig(f_p=f_p, f_s=f_s,
                           delta_f=drift_for_scale(f_p, f_s, 1.03), n_samples=10_000)
    pulse = PulseSpec(sigma=150e-12)
    true_t = 40e-9
    ch = ChannelRealization(np.array([true_t]), np.array([1.0]))
    record = acquire_sequential(ch, pulse, cfg, snr_db=np.inf, rng_seed=0)
    scale = extension_scale(cfg)
    bin_eq = 1.0 / equivalent_rate(f_p, f_s)

    biased = estimate_arrival_sequential(record, assumed_k=scale.k_nominal)
    assert abs(biased - true_t * scale.k_r / scale.k_nominal) <= bin_eq
    # and the bias is material: 3% of 40 ns is 1.2 ns >> one ~100 ps bin
    assert abs(biased - true_t) > 5 * bin_eq

    corrected = estimate_arrival_sequential(record, assumed_k=scale.k_r)
    assert abs(corrected - true_t) <= bin_eq


def test_sequential_noise_does_not_move_strong_arrival():
    cfg = SequentialConfig(n_samples=10_000)
    pulse = PulseSpec(sigma=150e-12)
    true_t = 15e-9
    ch = ChannelRealization(np.array([true_t]), np.array([1.0]))
    k = extension_scale(cfg).k_r
    bin_eq = 1.0 / equivalent_rate(cfg.f_p, cfg.f_s)
    record = acquire_sequential(ch, pulse, cfg, snr_db=20.0, rng_seed=3)
    t_hat = estimate_arrival_sequential(record, assumed_k=k)
    assert abs(t_hat - true_t) <= 3 * bin_eq
