"""Tests for the compressed acquisition front end (projection + measurement)."""

import numpy as np
import pytest

from uwbsim.acquisition import (
    load_projection,
    make_projection,
    measure,
    reduction_ratio,
    save_projection,
)
from uwbsim.signal_model import SignalFrame


def test_bernoulli_entries_and_row_energy():
    m, n = 64, 256
    phi = make_projection(m, n, kind="bernoulli", seed=0)
    assert phi.entries.shape == (m, n)
    np.testing.assert_allclose(np.abs(phi.entries), 1.0 / np.sqrt(m))
    # each row carries ||row||^2 = n/m by construction
    np.testing.assert_allclose(np.sum(phi.entries**2, axis=1), n / m, rtol=1e-12)


def test_gaussian_entry_statistics():
    m, n = 128, 1024
    phi = make_projection(m, n, kind="gaussian", seed=1)
    assert np.var(phi.entries) == pytest.approx(1.0 / m, rel=0.05)
    assert np.mean(phi.entries) == pytest.approx(0.0, abs=3e-4)


def test_projection_seed_determinism():
    a = make_projection(32, 128, kind="bernoulli", seed=5)
    b = make_projection(32, 128, kind="bernoulli", seed=5)
    c = make_projection(32, 128, kind="bernoulli", seed=6)
    np.testing.assert_array_equal(a.entries, b.entries)
    assert not np.array_equal(a.entries, c.entries)


def test_unknown_kind_rejected():
    with pytest.raises(Exception):
        make_projection(8, 16, kind="hadamard_nope", seed=0)


def test_reduction_ratio_direct():
    assert reduction_ratio(154, 1024) == pytest.approx(154 / 1024)


def test_noiseless_measurement_is_exact_projection():
    phi = make_projection(24, 96, kind="bernoulli", seed=2)
    s = SignalFrame(np.sin(np.arange(96) * 0.1), dt=1e-11)
    mv = measure(phi, s)
    np.testing.assert_allclose(mv.y, phi.entries @ s.samples, rtol=0, atol=1e-15)
    assert mv.beta == 0.0


def test_measurement_noise_level_and_beta():
    # signal-domain noise at snr_db relative to mean frame power, folded
    # through a Bernoulli projection whose rows have ||row||^2 = n/m:
    # var(y - Phi s) = sigma1^2 * n/m, and beta must report that value
    m, n = 512, 2048
    phi = make_projection(m, n, kind="bernoulli", seed=3)
    samples = np.full(n, 2.0)
    s = SignalFrame(samples, dt=1e-11)
    snr_db = 10.0
    sigma1_sq = np.mean(samples**2) / 10 ** (snr_db / 10)
    mv = measure(phi, s, n1_snr_db=snr_db, rng_seed=11)
    resid = mv.y - phi.entries @ samples
    assert np.var(resid) == pytest.approx(sigma1_sq * n / m, rel=0.15)
    assert mv.beta == pytest.approx(np.sqrt(sigma1_sq * n / m), rel=1e-6)


def test_measurement_domain_noise_beta():
    m, n = 256, 1024
    phi = make_projection(m, n, kind="bernoulli", seed=4)
    samples = np.full(n, 1.0)
    s = SignalFrame(samples, dt=1e-11)
    mv = measure(phi, s, n2_snr_db=20.0, rng_seed=12)
    clean = phi.entries @ samples
    sigma2_sq = np.mean(clean**2) / 10**2
    assert np.var(mv.y - clean) == pytest.approx(sigma2_sq, rel=0.2)
    assert mv.beta == pytest.approx(np.sqrt(sigma2_sq), rel=1e-6)


def test_measure_seed_determinism():
    phi = make_projection(16, 64, kind="gaussian", seed=0)
    s = SignalFrame(np.ones(64), dt=1e-11)
    a = measure(phi, s, n1_snr_db=10.0, rng_seed=9)
    b = measure(phi, s, n1_snr_db=10.0, rng_seed=9)
    np.testing.assert_array_equal(a.y, b.y)


def test_projection_file_round_trip(tmp_path):
    phi = make_projection(8, 32, kind="bernoulli", seed=7)
    path = tmp_path / "phi.npz"
    save_projection(path, phi)
    back = load_projection(path)
    np.testing.assert_array_equal(back.entries, phi.entries)
    assert back.kind == phi.kind
