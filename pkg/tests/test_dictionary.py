"""Tests for the shifted-pulse template dictionary."""

import numpy as np
import pytest

from uwbsim.acquisition import make_projection
from uwbsim.recovery.types import TemplateDictionary, recon_percentage
from uwbsim.signal_model import PulseSpec


@pytest.fixture(scope="module")
def dictionary():
    return TemplateDictionary.from_pulse(PulseSpec(sigma=150e-12), n=256, dt=40e-12)


def test_columns_unit_norm(dictionary):
    norms = np.linalg.norm(dictionary.columns, axis=0)
    np.testing.assert_allclose(norms, 1.0, rtol=0, atol=1e-12)


def test_column_k_peaks_at_k(dictionary):
    assert np.array_equal(np.argmax(dictionary.columns, axis=0), np.arange(256))


def test_column_is_shifted_pulse(dictionary):
    # rebuild column 100 independently: unit-normalized Gaussian centred on
    # sample 100
    k, n, dt, sigma = 100, 256, 40e-12, 150e-12
    t = np.arange(n) * dt
    raw = np.exp(-((t - k * dt) ** 2) / (2 * sigma**2))
    np.testing.assert_allclose(
        dictionary.columns[:, k], raw / np.linalg.norm(raw), rtol=0, atol=1e-12
    )


def test_edge_columns_renormalized(dictionary):
    # a pulse centred on sample 0 loses half its mass off-window; the stored
    # column must still be unit norm while remembering the clipped raw norm
    assert np.linalg.norm(dictionary.columns[:, 0]) == pytest.approx(1.0, abs=1e-12)
    assert dictionary.prenorms[0] < dictionary.prenorms[128]


def test_project_matches_direct_matmul(dictionary):
    for kind in ("gaussian", "bernoulli"):
        phi = make_projection(64, 256, kind=kind, seed=3)
        fast = dictionary.project(phi.entries)
        direct = phi.entries @ dictionary.columns
        np.testing.assert_allclose(fast, direct, rtol=0, atol=1e-10)


def test_reconstruct_is_weighted_column_sum(dictionary):
    active = np.array([3, 77, 200])
    w = np.array([1.5, -0.25, 0.6])
    expected = dictionary.columns[:, active] @ w
    np.testing.assert_allclose(dictionary.reconstruct(active, w), expected, atol=1e-14)


def test_recon_percentage_direct_formula(rng):
    s = rng.standard_normal(64)
    s_hat = s + 0.1 * rng.standard_normal(64)
    expected = 1.0 - np.linalg.norm(s - s_hat) / np.linalg.norm(s)
    assert recon_percentage(s, s_hat) == pytest.approx(expected, rel=1e-12)
    assert recon_percentage(s, s) == pytest.approx(1.0)
    # all-zero estimate scores zero
    assert recon_percentage(s, np.zeros(64)) == pytest.approx(0.0, abs=1e-12)
