"""Oracle and invariant tests for pulse/channel/frame synthesis."""

import numpy as np
import pytest

from uwbsim.signal_model import (
    ChannelProfile,
    ChannelRealization,
    PulseSpec,
    add_noise,
    gaussian_pulse,
    generate_channel,
    load_channel_file,
    preset_profile,
    save_channel_file,
    synthesize_frame,
)


def test_gaussian_pulse_matches_direct_formula():
    spec = PulseSpec(sigma=150e-12, amplitude=2.5)
    t = np.linspace(-1e-9, 1e-9, 101)
    expected = 2.5 * np.exp(-(t**2) / (2 * (150e-12) ** 2))
    np.testing.assert_allclose(gaussian_pulse(t, spec), expected, rtol=0, atol=1e-15)


def test_gaussian_pulse_peak_and_symmetry():
    spec = PulseSpec(sigma=100e-12, amplitude=1.0)
    assert gaussian_pulse(0.0, spec) == 1.0
    assert gaussian_pulse(3e-10, spec) == gaussian_pulse(-3e-10, spec)
    # value at one sigma is exp(-1/2) of the peak
    assert gaussian_pulse(100e-12, spec) == pytest.approx(np.exp(-0.5), rel=1e-12)


def test_single_path_frame_recomputed_independently():
    spec = PulseSpec(sigma=150e-12)
    delay, amp, n, dt = 3.7e-9, 0.8, 256, 40e-12
    ch = ChannelRealization(np.array([delay]), np.array([amp]))
    frame = synthesize_frame(ch, spec, n=n, dt=dt)
    k = np.arange(n)
    expected = amp * np.exp(-((k * dt - delay) ** 2) / (2 * spec.sigma**2))
    np.testing.assert_allclose(frame.samples, expected, rtol=0, atol=1e-15)
    assert frame.dt == dt and frame.t0 == 0.0


def test_frame_superposition_linearity():
    spec = PulseSpec(sigma=150e-12)
    d = np.array([2e-9, 5.3e-9])
    a = np.array([1.0, -0.4])
    both = synthesize_frame(ChannelRealization(d, a), spec, n=512, dt=40e-12)
    parts = sum(
        synthesize_frame(ChannelRealization(d[i : i + 1], a[i : i + 1]), spec,
                         n=512, dt=40e-12).samples
        for i in range(2)
    )
    np.testing.assert_allclose(both.samples, parts, rtol=0, atol=1e-15)


def test_channel_sorted_and_shifted():
    ch = ChannelRealization(np.array([5e-9, 1e-9]), np.array([0.2, 1.0]))
    assert np.all(np.diff(ch.delays) >= 0)
    assert ch.amplitudes[0] == 1.0  # amplitude follows its delay through the sort
    moved = ch.shifted(2e-9)
    np.testing.assert_allclose(moved.delays, ch.delays + 2e-9)
    np.testing.assert_allclose(moved.amplitudes, ch.amplitudes)
    assert ch.n_paths == 2


def test_add_noise_power_calibration():
    # noise sigma must satisfy sigma^2 = mean_frame_power / 10^(snr/10)
    n = 200_000
    samples = np.ones(n) * 0.5
    frame_power = 0.25
    from uwbsim.signal_model import SignalFrame

    frame = SignalFrame(samples, dt=1e-11)
    noisy = add_noise(frame, snr_db=10.0, rng_seed=7)
    resid = noisy.samples - samples
    expected_var = frame_power / 10.0
    assert np.var(resid) == pytest.approx(expected_var, rel=0.02)
    assert np.mean(resid) == pytest.approx(0.0, abs=5e-4)


def test_add_noise_infinite_snr_is_identity():
    from uwbsim.signal_model import SignalFrame

    frame = SignalFrame(np.arange(16.0), dt=1e-11)
    noisy = add_noise(frame, snr_db=np.inf, rng_seed=0)
    np.testing.assert_array_equal(noisy.samples, frame.samples)


def test_generate_channel_deterministic_and_shaped():
    profile = ChannelProfile(n_paths=8, first_delay=1e-9)
    a = generate_channel(profile, rng_seed=42)
    b = generate_channel(profile, rng_seed=42)
    c = generate_channel(profile, rng_seed=43)
    np.testing.assert_array_equal(a.delays, b.delays)
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
    assert not np.array_equal(a.delays, c.delays)
    assert a.n_paths == 8
    assert a.delays.min() >= 0


def test_preset_profiles():
    assert preset_profile("single").n_paths == 1
    assert preset_profile("sparse").n_paths < preset_profile("dense").n_paths
    with pytest.raises(Exception):
        preset_profile("nonsense")


def test_channel_file_round_trip(tmp_path):
    ch = ChannelRealization(np.array([1e-9, 2e-9, 7e-9]), np.array([1.0, -0.5, 0.25]))
    path = tmp_path / "channel.txt"
    save_channel_file(path, ch)
    back = load_channel_file(path)
    np.testing.assert_allclose(back.delays, ch.delays)
    np.testing.assert_allclose(back.amplitudes, ch.amplitudes)
