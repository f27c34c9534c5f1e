"""Welch-style spectral estimation of variance time series."""

import numpy as np
import pytest

from cavsim import (DomainError, IntegrationConfig, MomentState, ParameterError,
                    SystemParams, dominant_frequency, integrate_trace,
                    normally_ordered_variance_series, scale_spectral_density,
                    welch_psd)
from cavsim.integrate import Trace


def make_trace(moments_row, n=64):
    times = np.linspace(0.0, 6.3, n)
    moments = np.tile(moments_row, (n, 1))
    return Trace(times=times, moments=moments, flags=np.zeros(n, dtype=np.uint8))


def test_vacuum_trace_has_zero_series():
    trace = make_trace(np.zeros(12, dtype=complex))
    series = normally_ordered_variance_series(trace, 0.3)
    assert np.allclose(series, 0.0)


def test_steady_trace_has_constant_series():
    row = np.zeros(12, dtype=complex)
    row[2] = -0.1   # <a^2>
    row[3] = 0.05   # <a^dag a>
    trace = make_trace(row)
    series = normally_ordered_variance_series(trace, 0.0)
    assert np.allclose(series, series[0])
    assert series[0] == pytest.approx(2 * (0.05 - 0.1))


def test_tone_parseval_within_one_percent():
    fs = 64.0
    n = 8192
    t = np.arange(n) / fs
    seg = 1024
    amp = 0.7
    f0 = 16 * fs / seg  # exactly bin-centered
    series = amp * np.sin(2 * np.pi * f0 * t)
    psd = welch_psd(series, fs, segment_length=seg)
    df = psd.frequencies[1] - psd.frequencies[0]
    window = np.abs(psd.frequencies - f0) <= 1.001 * df
    tone_power = np.sum(psd.power[window]) * df
    assert tone_power == pytest.approx(amp ** 2 / 2, rel=0.01)


def test_white_noise_flat_and_averaging_reduces_variance():
    rng = np.random.default_rng(0)
    fs = 1.0
    n = 1 << 14
    series = rng.normal(size=n)
    few = welch_psd(series, fs, segment_length=n // 4)
    many = welch_psd(series, fs, segment_length=n // 64)
    def rel_spread(psd):
        inner = psd.power[1:-1]
        return np.std(inner) / np.mean(inner)
    # spread scales as 1/sqrt(segment count)
    ratio = rel_spread(few) / rel_spread(many)
    expected = np.sqrt(many.segment_count / few.segment_count)
    assert ratio == pytest.approx(expected, rel=0.5)
    # flat: mean level equals the variance density
    df = many.frequencies[1] - many.frequencies[0]
    assert np.sum(many.power) * df == pytest.approx(np.var(series), rel=0.05)


def test_dc_only_input():
    c = 1.3
    # a rectangular window puts a constant exactly in the zero bin
    psd = welch_psd(np.full(4096, c), 2.0, segment_length=256, window="boxcar")
    df = psd.frequencies[1] - psd.frequencies[0]
    assert psd.frequencies[0] == 0.0
    assert np.sum(psd.power[1:]) * df < 1e-20
    assert np.sum(psd.power) * df == pytest.approx(c ** 2, rel=1e-6)
    # the default window spreads DC over its (3-bin) kernel but conserves it
    hann = welch_psd(np.full(4096, c), 2.0, segment_length=256)
    dfh = hann.frequencies[1] - hann.frequencies[0]
    assert np.sum(hann.power[3:]) * dfh < 1e-12
    assert np.sum(hann.power) * dfh == pytest.approx(c ** 2, rel=1e-6)


def test_hann_parseval_within_five_percent():
    rng = np.random.default_rng(4)
    series = rng.normal(size=1 << 13) + 0.3 * np.sin(0.7 * np.arange(1 << 13))
    psd = welch_psd(series, 1.0)
    df = psd.frequencies[1] - psd.frequencies[0]
    assert np.sum(psd.power) * df == pytest.approx(np.mean(series ** 2), rel=0.05)


def test_circular_shift_leaves_tone_estimate():
    fs = 32.0
    n = 4096
    seg = 512
    t = np.arange(n) / fs
    f0 = 24 * fs / seg
    series = np.sin(2 * np.pi * f0 * t)
    a = welch_psd(series, fs, segment_length=seg)
    b = welch_psd(np.roll(series, 137), fs, segment_length=seg)
    df = a.frequencies[1] - a.frequencies[0]
    win = np.abs(a.frequencies - f0) <= 1.001 * df
    pa = np.sum(a.power[win]) * df
    pb = np.sum(b.power[win]) * df
    assert pb == pytest.approx(pa, rel=0.01)


def test_scaling_examples():
    psd = welch_psd(np.zeros(1024), 1.0, segment_length=128)
    flat = scale_spectral_density(psd, 1.0, 1.0)
    assert np.allclose(flat.power, 1.0)   # shot-noise floor
    scaled = scale_spectral_density(psd, 0.5, 0.8)
    assert np.allclose(scaled.power, 0.4)
    assert scaled.shot_referenced
    assert scaled.epsilon == 0.5 and scaled.varrho == 0.8


def test_scaling_linear_in_power():
    rng = np.random.default_rng(1)
    psd = welch_psd(rng.normal(size=2048), 1.0, segment_length=256)
    s = scale_spectral_density(psd, 0.6, 0.9)
    assert np.allclose(s.power, 0.54 * (1.0 + psd.power))


def test_efficiency_range_validated():
    psd = welch_psd(np.zeros(256), 1.0, segment_length=32)
    with pytest.raises(ParameterError):
        scale_spectral_density(psd, 0.0, 1.0)
    with pytest.raises(ParameterError):
        scale_spectral_density(psd, 1.0, 1.2)


def test_short_series_error_names_minimum_length():
    with pytest.raises(DomainError) as exc_info:
        welch_psd(np.zeros(10), 1.0, segment_length=64)
    assert "64" in str(exc_info.value)


def test_overlap_and_segment_validation():
    with pytest.raises(ParameterError):
        welch_psd(np.zeros(256), 1.0, overlap_fraction=0.95)
    with pytest.raises(ParameterError):
        welch_psd(np.zeros(256), 1.0, segment_length=4)
    with pytest.raises(ParameterError):
        welch_psd(np.zeros(256), 0.0)


def test_default_segment_length_is_power_of_two():
    psd = welch_psd(np.zeros(1000), 1.0)
    assert psd.segment_length == 64  # 1000/8 = 125 -> 64
    assert psd.window_name == "hann"
    assert psd.overlap_fraction == 0.5


def test_dominant_frequency_picks_tone():
    fs = 100.0
    t = np.arange(1 << 13) / fs
    series = 0.2 * np.sin(2 * np.pi * 7.8125 * t)
    psd = welch_psd(series, fs, segment_length=1024)
    assert dominant_frequency(psd, min_frequency=0.5) == pytest.approx(7.8125, abs=0.1)


def test_power_nonnegative_and_frequencies_increasing():
    rng = np.random.default_rng(6)
    psd = welch_psd(rng.normal(size=2048), 3.0)
    assert np.all(psd.power >= 0)
    assert np.all(np.diff(psd.frequencies) > 0)
    assert psd.frequencies[0] >= 0


def test_series_from_integrated_trace():
    # a lightly driven cavity-spin system: the variance series is finite,
    # real, and its PSD integrates to the series' variance scale
    params = SystemParams(n_emitters=2, g1=0.05, gamma1=0.1, omega_rabi=0.3,
                          delta0=2.0, delta_c=4.0)
    cfg = IntegrationConfig(t_end=200.0, sample_count=4097)
    from cavsim import initial_thermal_state
    trace = integrate_trace(params, initial_thermal_state(params), cfg)
    series = normally_ordered_variance_series(trace, 0.0)
    assert np.all(np.isfinite(series))
    dt = trace.times[1] - trace.times[0]
    psd = welch_psd(series - series.mean(), 1.0 / dt, segment_length=512)
    assert psd.total_power() >= 0
