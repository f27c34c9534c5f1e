"""Spectral density estimation of quadrature-variance time series.

The estimator acts on the normally ordered variance (the full variance
minus the constant shot term), which is what a steady-state record lacks
and a modulated record distributes over frequency.  Frequencies are in
cycles per unit time; with time in units of 1/kappa that is kappa/(2*pi)
per unit of angular frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import signal

from .errors import DomainError, ParameterError
from .integrate import Trace
from .observables import cavity_variance_series

__all__ = [
    "PsdEstimate",
    "normally_ordered_variance_series",
    "welch_psd",
    "scale_spectral_density",
    "dominant_frequency",
]


@dataclass(frozen=True)
class PsdEstimate:
    """One-sided averaged periodogram with its estimation metadata."""

    frequencies: np.ndarray      # bin centers, cycles per unit time
    power: np.ndarray            # spectral density per bin, >= 0
    segment_count: int
    segment_length: int
    overlap_fraction: float
    window_name: str
    epsilon: float = 1.0
    varrho: float = 1.0
    shot_referenced: bool = False

    def total_power(self) -> float:
        """Integral of the density over frequency (rectangle rule)."""
        if len(self.frequencies) < 2:
            return float(np.sum(self.power))
        df = self.frequencies[1] - self.frequencies[0]
        return float(np.sum(self.power) * df)


def normally_ordered_variance_series(trace: Trace, theta: float) -> np.ndarray:
    """Per-sample 2(<Delta a^dag Delta a> + Re{e^{-2i theta} <Delta a^2>}),
    i.e. the cavity quadrature variance with the constant term removed."""
    return cavity_variance_series(trace.moments, theta) - 1.0


def _default_segment_length(n: int) -> int:
    """len/8 rounded down to a power of two, at least 8."""
    target = max(n // 8, 8)
    return max(8, 2 ** int(math.floor(math.log2(target))))


def welch_psd(series, sample_rate: float, segment_length: Optional[int] = None,
              overlap_fraction: float = 0.5, window: str = "hann") -> PsdEstimate:
    """Averaged, windowed, detrend-free one-sided periodogram.

    Density normalization: the sum of power * bin-width over all bins
    equals the mean square of the series, up to window-induced bias.
    DC and Nyquist bins are not folded.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1:
        raise ParameterError("series must be one-dimensional")
    if not (sample_rate > 0):
        raise ParameterError(f"sample_rate must be > 0, got {sample_rate}")
    if not (0.0 <= overlap_fraction <= 0.9):
        raise ParameterError(f"overlap_fraction must lie in [0, 0.9], got {overlap_fraction}")
    if segment_length is None:
        segment_length = _default_segment_length(len(series))
    if segment_length < 8:
        raise ParameterError(f"segment_length must be >= 8, got {segment_length}")
    if len(series) < segment_length:
        raise DomainError(
            f"series too short: {len(series)} samples, need at least {segment_length}")

    noverlap = int(overlap_fraction * segment_length)
    freqs, power = signal.welch(series, fs=sample_rate, window=window,
                                nperseg=segment_length, noverlap=noverlap,
                                detrend=False, return_onesided=True,
                                scaling="density")
    step = segment_length - noverlap
    segment_count = 1 + (len(series) - segment_length) // step
    return PsdEstimate(frequencies=freqs, power=power,
                       segment_count=int(segment_count),
                       segment_length=int(segment_length),
                       overlap_fraction=float(overlap_fraction),
                       window_name=window)


def scale_spectral_density(psd: PsdEstimate, epsilon: float, varrho: float) -> PsdEstimate:
    """Detected spectral density epsilon * varrho * (1 + power) per bin,
    i.e. the shot-noise floor plus the estimated excess, scaled by the
    collection and detection efficiencies."""
    if not (0.0 < epsilon <= 1.0) or not (0.0 < varrho <= 1.0):
        raise ParameterError(
            f"efficiencies must lie in (0, 1], got epsilon={epsilon}, varrho={varrho}")
    return replace(psd, power=epsilon * varrho * (1.0 + psd.power),
                   epsilon=float(epsilon), varrho=float(varrho),
                   shot_referenced=True)


def dominant_frequency(psd: PsdEstimate, min_frequency: float = 0.0) -> float:
    """Bin-center frequency of the largest spectral peak above min_frequency."""
    mask = psd.frequencies > min_frequency
    if not np.any(mask):
        raise DomainError("no bins above min_frequency")
    idx = np.argmax(np.where(mask, psd.power, -np.inf))
    return float(psd.frequencies[idx])
