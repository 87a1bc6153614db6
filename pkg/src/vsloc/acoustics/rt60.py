"""Reverberation time from Schroeder backward integration."""

import numpy as np

MIN_FIT_SAMPLES = 20


class RT60EstimationError(ValueError):
    """The impulse response does not decay enough for a reliable fit."""


def energy_decay_curve(h):
    """Backward-integrated energy in dB, normalised to 0 dB at t = 0."""
    e = np.cumsum(np.asarray(h, dtype=float)[::-1] ** 2)[::-1]
    if e[0] <= 0:
        raise RT60EstimationError("impulse response has no energy")
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(e / e[0])


def _channel_rt60(h, sample_rate, upper, lower):
    edc = energy_decay_curve(h)
    # fit window starts where the curve first drops below ``upper``
    start = int(np.argmax(edc <= upper))
    below = edc <= lower
    if not below.any() or edc[start] > upper:
        raise RT60EstimationError(f"decay does not reach {lower} dB")
    stop = int(np.argmax(below))
    if stop - start < MIN_FIT_SAMPLES:
        raise RT60EstimationError(
            f"only {stop - start} samples between {upper} and {lower} dB")
    t = np.arange(start, stop) / sample_rate
    slope, _ = np.polyfit(t, edc[start:stop], 1)
    if slope >= 0:
        raise RT60EstimationError("energy decay curve is not decreasing")
    return -60.0 / slope


def estimate_rt60(rir, upper=-5.0, lower=-25.0):
    """T60 extrapolated from the -5..-25 dB slope, averaged over both ears."""
    values = [_channel_rt60(ch, rir.sample_rate, upper, lower) for ch in (rir.left, rir.right)]
    return float(np.mean(values))


def schroeder_frequency(rt60, volume):
    """Frequency above which the room's sound field is approximately diffuse."""
    if rt60 <= 0 or volume <= 0:
        raise ValueError("rt60 and volume must be positive")
    return 2000.0 * np.sqrt(rt60 / volume)
