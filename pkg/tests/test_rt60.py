import numpy as np
import pytest

from vsloc.acoustics import (BinauralRir, RT60EstimationError, SimConfig, SourceSpec,
                             estimate_rt60, sabine_rt60, schroeder_frequency, simulate_brir)
from vsloc.acoustics.room import default_room
from vsloc.binaural import HeadModel

FS = 16000


def exponential_rir(t60, seed=0, duration=1.5):
    rng = np.random.default_rng(seed)
    t = np.arange(int(duration * FS)) / FS
    env = np.exp(-t * 6.91 / t60)
    return BinauralRir(rng.standard_normal(len(t)) * env, rng.standard_normal(len(t)) * env, FS)


@pytest.mark.parametrize("t60", [0.3, 0.5, 0.8])
def test_exponential_decay(t60):
    assert estimate_rt60(exponential_rir(t60)) == pytest.approx(t60, abs=0.1 * t60)


def test_half_second_within_50ms():
    assert abs(estimate_rt60(exponential_rir(0.5, seed=3)) - 0.5) <= 0.05


def test_single_impulse_is_unreliable():
    x = np.zeros(4000)
    x[100] = 1.0
    with pytest.raises(RT60EstimationError):
        estimate_rt60(BinauralRir(x, x, FS))


def test_silence_is_unreliable():
    with pytest.raises(RT60EstimationError):
        estimate_rt60(BinauralRir(np.zeros(100), np.zeros(100), FS))


def test_schroeder_frequency_examples():
    assert schroeder_frequency(1.0, 6 * 5 * 3.3) == pytest.approx(201.0, abs=0.1)
    assert schroeder_frequency(0.0625, 250000) == pytest.approx(1.0)
    assert schroeder_frequency(4.0, 99.0) == pytest.approx(2 * schroeder_frequency(1.0, 99.0))


@pytest.mark.parametrize("rt60,volume", [(0.0, 99.0), (1.0, 0.0), (-1.0, 5.0)])
def test_schroeder_frequency_rejects_non_positive(rt60, volume):
    with pytest.raises(ValueError):
        schroeder_frequency(rt60, volume)


def test_default_room_half_absorption_near_sabine():
    room = default_room(0.5)
    rir = simulate_brir(room, SourceSpec(0, 0, 1.5), HeadModel(),
                        SimConfig(duration=0.6, n_rays=2000), seed=0)
    ratio = estimate_rt60(rir) / sabine_rt60(room)
    assert 0.5 <= ratio <= 2.0
