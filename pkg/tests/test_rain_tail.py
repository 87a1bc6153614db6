import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import band_energy
from vsloc.acoustics import (RoomSpec, SourceSpec, SurfaceProfile, rain_diffusion,
                             synthesize_diffuse_tail)
from vsloc.acoustics.rain import EMITTED_ENERGY, EnergyHistogram
from vsloc.acoustics.room import ANCHOR_FREQUENCIES, default_room

FS = 16000


def test_zero_diffusion_gives_zero_histogram():
    room = default_room(0.3, diffusion=False)
    hist = rain_diffusion(room, SourceSpec(0, 0, 1.5), n_rays=500, max_time=0.2, seed=1)
    assert not hist.bins.any()


def test_full_absorption_deposits_nothing():
    surf = SurfaceProfile((1.0,) * 6, (0.5,) * 6)
    room = RoomSpec(surfaces=(surf,) * 6)
    hist = rain_diffusion(room, SourceSpec(10, 0, 1.5), n_rays=500, max_time=0.2, seed=1)
    assert hist.total_energy() == 0.0


def test_histogram_is_deterministic():
    room = default_room(0.2)
    a = rain_diffusion(room, SourceSpec(10, 5, 2.0), n_rays=300, max_time=0.2, seed=4)
    b = rain_diffusion(room, SourceSpec(10, 5, 2.0), n_rays=300, max_time=0.2, seed=4)
    np.testing.assert_array_equal(a.bins, b.bins)


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 0.9), st.floats(0.05, 1.0))
def test_deposited_energy_bounded_by_emission(seed, alpha, diff):
    rng = np.random.default_rng(seed)
    dims = rng.uniform(2.5, 8.0, 3)
    rec = tuple(rng.uniform(0.3, 0.7, 3) * dims)
    surf = SurfaceProfile(tuple(np.clip(alpha + rng.uniform(-0.05, 0.05, 6), 0, 1)),
                          tuple(np.clip(diff * rng.uniform(0.5, 1, 6), 0, 1)))
    room = RoomSpec(*dims, receiver_position=rec, surfaces=(surf,) * 6)
    src = rng.uniform(0.1, 0.9, 3) * dims
    hist = rain_diffusion(room, src, n_rays=200, max_time=0.3, seed=seed)
    assert (hist.bins >= 0).all()
    assert hist.bins.sum(axis=1).max() <= EMITTED_ENERGY * (1 + 1e-12)


def test_diffuse_energy_decreases_with_absorption():
    totals = []
    for a in (0.1, 0.4, 0.8):
        hist = rain_diffusion(default_room(a), SourceSpec(0, 0, 1.5), n_rays=500,
                              max_time=0.3, seed=2)
        totals.append(hist.total_energy())
    assert totals[0] > totals[1] > totals[2] > 0


def test_zero_histogram_gives_silent_tail():
    hist = EnergyHistogram(1e-3, np.zeros((6, 50)), ANCHOR_FREQUENCIES)
    tail = synthesize_diffuse_tail(hist, FS, 0)
    assert len(tail) == 800 and not tail.left.any() and not tail.right.any()


def test_single_bin_single_band_is_localised():
    bins = np.zeros((6, 20))
    bins[3, 7] = 1.0          # 1 kHz band, 70-80 ms
    hist = EnergyHistogram(0.01, bins, ANCHOR_FREQUENCIES)
    tail = synthesize_diffuse_tail(hist, FS, 11)
    seg = slice(int(0.07 * FS), int(0.08 * FS))
    for ch in (tail.left, tail.right):
        assert np.sum(ch[seg] ** 2) == pytest.approx(np.sum(ch ** 2))
        inside = band_energy(ch[seg], FS, 500, 2000)
        assert inside / np.sum(ch[seg] ** 2) > 0.9


@pytest.mark.parametrize("band", [2, 3, 4, 5])
def test_tail_band_energy_matches_histogram_within_20_percent(band):
    # one band at a time, measured over the support of its mask; bins of 160
    # samples. The 125/250 Hz bands are too narrow for 10 ms gating.
    edges = (0.0,) + tuple(ANCHOR_FREQUENCIES) + (FS / 2 + 1,)
    width, n = 0.01, 160
    for seed in range(3):
        hist = rain_diffusion(default_room(0.3), SourceSpec(20, 5, 1.5), n_rays=3000,
                              max_time=0.3, seed=seed, bin_width=width)
        intensity = np.zeros_like(hist.bins)
        intensity[band] = hist.intensity()[band]
        tail = synthesize_diffuse_tail(
            EnergyHistogram.from_intensity(intensity, width, ANCHOR_FREQUENCIES), FS, seed)
        live = intensity[band] > 1e-3 * intensity[band].max()
        for ch in (tail.left, tail.right):
            segs = ch[:intensity.shape[1] * n].reshape(-1, n)
            measured = np.array([band_energy(x, FS, edges[band], edges[band + 2])
                                 for x in segs])
            ratio = measured[live] / intensity[band][live]
            assert np.all((ratio >= 0.8) & (ratio <= 1.2))


def test_segment_energy_matches_all_bands():
    rng = np.random.default_rng(1)
    intensity = rng.uniform(0.1, 1.0, (6, 10))
    hist = EnergyHistogram.from_intensity(intensity, 0.02, ANCHOR_FREQUENCIES)
    tail = synthesize_diffuse_tail(hist, FS, 3)
    for ch in (tail.left, tail.right):
        ratio = (ch.reshape(10, -1) ** 2).sum(axis=1) / intensity.sum(axis=0)
        assert np.all((ratio > 0.8) & (ratio < 1.2))


def test_ears_are_incoherent():
    intensity = np.ones((6, 100))
    tail = synthesize_diffuse_tail(EnergyHistogram.from_intensity(intensity, 1e-3,
                                                                  ANCHOR_FREQUENCIES), FS, 0)
    rho = np.corrcoef(tail.left, tail.right)[0, 1]
    assert abs(rho) < 0.1
