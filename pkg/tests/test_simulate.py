import numpy as np
import pytest

from vsloc.acoustics import (SimConfig, SourceSpec, image_set, load_brir,
                             render_specular_rir, save_brir, simulate_brir)
from vsloc.acoustics.room import RoomSpec, SurfaceProfile, default_room, default_surfaces
from vsloc.binaural import HeadModel

CFG = SimConfig(duration=0.15, n_rays=500)


def test_same_seed_is_bit_identical():
    room = default_room(0.3)
    a = simulate_brir(room, SourceSpec(20, 10, 1.6), HeadModel(), CFG, seed=5)
    b = simulate_brir(room, SourceSpec(20, 10, 1.6), HeadModel(), CFG, seed=5)
    assert a.left.tobytes() == b.left.tobytes() and a.right.tobytes() == b.right.tobytes()
    c = simulate_brir(room, SourceSpec(20, 10, 1.6), HeadModel(), CFG, seed=6)
    assert not np.array_equal(a.left, c.left)


def test_zero_diffusion_equals_specular_rendering():
    room = default_room(0.3, diffusion=False)
    src = SourceSpec(-15, 5, 2.0)
    rir = simulate_brir(room, src, HeadModel(), CFG, seed=1)
    images = image_set(room, room.source_position(src), max_distance=CFG.duration * 343,
                       sort=False)
    spec = render_specular_rir(images, room, HeadModel(), CFG.sample_rate, CFG.duration)
    assert rir.left.tobytes() == spec.left.tobytes()
    assert rir.right.tobytes() == spec.right.tobytes()


def test_output_length_and_metadata():
    rir = simulate_brir(default_room(), SourceSpec(0, 0, 1.0), HeadModel(), CFG, seed=2)
    assert len(rir) == int(CFG.duration * CFG.sample_rate)
    assert rir.metadata["seed"] == 2
    assert rir.metadata["source"] == {"azimuth": 0, "elevation": 0, "range": 1.0}


def test_diffuse_seed_overrides_ray_and_tail_seed():
    room = default_room(0.3)
    a = simulate_brir(room, SourceSpec(0, 0, 1.0), HeadModel(), CFG, seed=1, diffuse_seed=9)
    b = simulate_brir(room, SourceSpec(0, 0, 1.0), HeadModel(), CFG, seed=2, diffuse_seed=9)
    np.testing.assert_array_equal(a.left, b.left)


@pytest.mark.parametrize("seed", range(2))
def test_energy_monotone_in_absorption(seed):
    energies = []
    for a in np.linspace(0.0, 1.0, 6):
        rir = simulate_brir(default_room(float(a)), SourceSpec(10, 0, 1.5), HeadModel(),
                            CFG, seed=seed, diffuse_seed=seed)
        energies.append(rir.energy())
    assert all(e1 >= e2 for e1, e2 in zip(energies, energies[1:]))


def test_left_right_symmetry_without_diffusion():
    room = RoomSpec(receiver_position=(2.0, 2.5, 1.6),
                    surfaces=default_surfaces(0.4, diffusion=False))
    a = simulate_brir(room, SourceSpec(35, 0, 1.3), HeadModel(), CFG, seed=0)
    b = simulate_brir(room, SourceSpec(-35, 0, 1.3), HeadModel(), CFG, seed=0)
    np.testing.assert_allclose(a.left, b.right, atol=1e-10)
    np.testing.assert_allclose(a.right, b.left, atol=1e-10)


def test_wav_round_trip(tmp_path):
    rir = simulate_brir(default_room(), SourceSpec(0, 0, 1.0), HeadModel(), CFG, seed=3)
    path = tmp_path / "brir.wav"
    save_brir(rir, path)
    back = load_brir(path)
    np.testing.assert_array_equal(back.left, rir.left.astype(np.float32))
    assert back.sample_rate == rir.sample_rate
    assert back.metadata["seed"] == 3
    assert (tmp_path / "brir.json").exists()
