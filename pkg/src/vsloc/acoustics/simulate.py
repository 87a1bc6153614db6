"""Full binaural room impulse response: specular images plus diffuse tail."""

from dataclasses import asdict, dataclass

import numpy as np

from .images import image_set
from .rain import (DEFAULT_BIN_WIDTH, DEFAULT_N_RAYS, DEFAULT_RECEIVER_RADIUS,
                   rain_diffusion)
from .render import DEFAULT_FIR_TAPS, DEFAULT_SINC_HALF_WIDTH, render_specular_rir
from .tail import synthesize_diffuse_tail


@dataclass(frozen=True)
class SimConfig:
    sample_rate: int = 16000
    duration: float = 0.3
    max_order: int = None          # None: adaptive (-60 dB rule within duration)
    n_rays: int = DEFAULT_N_RAYS
    bin_width: float = DEFAULT_BIN_WIDTH
    receiver_radius: float = DEFAULT_RECEIVER_RADIUS
    fir_taps: int = DEFAULT_FIR_TAPS
    sinc_half_width: int = DEFAULT_SINC_HALF_WIDTH
    diffusion: bool = True

    def to_dict(self):
        return asdict(self)


def scene_seeds(seed):
    """Independent integer seeds for the ray directions and the tail noise."""
    children = np.random.SeedSequence(seed).spawn(2)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def simulate_brir(room, source, head, config=SimConfig(), seed=0, backend=None,
                  diffuse_seed=None):
    """Binaural RIR of ``source`` in ``room``; deterministic for a given seed.

    ``diffuse_seed`` overrides the seed of the ray directions and tail noise.
    Datasets share it across scenes so that the diffuse part differs between
    scenes only through its energy envelope, not through a fresh noise draw.
    """
    if not config.diffusion:
        room = room.without_diffusion()
    pos = room.source_position(source)
    max_distance = config.duration * room.speed_of_sound
    images = image_set(room, pos, max_order=config.max_order, max_distance=max_distance,
                       sort=False)
    rir = render_specular_rir(images, room, head, config.sample_rate, config.duration,
                              fir_taps=config.fir_taps,
                              sinc_half_width=config.sinc_half_width, backend=backend)
    ray_seed, tail_seed = scene_seeds(seed if diffuse_seed is None else diffuse_seed)
    if room.diffusion_matrix().any():
        hist = rain_diffusion(room, pos, n_rays=config.n_rays, max_time=config.duration,
                              seed=ray_seed, bin_width=config.bin_width,
                              receiver_radius=config.receiver_radius, backend=backend)
        tail = synthesize_diffuse_tail(hist, config.sample_rate, tail_seed, len(rir))
        rir.left = rir.left + tail.left
        rir.right = rir.right + tail.right
    rir.metadata = {
        "source": {"azimuth": source.azimuth, "elevation": source.elevation,
                   "range": source.range},
        "seed": int(seed),
        "diffuse_seed": None if diffuse_seed is None else int(diffuse_seed),
        "n_images": len(images),
        "config": config.to_dict(),
    }
    return rir
