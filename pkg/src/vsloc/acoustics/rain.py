"""Stochastic rain-diffusion ray tracing in a shoebox room."""

from dataclasses import dataclass

import numpy as np

from .. import kernels

DEFAULT_N_RAYS = 10_000
DEFAULT_BIN_WIDTH = 1e-3
DEFAULT_THRESHOLD = 1e-6
DEFAULT_RECEIVER_RADIUS = 0.0875
# Total emitted energy per band; matches a unit-amplitude point source whose
# direct-path intensity is 1 / r**2.
EMITTED_ENERGY = 4.0 * np.pi


@dataclass
class EnergyHistogram:
    """Diffusely scattered energy captured by the receiver sphere.

    ``bins`` has shape (bands, time bins). ``emitted_energy`` is per band.
    """

    time_bin_width: float
    bins: np.ndarray
    anchor_frequencies: tuple
    receiver_radius: float = DEFAULT_RECEIVER_RADIUS
    emitted_energy: float = EMITTED_ENERGY

    @property
    def n_bins(self):
        return self.bins.shape[1]

    def total_energy(self):
        return float(self.bins.sum())

    def intensity(self):
        """Energy per unit receiver cross-section, in squared-amplitude units."""
        return self.bins / (np.pi * self.receiver_radius ** 2)

    @classmethod
    def from_intensity(cls, intensity, time_bin_width, anchor_frequencies,
                       receiver_radius=DEFAULT_RECEIVER_RADIUS):
        bins = np.asarray(intensity, dtype=float) * np.pi * receiver_radius ** 2
        return cls(time_bin_width, bins, tuple(anchor_frequencies), receiver_radius)


def uniform_sphere(n, rng):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def rain_diffusion(room, source, receiver_position=None, n_rays=DEFAULT_N_RAYS,
                   max_time=0.5, seed=0, *, bin_width=DEFAULT_BIN_WIDTH,
                   receiver_radius=DEFAULT_RECEIVER_RADIUS, threshold=DEFAULT_THRESHOLD,
                   backend=None):
    """Launch ``n_rays`` uniformly distributed rays and histogram diffuse arrivals.

    At each wall hit the ray loses the absorbed fraction, then the diffusion
    fraction of what remains is sent to the receiver (Lambert emission towards a
    sphere of ``receiver_radius``) and removed from the specular ray.
    ``source`` is a SourceSpec or an absolute position.
    """
    if n_rays < 1:
        raise ValueError("n_rays must be at least 1")
    if max_time <= 0:
        raise ValueError("max_time must be positive")
    src = room.source_position(source) if hasattr(source, "azimuth") else np.asarray(source, float)
    rec = np.asarray(room.receiver_position if receiver_position is None else receiver_position,
                     dtype=float)
    n_bins = int(np.ceil(max_time / bin_width))
    diffusion = room.diffusion_matrix()
    hist = np.zeros((diffusion.shape[1], n_bins))
    result = EnergyHistogram(bin_width, hist, tuple(room.anchor_frequencies), receiver_radius)
    if not diffusion.any():
        return result
    directions = uniform_sphere(n_rays, np.random.default_rng(seed))
    kernels.get_backend(backend).trace_rain(
        np.ascontiguousarray(room.dims, dtype=float), np.ascontiguousarray(src, dtype=float),
        np.ascontiguousarray(rec), directions, np.ascontiguousarray(room.absorption_matrix()),
        np.ascontiguousarray(diffusion), EMITTED_ENERGY / n_rays, float(room.speed_of_sound),
        float(max_time), float(bin_width), float(receiver_radius), float(threshold), hist)
    return result
