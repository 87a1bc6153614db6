"""Rendering image sources into a binaural impulse response."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve, firwin2, lfilter

from .. import kernels
from .images import ImageSet

DEFAULT_FIR_TAPS = 65
DEFAULT_SINC_HALF_WIDTH = 5


@dataclass
class BinauralRir:
    left: np.ndarray
    right: np.ndarray
    sample_rate: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=float)
        self.right = np.asarray(self.right, dtype=float)
        if self.left.shape != self.right.shape or self.left.ndim != 1:
            raise ValueError("left and right channels must be 1-D and equally long")

    @property
    def channels(self):
        return np.stack([self.left, self.right])

    def __len__(self):
        return len(self.left)

    def energy(self):
        return float(np.sum(self.left ** 2) + np.sum(self.right ** 2))


@lru_cache(maxsize=32)
def band_basis(anchor_frequencies, sample_rate, n_taps=DEFAULT_FIR_TAPS):
    """Linear-phase FIRs, one per anchor, whose gain-weighted sum realises the
    linearly interpolated magnitude response through the anchors."""
    nyq = sample_rate / 2.0
    anchors = np.asarray(anchor_frequencies, dtype=float)
    grid = np.concatenate([[0.0], anchors[anchors < nyq], [nyq]])
    basis = np.empty((len(anchors), n_taps))
    for b in range(len(anchors)):
        unit = np.zeros(len(anchors))
        unit[b] = 1.0
        basis[b] = firwin2(n_taps, grid, np.interp(grid, anchors, unit), fs=sample_rate)
    basis.setflags(write=False)
    return basis


def _as_image_set(images):
    if isinstance(images, ImageSet):
        return images
    images = list(images)
    if not images:
        raise ValueError("render needs at least one image source")
    return ImageSet(np.array([im.position for im in images], dtype=float),
                    np.zeros((len(images), 3), dtype=np.int64),
                    np.zeros((len(images), 6), dtype=np.int64),
                    np.array([im.band_gains for im in images], dtype=float))


def render_specular_rir(images, room, head, sample_rate, duration, *,
                        fir_taps=DEFAULT_FIR_TAPS, sinc_half_width=DEFAULT_SINC_HALF_WIDTH,
                        backend=None):
    """Sum the image-source contributions at both ears.

    Each image is delayed by distance / c (plus the ear delay of the sphere
    model), scaled by 1 / distance and filtered by its per-band reflection
    gains. ``duration`` must cover the earliest arrival.
    """
    images = _as_image_set(images)
    if len(images) == 0:
        raise ValueError("render needs at least one image source")
    impl = kernels.get_backend(backend)
    c = room.speed_of_sound
    n_out = int(round(duration * sample_rate))
    rec = np.asarray(room.receiver_position)
    vec = images.positions - rec
    dist = np.linalg.norm(vec, axis=1)
    first = dist.min() / c
    if first * sample_rate >= n_out:
        raise ValueError(f"duration {duration:g} s is shorter than the direct-path delay "
                         f"{first:.4g} s")
    unit = room.to_local(vec / dist[:, None])
    basis = band_basis(tuple(room.anchor_frequencies), int(sample_rate), fir_taps)
    n_bands = basis.shape[0]
    group_delay = (fir_taps - 1) // 2
    lead = sinc_half_width + 1
    if head.variant == "sphere":
        lead += int(np.ceil(head.head_radius / c * sample_rate))
    n_train = n_out + lead + sinc_half_width + 1
    base = dist / c * sample_rate + lead
    live = base < n_train + sinc_half_width
    amp = (1.0 / dist)[:, None] * images.band_gains  # (M, bands)

    if head.variant == "sphere":
        delays = head.ear_delays(unit) * sample_rate   # (M, 2)
        alpha = head.shadow_alpha(unit)
        (low, a), (high, _) = head.shadow_sections(sample_rate)
        ears = []
        for ear in range(2):
            trains = np.zeros((2 * n_bands, n_train))
            weights = np.concatenate([amp, amp * alpha[:, ear, None]], axis=1)
            impl.accumulate_impulses(trains, np.ascontiguousarray((base + delays[:, ear])[live]),
                                     np.ascontiguousarray(weights[live]),
                                     np.zeros(int(live.sum()), dtype=np.int64),
                                     sinc_half_width)
            flat = _apply_basis(trains[:n_bands], basis)
            tilt = _apply_basis(trains[n_bands:], basis)
            ears.append(lfilter(low, a, flat) + lfilter(high, a, tilt))
    else:
        ears = _render_measured(images, amp, base, live, unit, head, basis,
                                n_train, sample_rate, sinc_half_width, impl)
    start = lead + group_delay
    left, right = (e[start:start + n_out] for e in ears)
    left = np.pad(left, (0, n_out - len(left)))
    right = np.pad(right, (0, n_out - len(right)))
    return BinauralRir(left, right, int(sample_rate))


def _apply_basis(trains, basis):
    out = np.zeros(trains.shape[1] + basis.shape[1] - 1)
    for train, taps in zip(trains, basis):
        if train.any():
            out += np.convolve(train, taps)
    return out


def _render_measured(images, amp, base, live, unit, head, basis, n_train,
                     sample_rate, half_width, impl):
    idx, w = head.hrir_lookup(unit[live])
    used, slot = np.unique(idx, return_inverse=True)
    slot = slot.reshape(idx.shape)
    n_bands = basis.shape[0]
    q = idx.shape[1]
    delays = np.repeat(base[live], q)
    weights = (amp[live][:, None, :] * w[:, :, None]).reshape(-1, n_bands)
    rows = (slot.reshape(-1) * n_bands).astype(np.int64)
    trains = np.zeros((len(used) * n_bands, n_train))
    impl.accumulate_impulses(trains, np.ascontiguousarray(delays),
                             np.ascontiguousarray(weights), rows, half_width)
    left_table, right_table = head.hrir.resampled(sample_rate)
    n_full = n_train + basis.shape[1] - 1 + left_table.shape[1] - 1
    ears = [np.zeros(n_full), np.zeros(n_full)]
    for s, entry in enumerate(used):
        shaped = _apply_basis(trains[s * n_bands:(s + 1) * n_bands], basis)
        for ear, table in ((0, left_table), (1, right_table)):
            ears[ear] += fftconvolve(shaped, table[entry])
    return ears
