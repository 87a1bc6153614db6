"""Direction-dependent ear filtering.

Two head models are supported: a parametric rigid sphere (Woodworth delays and
a first-order head-shadow filter per ear) and measured HRIR sets loaded from
disk. Directions are in the receiver frame: azimuth 0 is the front, positive
azimuth is to the left, elevation is positive upwards.
"""

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import lfilter, resample_poly

DEFAULT_HEAD_RADIUS = 0.0875
# Head-shadow shape parameters of the one-pole/one-zero sphere approximation.
SHADOW_ALPHA_MIN = 0.1
SHADOW_THETA_MIN = 150.0

_HRIR_NAME = re.compile(r"^az([+-]\d{3})_el([+-]\d{3})_([LR])\.wav$")


class HrirSetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HrirSet:
    """Table of measured left/right impulse responses indexed by direction."""

    directions: np.ndarray  # (N, 2) azimuth, elevation in degrees
    left: np.ndarray        # (N, taps) float32
    right: np.ndarray
    sample_rate: int

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        left = np.asarray(self.left, dtype=np.float32)
        right = np.asarray(self.right, dtype=np.float32)
        if d.ndim != 2 or d.shape[1] != 2 or len(d) == 0:
            raise HrirSetError("directions must be an (N, 2) array with N >= 1")
        if left.shape != right.shape or left.shape[0] != len(d):
            raise HrirSetError("left/right tables must be (N, taps) with equal shapes")
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def unit_vectors(self):
        az, el = np.deg2rad(self.directions.T)
        return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1)

    def resampled(self, sample_rate):
        if sample_rate == self.sample_rate:
            return self.left.astype(float), self.right.astype(float)
        ratio = Fraction(int(sample_rate), int(self.sample_rate)).limit_denominator(1000)
        up, down = ratio.numerator, ratio.denominator
        left = resample_poly(self.left.astype(float), up, down, axis=1)
        right = resample_poly(self.right.astype(float), up, down, axis=1)
        return left, right


@dataclass(frozen=True)
class HeadModel:
    """Parametric sphere (``variant='sphere'``) or measured HRIR set."""

    variant: str = "sphere"
    head_radius: float = DEFAULT_HEAD_RADIUS
    ear_azimuth: float = 90.0
    speed_of_sound: float = 343.0
    hrir: HrirSet = field(default=None, repr=False)
    interpolation: str = "nearest"

    def __post_init__(self):
        if self.variant not in ("sphere", "measured"):
            raise ValueError(f"unknown head model variant {self.variant!r}")
        if self.variant == "sphere" and self.head_radius <= 0:
            raise ValueError("head_radius must be positive")
        if self.variant == "measured" and self.hrir is None:
            raise HrirSetError("measured head model requires an HRIR set")
        if self.interpolation not in ("nearest", "bilinear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")

    @classmethod
    def measured(cls, hrir, interpolation="nearest"):
        return cls(variant="measured", hrir=hrir, interpolation=interpolation)

    # -- parametric sphere -------------------------------------------------

    def _ear_axes(self):
        ea = np.deg2rad(self.ear_azimuth)
        return np.array([[np.cos(ea), np.sin(ea), 0.0],
                         [np.cos(ea), -np.sin(ea), 0.0]])

    def _incidence(self, unit_dirs):
        cos_psi = np.clip(np.asarray(unit_dirs) @ self._ear_axes().T, -1.0, 1.0)
        return cos_psi, np.arccos(cos_psi)

    def ear_delays(self, unit_dirs):
        """Woodworth arrival delay at each ear relative to the head centre, (M, 2) s."""
        cos_psi, psi = self._incidence(unit_dirs)
        r_c = self.head_radius / self.speed_of_sound
        return np.where(cos_psi >= 0, -r_c * cos_psi, r_c * (psi - np.pi / 2))

    def shadow_alpha(self, unit_dirs):
        """High-frequency gain of the head-shadow filter at each ear, (M, 2)."""
        _, psi = self._incidence(unit_dirs)
        return ((1 + SHADOW_ALPHA_MIN / 2)
                + (1 - SHADOW_ALPHA_MIN / 2) * np.cos(psi / np.deg2rad(SHADOW_THETA_MIN) * np.pi))

    def shadow_sections(self, sample_rate):
        """Bilinear-transformed low/high-pass pair whose sum is the identity.

        The ear filter is ``lowpass + alpha * highpass``.
        """
        w0 = self.speed_of_sound / self.head_radius
        k = 2.0 * sample_rate
        norm = 2 * w0 + k
        a = np.array([1.0, (2 * w0 - k) / norm])
        low = np.array([2 * w0, 2 * w0]) / norm
        high = np.array([k, -k]) / norm
        return (low, a), (high, a)

    def itd(self, azimuth, elevation=0.0):
        """Interaural time difference (right minus left arrival), seconds."""
        d = ear_delays_for(self, azimuth, elevation)
        return float(d[1] - d[0])

    # -- measured sets -----------------------------------------------------

    def hrir_lookup(self, unit_dirs):
        """Table indices and weights per direction, each (M, q)."""
        unit_dirs = np.atleast_2d(unit_dirs)
        table = self.hrir.unit_vectors()
        if self.interpolation == "nearest":
            idx = np.argmax(unit_dirs @ table.T, axis=1)
            return idx[:, None], np.ones((len(idx), 1))
        az = np.rad2deg(np.arctan2(unit_dirs[:, 1], unit_dirs[:, 0]))
        el = np.rad2deg(np.arcsin(np.clip(unit_dirs[:, 2], -1, 1)))
        out = [_bilinear_entry(self.hrir.directions, a, e) for a, e in zip(az, el)]
        return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def ear_delays_for(head, azimuth, elevation):
    from .acoustics.room import direction_vector
    return head.ear_delays(direction_vector(azimuth, elevation)[None])[0]


def _bilinear_entry(directions, az, el):
    """Four table entries and weights around (az, el) on a ring-structured grid."""
    rings = np.unique(directions[:, 1])
    el = float(np.clip(el, rings[0], rings[-1]))
    hi = int(np.searchsorted(rings, el))
    hi = min(max(hi, 1), len(rings) - 1) if len(rings) > 1 else 0
    lo = max(hi - 1, 0)
    if rings[hi] == rings[lo]:
        t = 0.0
    else:
        t = (el - rings[lo]) / (rings[hi] - rings[lo])
    idx, w = [], []
    for ring, wr in ((rings[lo], 1 - t), (rings[hi], t)):
        members = np.flatnonzero(directions[:, 1] == ring)
        ring_az = directions[members, 0]
        order = np.argsort(ring_az)
        members, ring_az = members[order], ring_az[order]
        if len(members) == 1:
            idx += [members[0], members[0]]
            w += [wr, 0.0]
            continue
        rel = (az - ring_az) % 360.0
        j = int(np.argmin(rel))           # closest entry at or below az
        k = (j + 1) % len(members)
        span = (ring_az[k] - ring_az[j]) % 360.0 or 360.0
        s = min(rel[j] / span, 1.0)
        idx += [members[j], members[k]]
        w += [wr * (1 - s), wr * s]
    return idx, w


def ear_filters(head, azimuth, elevation, sample_rate, n_taps=128):
    """Left and right FIR filters for a source direction.

    For the sphere model the filters realise the Woodworth ear delays plus a
    common bulk delay (so both are causal) followed by the head-shadow filter.
    """
    from .acoustics.room import direction_vector
    unit = direction_vector(azimuth, elevation)[None]
    if head.variant == "measured":
        idx, w = head.hrir_lookup(unit)
        left, right = head.hrir.resampled(sample_rate)
        return (np.tensordot(w[0], left[idx[0]], axes=1),
                np.tensordot(w[0], right[idx[0]], axes=1))
    from .kernels import accumulate_impulses
    half = 5
    bulk = head.head_radius / head.speed_of_sound * sample_rate + half
    delays = head.ear_delays(unit)[0] * sample_rate + bulk
    alpha = head.shadow_alpha(unit)[0]
    (low, a), (high, _) = head.shadow_sections(sample_rate)
    filters = []
    for ear in range(2):
        impulse = np.zeros((1, n_taps))
        accumulate_impulses(impulse, np.array([delays[ear]]), np.ones((1, 1)),
                            np.zeros(1, dtype=np.int64), half)
        filters.append(lfilter(low, a, impulse[0]) + alpha[ear] * lfilter(high, a, impulse[0]))
    return filters[0], filters[1]


# -- on-disk HRIR sets -----------------------------------------------------

def _hrir_filename(az, el, ear):
    return f"az{int(round(az)):+04d}_el{int(round(el)):+04d}_{ear}.wav"


def save_hrir_set(hrir, directory):
    """Write ``hrir`` as mono float32 WAV pairs plus ``index.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for (az, el), left, right in zip(hrir.directions, hrir.left, hrir.right):
        names = {}
        for ear, data in (("L", left), ("R", right)):
            name = _hrir_filename(az, el, ear)
            wavfile.write(directory / name, int(hrir.sample_rate), data.astype(np.float32))
            names[ear] = name
        entries.append({"azimuth": float(az), "elevation": float(el),
                        "left": names["L"], "right": names["R"]})
    names = [e["left"] for e in entries]
    if len(set(names)) != len(names):
        raise HrirSetError("directions collide after rounding to whole degrees")
    index = {"format": "vsloc-hrir", "version": 1, "sample_rate": int(hrir.sample_rate),
             "taps": int(hrir.left.shape[1]), "directions": entries}
    (directory / "index.json").write_text(json.dumps(index, indent=2))


def load_hrir_set(directory):
    directory = Path(directory)
    index_path = directory / "index.json"
    if not index_path.exists():
        raise HrirSetError(f"no index.json in {directory}")
    index = json.loads(index_path.read_text())
    sr = int(index["sample_rate"])
    dirs, left, right = [], [], []
    for entry in index["directions"]:
        pair = []
        for key in ("left", "right"):
            rate, data = wavfile.read(directory / entry[key])
            if rate != sr or data.ndim != 1:
                raise HrirSetError(f"{entry[key]}: expected mono WAV at {sr} Hz")
            pair.append(data.astype(np.float32))
        if len(pair[0]) != len(pair[1]):
            raise HrirSetError(f"unequal left/right lengths at {entry['azimuth']}, "
                               f"{entry['elevation']}")
        dirs.append((entry["azimuth"], entry["elevation"]))
        left.append(pair[0])
        right.append(pair[1])
    if len({len(x) for x in left}) != 1:
        raise HrirSetError("all HRIRs in a set must share one length")
    return HrirSet(np.array(dirs), np.array(left), np.array(right), sr)


_KEMAR_NAME = re.compile(r"^H(-?\d+)e(\d{3})a\.wav$")


def load_mit_kemar(directory):
    """Load the MIT KEMAR "compact" layout (``elev*/H{el}e{az}a.wav``, stereo).

    KEMAR azimuths run clockwise (towards the right ear); they are converted to
    the counter-clockwise convention used here. Files covering only 0..180
    degrees are mirrored with swapped ears to fill the left hemisphere.
    """
    directory = Path(directory)
    dirs, left, right = [], [], []
    sr = None
    for path in sorted(directory.glob("elev*/H*e*a.wav")):
        m = _KEMAR_NAME.match(path.name)
        if not m:
            continue
        rate, data = wavfile.read(path)
        if data.ndim != 2 or data.shape[1] != 2:
            raise HrirSetError(f"{path}: expected a stereo file")
        if np.issubdtype(data.dtype, np.integer):
            data = data / float(np.iinfo(data.dtype).max)
        sr = sr or rate
        el, az_cw = float(m.group(1)), float(m.group(2))
        az = -az_cw if az_cw <= 180 else 360.0 - az_cw
        dirs.append((az, el))
        left.append(data[:, 0])
        right.append(data[:, 1])
    if not dirs:
        raise HrirSetError(f"no KEMAR files found under {directory}")
    dirs = np.array(dirs)
    if dirs[:, 0].max() <= 0:
        mirror = dirs[:, 0] < 0
        dirs = np.concatenate([dirs, dirs[mirror] * [-1, 1]])
        left, right = left + [right[i] for i in np.flatnonzero(mirror)], \
            right + [left[i] for i in np.flatnonzero(mirror)]
    return HrirSet(dirs, np.array(left), np.array(right), int(sr))
