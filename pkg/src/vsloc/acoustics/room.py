"""Shoebox room, surface and source descriptions."""

from dataclasses import dataclass, field, replace

import numpy as np

ANCHOR_FREQUENCIES = (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0)

# Surface order used throughout: the two x walls, the two y walls, floor, ceiling.
SURFACE_NAMES = ("wall_x0", "wall_x1", "wall_y0", "wall_y1", "floor", "ceiling")
WALLS = (0, 1, 2, 3)
FLOOR, CEILING = 4, 5

CEILING_GYPSUM = (0.45, 0.55, 0.60, 0.90, 0.86, 0.75)
FLOOR_THIN_CARPET = (0.02, 0.04, 0.08, 0.20, 0.35, 0.40)
FURNISHED_DIFFUSION = (0.003, 0.004, 0.045, 0.077, 0.210, 0.431)


class InvalidSceneError(ValueError):
    """Raised when a room, receiver or source description is not physical."""


@dataclass(frozen=True)
class SurfaceProfile:
    """Frequency-dependent absorption and diffusion of one surface."""

    absorption: tuple
    diffusion: tuple = (0.0,) * 6
    anchor_frequencies: tuple = ANCHOR_FREQUENCIES

    def __post_init__(self):
        object.__setattr__(self, "absorption", tuple(float(a) for a in self.absorption))
        object.__setattr__(self, "diffusion", tuple(float(d) for d in self.diffusion))
        object.__setattr__(self, "anchor_frequencies",
                           tuple(float(f) for f in self.anchor_frequencies))
        n = len(self.anchor_frequencies)
        if n == 0 or len(self.absorption) != n or len(self.diffusion) != n:
            raise InvalidSceneError(
                "absorption and diffusion must have one value per anchor frequency")
        if any(np.diff(self.anchor_frequencies) <= 0):
            raise InvalidSceneError("anchor frequencies must be strictly increasing")
        for name in ("absorption", "diffusion"):
            values = getattr(self, name)
            if any(not (0.0 <= v <= 1.0) for v in values):
                raise InvalidSceneError(f"{name} values must lie in [0, 1], got {values}")

    @classmethod
    def flat(cls, absorption, diffusion=0.0):
        return cls((absorption,) * 6, (diffusion,) * 6)

    def absorption_at(self, freqs):
        """Linearly interpolated absorption, clamped outside the anchors."""
        return np.interp(freqs, self.anchor_frequencies, self.absorption)

    def diffusion_at(self, freqs):
        return np.interp(freqs, self.anchor_frequencies, self.diffusion)

    def without_diffusion(self):
        return replace(self, diffusion=(0.0,) * len(self.anchor_frequencies))


@dataclass(frozen=True)
class SourceSpec:
    """Source direction in the receiver frame (0 deg = front, positive = left)."""

    azimuth: float
    elevation: float
    range: float


@dataclass(frozen=True)
class RoomSpec:
    width: float = 6.0
    depth: float = 5.0
    height: float = 3.3
    receiver_position: tuple = (2.0, 2.5, 1.6)
    receiver_yaw: float = 0.0
    surfaces: tuple = field(default_factory=lambda: default_surfaces(0.5))
    speed_of_sound: float = 343.0

    def __post_init__(self):
        object.__setattr__(self, "receiver_position",
                           tuple(float(x) for x in self.receiver_position))
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        if min(self.width, self.depth, self.height) <= 0:
            raise InvalidSceneError("room dimensions must be positive")
        if self.speed_of_sound <= 0:
            raise InvalidSceneError("speed of sound must be positive")
        if len(self.surfaces) != 6:
            raise InvalidSceneError(f"expected 6 surfaces, got {len(self.surfaces)}")
        anchors = {s.anchor_frequencies for s in self.surfaces}
        if len(anchors) != 1:
            raise InvalidSceneError("all surfaces must share the same anchor frequencies")
        _check_inside(self.receiver_position, self.dims, "receiver")

    @property
    def dims(self):
        return np.array([self.width, self.depth, self.height])

    @property
    def volume(self):
        return float(self.width * self.depth * self.height)

    @property
    def anchor_frequencies(self):
        return self.surfaces[0].anchor_frequencies

    def surface_areas(self):
        w, d, h = self.width, self.depth, self.height
        return np.array([d * h, d * h, w * h, w * h, w * d, w * d])

    def absorption_matrix(self):
        """(6, bands) absorption coefficients at the anchor frequencies."""
        return np.array([s.absorption for s in self.surfaces], dtype=float)

    def diffusion_matrix(self):
        return np.array([s.diffusion for s in self.surfaces], dtype=float)

    def with_walls(self, profile):
        """Copy of the room with all four walls set to ``profile``."""
        surfaces = list(self.surfaces)
        for i in WALLS:
            surfaces[i] = profile
        return replace(self, surfaces=tuple(surfaces))

    def without_diffusion(self):
        return replace(self, surfaces=tuple(s.without_diffusion() for s in self.surfaces))

    def source_position(self, source):
        """Absolute position of ``source``; raises if it falls outside the room."""
        if source.range <= 0:
            raise InvalidSceneError(f"source range must be positive, got {source.range}")
        pos = np.asarray(self.receiver_position) + source.range * direction_vector(
            source.azimuth + self.receiver_yaw, source.elevation)
        _check_inside(pos, self.dims, "source")
        return pos

    def to_local(self, vectors):
        """Rotate world-frame vectors (..., 3) into the receiver frame."""
        yaw = np.deg2rad(self.receiver_yaw)
        c, s = np.cos(yaw), np.sin(yaw)
        v = np.asarray(vectors, dtype=float)
        x = c * v[..., 0] + s * v[..., 1]
        y = -s * v[..., 0] + c * v[..., 1]
        return np.stack([x, y, v[..., 2]], axis=-1)


def direction_vector(azimuth, elevation):
    az, el = np.deg2rad(azimuth), np.deg2rad(elevation)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def _check_inside(pos, dims, what):
    for axis, (p, size) in enumerate(zip(pos, dims)):
        if not (0.0 < p < size):
            label = "xyz"[axis]
            raise InvalidSceneError(
                f"{what} {label}={p:.4f} m lies outside the room (0, {size:g})")


def default_surfaces(wall_absorption, diffusion=True):
    """Surfaces of the reference room: given walls, carpet floor, gypsum ceiling.

    ``wall_absorption`` is a scalar (flat profile) or six anchor values.
    """
    diff = FURNISHED_DIFFUSION if diffusion else (0.0,) * 6
    if np.ndim(wall_absorption) == 0:
        wall_absorption = (float(wall_absorption),) * 6
    wall = SurfaceProfile(wall_absorption, diff)
    return (wall, wall, wall, wall,
            SurfaceProfile(FLOOR_THIN_CARPET, diff),
            SurfaceProfile(CEILING_GYPSUM, diff))


def default_room(wall_absorption=0.5, diffusion=True, **kwargs):
    return RoomSpec(surfaces=default_surfaces(wall_absorption, diffusion), **kwargs)


def sabine_rt60(room, band=None):
    """Sabine reverberation time 0.161 V / sum(S_i alpha_i).

    Uses the mean absorption over anchors of each surface unless ``band`` selects one.
    """
    alpha = room.absorption_matrix()
    alpha = alpha.mean(axis=1) if band is None else alpha[:, band]
    return 0.161 * room.volume / float(np.sum(room.surface_areas() * alpha))
