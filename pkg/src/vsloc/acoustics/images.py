"""Image-source enumeration for shoebox rooms."""

from dataclasses import dataclass

import numpy as np

# Strongest omitted image must sit this far below the direct path (amplitude).
ADAPTIVE_LEVEL = 1e-3


@dataclass(frozen=True)
class ImageSource:
    position: tuple
    order: int
    reflection_sequence: tuple
    band_gains: tuple


@dataclass
class ImageSet:
    """Array form of a set of image sources, used by the renderer."""

    positions: np.ndarray   # (M, 3)
    indices: np.ndarray     # (M, 3) signed mirror index per axis
    counts: np.ndarray      # (M, 6) hits per surface
    band_gains: np.ndarray  # (M, bands)

    @property
    def orders(self):
        return np.abs(self.indices).sum(axis=1)

    def __len__(self):
        return len(self.positions)

    def take(self, mask):
        return ImageSet(self.positions[mask], self.indices[mask],
                        self.counts[mask], self.band_gains[mask])

    def to_list(self, receiver, dims):
        out = []
        for pos, idx, gains in zip(self.positions, self.indices, self.band_gains):
            out.append(ImageSource(
                position=tuple(float(x) for x in pos),
                order=int(np.abs(idx).sum()),
                reflection_sequence=reflection_sequence(pos, idx, receiver, dims),
                band_gains=tuple(float(g) for g in gains)))
        return out


def mirror_coordinates(n, s, size):
    """Coordinate of the image with signed mirror index ``n`` along one axis."""
    n = np.asarray(n)
    return np.where(n % 2 == 0, n * size + s, (n + 1) * size - s)


def wall_hits(n):
    """Hits on the (lower, upper) wall of an axis for mirror index ``n``."""
    n = np.asarray(n)
    a = np.abs(n)
    big, small = (a + 1) // 2, a // 2
    lower = np.where(n > 0, small, big)
    upper = np.where(n > 0, big, small)
    return lower, upper


def image_set(room, source_pos, max_order=None, max_distance=None, sort=True):
    """Image sources of the room as arrays.

    With ``max_order`` None the order is chosen adaptively within
    ``max_distance``: the smallest order whose strongest omitted image is at
    least 60 dB below the direct path. ``sort`` orders images by (order,
    index); without it the order is the fixed lattice scan order.
    """
    if max_order is None and max_distance is None:
        raise ValueError("adaptive order needs a max_distance bound")
    if max_order is not None and max_order < 0:
        raise ValueError("max_order must be non-negative")
    dims = room.dims
    src = np.asarray(source_pos, dtype=float)
    rec = np.asarray(room.receiver_position)
    if max_distance is not None:
        bounds = [int(np.ceil(max_distance / size)) + 1 for size in dims]
        if max_order is not None:
            bounds = [min(b, max_order) for b in bounds]
    else:
        bounds = [max_order] * 3

    reflect = np.sqrt(1.0 - room.absorption_matrix())  # (6, bands)
    with np.errstate(divide="ignore"):
        log_r = np.log(reflect)
    axes_n, axes_x, axes_lg, axes_hits = [], [], [], []
    for a in range(3):
        n = np.arange(-bounds[a], bounds[a] + 1)
        lo, hi = wall_hits(n)
        # 0 * log(0) must stay 0 for walls that are never hit
        with np.errstate(invalid="ignore"):
            lg = (np.where(lo[:, None] > 0, lo[:, None] * log_r[2 * a], 0.0)
                  + np.where(hi[:, None] > 0, hi[:, None] * log_r[2 * a + 1], 0.0))
        axes_n.append(n)
        axes_x.append(mirror_coordinates(n, src[a], dims[a]))
        axes_lg.append(lg)
        axes_hits.append(np.stack([lo, hi], axis=1))

    ok = np.ones([len(n) for n in axes_n], dtype=bool)
    na, nb, nc = (np.abs(n) for n in axes_n)
    if max_order is not None:
        ok &= (na[:, None, None] + nb[None, :, None] + nc[None, None, :]) <= max_order
    if max_distance is not None:
        d2 = [(x - rec[a]) ** 2 for a, x in enumerate(axes_x)]
        ok &= (d2[0][:, None, None] + d2[1][None, :, None] + d2[2][None, None, :]
               <= max_distance ** 2)
    i, j, k = np.nonzero(ok)
    idx = np.stack([axes_n[0][i], axes_n[1][j], axes_n[2][k]], axis=1)
    pos = np.stack([axes_x[0][i], axes_x[1][j], axes_x[2][k]], axis=1)
    counts = np.concatenate([axes_hits[0][i], axes_hits[1][j], axes_hits[2][k]], axis=1)
    gains = np.exp(axes_lg[0][i] + axes_lg[1][j] + axes_lg[2][k])

    images = ImageSet(pos, idx, counts, gains)
    if sort:
        order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0], np.abs(idx).sum(axis=1)))
        images = images.take(order)

    if max_order is None:
        d_img = np.linalg.norm(images.positions - rec, axis=1)
        direct = np.linalg.norm(src - rec)
        level = images.band_gains.max(axis=1) * direct / d_img
        loud = images.orders[level > ADAPTIVE_LEVEL]
        cutoff = int(loud.max()) if len(loud) else 0
        images = images.take(images.orders <= cutoff)
    return images


def enumerate_image_sources(room, source, max_order):
    """All image sources of order <= ``max_order``, direct source included."""
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    pos = room.source_position(source)
    images = image_set(room, pos, max_order=max_order)
    return images.to_list(room.receiver_position, room.dims)


def reflection_sequence(position, index, receiver, dims):
    """Surfaces hit, in order from the source, on the path image -> receiver."""
    position = np.asarray(position, dtype=float)
    receiver = np.asarray(receiver, dtype=float)
    delta = receiver - position
    crossings = []
    for a, n in enumerate(index):
        n = int(n)
        # planes j * size separate the image cell n from the receiver cell 0
        planes = range(1, n + 1) if n > 0 else range(n + 1, 1)
        for j in planes:
            t = (j * dims[a] - position[a]) / delta[a]
            crossings.append((t, 2 * a + (j % 2)))
    crossings.sort()
    return tuple(int(s) for _, s in crossings)
