"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Signatures and semantics match the extension; results agree to rounding.
"""

import numpy as np


def _windowed_sinc(x, span):
    return np.sinc(x) * 0.5 * (1.0 + np.cos(np.pi * x / span))


def accumulate_impulses(out, delays, weights, rows, half_width):
    n_taps = 2 * half_width + 1
    length = out.shape[1]
    if len(delays) == 0:
        return
    center = np.floor(delays + 0.5).astype(np.int64)
    idx = center[:, None] - half_width + np.arange(n_taps)[None, :]
    taps = _windowed_sinc(idx - delays[:, None], half_width + 1.0)
    valid = (idx >= 0) & (idx < length)
    flat = out.reshape(-1)
    # image-major order per output cell, as in the compiled loop
    for b in range(weights.shape[1]):
        contrib = weights[:, b, None] * taps
        cells = (rows[:, None] + b) * length + idx
        keep = valid & (weights[:, b, None] != 0.0)
        np.add.at(flat, cells[keep], contrib[keep])


def trace_rain(dims, source, receiver, directions, absorption, diffusion,
               ray_energy, speed_of_sound, max_time, bin_width,
               receiver_radius, threshold, hist):
    n_rays = directions.shape[0]
    n_bands = absorption.shape[1]
    n_bins = hist.shape[1]
    r2 = receiver_radius ** 2
    pos = np.tile(np.asarray(source, dtype=float), (n_rays, 1))
    dirv = np.array(directions, dtype=float, copy=True)
    energy = np.full((n_rays, n_bands), ray_energy)
    path = np.zeros(n_rays)
    alive = np.ones(n_rays, dtype=bool)
    hits = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        while alive.any():
            ids = np.flatnonzero(alive)
            p, d = pos[ids], dirv[ids]
            t = np.where(d > 0, (dims - p) / d, np.where(d < 0, -p / d, np.inf))
            axis = np.argmin(t, axis=1)
            step = t[np.arange(len(ids)), axis]
            new_path = path[ids] + step
            timed_out = new_path / speed_of_sound > max_time
            alive[ids[timed_out]] = False
            ids, axis, step = ids[~timed_out], axis[~timed_out], step[~timed_out]
            if len(ids) == 0:
                break
            rows = np.arange(len(ids))
            path[ids] += step
            p = pos[ids] + step[:, None] * dirv[ids]
            positive = dirv[ids, axis] > 0
            p[rows, axis] = np.where(positive, dims[axis], 0.0)
            pos[ids] = p
            surf = 2 * axis + positive.astype(int)
            hits += len(ids)
            v = receiver - p
            dist = np.sqrt(np.sum(v * v, axis=1))
            cos_in = np.abs(v[rows, axis]) / dist
            frac = np.minimum(cos_in * r2 / dist ** 2, 1.0)
            arrival = (path[ids] + dist) / speed_of_sound
            bin_idx = np.floor(arrival / bin_width).astype(np.int64)
            e = energy[ids] * (1.0 - absorption[surf])
            deposit = e * diffusion[surf] * frac[:, None]
            ok = (bin_idx < n_bins) & (arrival <= max_time)
            for b in range(n_bands):
                np.add.at(hist[b], bin_idx[ok], deposit[ok, b])
            e = e * (1.0 - diffusion[surf])
            energy[ids] = e
            dirv[ids, axis] = -dirv[ids, axis]
            dead = e.max(axis=1) < threshold * ray_energy
            alive[ids[dead]] = False
    return hits
