# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops: fractional-delay impulse accumulation and ray tracing."""

from libc.math cimport sin, cos, floor, sqrt, M_PI, fabs

import numpy as np


def accumulate_impulses(double[:, ::1] out, const double[::1] delays,
                        const double[:, ::1] weights, const long[::1] rows,
                        int half_width):
    """Add windowed-sinc impulses at fractional sample positions into ``out``.

    Image ``m`` contributes ``weights[m, b] * h`` to row ``rows[m] + b``, where
    ``h`` is a ``2 * half_width + 1`` tap kernel centred on ``delays[m]``.
    """
    cdef Py_ssize_t n_img = delays.shape[0]
    cdef Py_ssize_t n_b = weights.shape[1]
    cdef Py_ssize_t length = out.shape[1]
    cdef Py_ssize_t m, b, k, idx, row
    cdef int n_taps = 2 * half_width + 1
    cdef long center
    cdef double d, w, x, s0, sign, span = half_width + 1.0
    cdef double cw, sw, cd, sd, tmp
    cdef double taps[257]
    if n_taps > 257:
        raise ValueError("half_width too large")
    cd = cos(M_PI / span)
    sd = sin(M_PI / span)
    with nogil:
        for m in range(n_img):
            d = delays[m]
            center = <long>floor(d + 0.5)
            x = center - half_width - d
            # sin(pi * (x + k)) = (-1)**k * sin(pi * x); window cosine by rotation
            s0 = sin(M_PI * x)
            cw = cos(M_PI * x / span)
            sw = sin(M_PI * x / span)
            sign = 1.0
            for k in range(n_taps):
                if fabs(x + k) < 1e-9:
                    taps[k] = 0.5 * (1.0 + cw)
                else:
                    taps[k] = sign * s0 / (M_PI * (x + k)) * 0.5 * (1.0 + cw)
                sign = -sign
                tmp = cw * cd - sw * sd
                sw = sw * cd + cw * sd
                cw = tmp
            row = rows[m]
            for b in range(n_b):
                w = weights[m, b]
                if w == 0.0:
                    continue
                if center - half_width >= 0 and center + half_width < length:
                    for k in range(n_taps):
                        out[row + b, center - half_width + k] += w * taps[k]
                else:
                    for k in range(n_taps):
                        idx = center - half_width + k
                        if idx < 0 or idx >= length:
                            continue
                        out[row + b, idx] += w * taps[k]


def trace_rain(const double[::1] dims, const double[::1] source,
               const double[::1] receiver, const double[:, ::1] directions,
               const double[:, ::1] absorption, const double[:, ::1] diffusion,
               double ray_energy, double speed_of_sound, double max_time,
               double bin_width, double receiver_radius, double threshold,
               double[:, ::1] hist):
    """Trace specular rays in a shoebox and deposit diffuse energy at the receiver.

    ``hist`` has shape (bands, bins) and receives captured energy. Returns the
    total number of wall hits processed.
    """
    cdef Py_ssize_t n_rays = directions.shape[0]
    cdef Py_ssize_t n_bands = absorption.shape[1]
    cdef Py_ssize_t n_bins = hist.shape[1]
    cdef Py_ssize_t r, b, ax, hit_ax, surf
    cdef double pos[3]
    cdef double dirv[3]
    cdef double energy[64]
    cdef double t, t_min, path, dist, cos_in, frac, arrival, emax
    cdef double vx, vy, vz, r2 = receiver_radius * receiver_radius
    cdef long bin_idx, hits = 0
    if n_bands > 64:
        raise ValueError("too many bands")
    with nogil:
        for r in range(n_rays):
            for ax in range(3):
                pos[ax] = source[ax]
                dirv[ax] = directions[r, ax]
            for b in range(n_bands):
                energy[b] = ray_energy
            path = 0.0
            while True:
                t_min = 1e300
                hit_ax = -1
                for ax in range(3):
                    if dirv[ax] > 0.0:
                        t = (dims[ax] - pos[ax]) / dirv[ax]
                    elif dirv[ax] < 0.0:
                        t = -pos[ax] / dirv[ax]
                    else:
                        continue
                    if t < t_min:
                        t_min = t
                        hit_ax = ax
                if hit_ax < 0:
                    break
                path += t_min
                if path / speed_of_sound > max_time:
                    break
                for ax in range(3):
                    pos[ax] += t_min * dirv[ax]
                if dirv[hit_ax] > 0.0:
                    pos[hit_ax] = dims[hit_ax]
                    surf = 2 * hit_ax + 1
                else:
                    pos[hit_ax] = 0.0
                    surf = 2 * hit_ax
                hits += 1
                vx = receiver[0] - pos[0]
                vy = receiver[1] - pos[1]
                vz = receiver[2] - pos[2]
                dist = sqrt(vx * vx + vy * vy + vz * vz)
                if hit_ax == 0:
                    cos_in = fabs(vx) / dist
                elif hit_ax == 1:
                    cos_in = fabs(vy) / dist
                else:
                    cos_in = fabs(vz) / dist
                frac = cos_in * r2 / (dist * dist)
                if frac > 1.0:
                    frac = 1.0
                arrival = (path + dist) / speed_of_sound
                bin_idx = <long>floor(arrival / bin_width)
                emax = 0.0
                for b in range(n_bands):
                    energy[b] *= 1.0 - absorption[surf, b]
                    if bin_idx < n_bins and arrival <= max_time:
                        hist[b, bin_idx] += energy[b] * diffusion[surf, b] * frac
                    energy[b] *= 1.0 - diffusion[surf, b]
                    if energy[b] > emax:
                        emax = energy[b]
                dirv[hit_ax] = -dirv[hit_ax]
                if emax < threshold * ray_energy:
                    break
    return hits
