"""Noise-based synthesis of the diffuse tail from an energy histogram."""

import numpy as np

from .render import BinauralRir


def band_weights(anchor_frequencies, n_fft, sample_rate):
    """Power-complementary band masks on the rfft grid, shape (bands, bins).

    The squared masks are the linear-interpolation hat functions through the
    anchors, so they sum to one at every frequency.
    """
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    anchors = np.asarray(anchor_frequencies, dtype=float)
    hats = np.empty((len(anchors), len(freqs)))
    for b in range(len(anchors)):
        unit = np.zeros(len(anchors))
        unit[b] = 1.0
        hats[b] = np.interp(freqs, anchors, unit)
    return np.sqrt(hats)


def _bin_edges(n_bins, bin_width, sample_rate, n_samples):
    edges = np.round(np.arange(n_bins + 1) * bin_width * sample_rate).astype(np.int64)
    return np.minimum(edges, n_samples)


def synthesize_diffuse_tail(hist, sample_rate, seed, n_samples=None):
    """Shape band-limited noise so each (band, time bin) carries the histogram energy.

    Each ear receives the full diffuse intensity from an independent noise
    realisation, and each band uses its own noise so that overlapping band
    masks add in energy. Every band/bin segment is normalised to its exact
    target energy.
    """
    intensity = hist.intensity()
    n_bands, n_bins = intensity.shape
    if n_samples is None:
        n_samples = int(round(n_bins * hist.time_bin_width * sample_rate))
    out = np.zeros((2, n_samples))
    if not intensity.any():
        return BinauralRir(out[0], out[1], int(sample_rate))
    edges = _bin_edges(n_bins, hist.time_bin_width, sample_rate, n_samples)
    starts, stops = edges[:-1], edges[1:]
    usable = stops > starts
    masks = band_weights(hist.anchor_frequencies, n_samples, sample_rate)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]
    bin_of = np.repeat(np.arange(n_bins)[usable], (stops - starts)[usable])
    first = starts[usable][0] if usable.any() else 0
    for ear, rng in enumerate(rngs):
        spectra = np.fft.rfft(rng.standard_normal((n_bands, n_samples)), axis=1)
        for b in range(n_bands):
            target = intensity[b]
            if not target.any():
                continue
            noise = np.fft.irfft(spectra[b] * masks[b], n_samples)
            seg = noise[first:first + len(bin_of)]
            power = np.bincount(bin_of, weights=seg ** 2, minlength=n_bins)
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(power > 0, np.sqrt(target / power), 0.0)
            out[ear, first:first + len(bin_of)] += seg * gain[bin_of]
    return BinauralRir(out[0], out[1], int(sample_rate))
