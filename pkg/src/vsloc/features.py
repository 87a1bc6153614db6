"""Interaural level/phase features from binaural signals.

A scene is turned into a feature vector by convolving white noise with both
ears' impulse responses, taking Hann-windowed STFTs and averaging the
interaural level and phase differences over time, keeping only bins at or
above a cutoff frequency. The vector layout is ``[ILD | Re IPD | Im IPD]``.
"""

import json
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve, get_window, resample_poly

EPS = 1e-12
BINARY_MAGIC = b"VSLF"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    window_ms: float = 64.0
    overlap: float = 0.5
    cutoff: float = 500.0
    noise_duration: float = 1.0

    @property
    def window_length(self):
        return int(round(self.window_ms * 1e-3 * self.sample_rate))

    @property
    def hop(self):
        return int(round(self.window_length * (1.0 - self.overlap)))

    def retained_bins(self):
        """Indices of one-sided bins whose centre frequency is >= cutoff."""
        n = self.window_length
        freqs = np.arange(n // 2 + 1) * self.sample_rate / n
        return np.flatnonzero(freqs >= self.cutoff)

    @property
    def dimension(self):
        return 3 * len(self.retained_bins())


@dataclass
class Spectrogram:
    values: np.ndarray  # (F, T) complex
    sample_rate: int
    window_length: int
    hop: int

    @property
    def frequencies(self):
        return np.arange(self.values.shape[0]) * self.sample_rate / self.window_length


@dataclass
class FeatureVector:
    values: np.ndarray
    cutoff: float
    n_bins: int
    sample_rate: int

    @property
    def ild(self):
        return self.values[:self.n_bins]

    @property
    def ipd(self):
        f = self.n_bins
        return self.values[f:2 * f] + 1j * self.values[2 * f:]


def stft(signal, sample_rate, window_ms=64.0, overlap=0.5):
    """One-sided Hann-windowed STFT without padding, shape (F, T)."""
    signal = np.asarray(signal, dtype=float)
    win = int(round(window_ms * 1e-3 * sample_rate))
    hop = int(round(win * (1.0 - overlap)))
    if hop < 1:
        raise ValueError("overlap leaves no hop between frames")
    if len(signal) < win:
        raise ValueError(f"signal of {len(signal)} samples is shorter than one "
                         f"{win}-sample window")
    n_frames = (len(signal) - win) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(signal, win)[::hop][:n_frames]
    window = get_window("hann", win)
    values = np.fft.rfft(frames * window, axis=1).T
    return Spectrogram(values, int(sample_rate), win, hop)


def _check_pair(left, right):
    lv = getattr(left, "values", left)
    rv = getattr(right, "values", right)
    if np.shape(lv) != np.shape(rv):
        raise ValueError(f"spectrogram shapes differ: {np.shape(lv)} vs {np.shape(rv)}")
    return np.asarray(lv), np.asarray(rv)


def ild(left, right, eps=EPS):
    """Interaural level difference in dB, magnitudes floored at ``eps``."""
    lv, rv = _check_pair(left, right)
    return 20.0 * np.log10(np.maximum(np.abs(lv), eps) / np.maximum(np.abs(rv), eps))


def ipd(left, right, eps=EPS):
    """Unit-modulus interaural phase factor; bins with a zero magnitude give 1."""
    lv, rv = _check_pair(left, right)
    mag_l, mag_r = np.abs(lv), np.abs(rv)
    ok = (mag_l > eps) & (mag_r > eps)
    ratio = np.ones(lv.shape, dtype=complex)
    ratio[ok] = (lv[ok] / mag_l[ok]) * (np.conj(rv[ok]) / mag_r[ok])
    return ratio


def assemble_feature(ild_matrix, ipd_matrix, sample_rate, cutoff=500.0, window_length=None):
    """Time-average the retained bins into ``[ILD | Re IPD | Im IPD]``.

    The IPD is averaged as a complex mean and renormalised to unit modulus.
    """
    ild_matrix = np.asarray(ild_matrix, dtype=float)
    ipd_matrix = np.asarray(ipd_matrix)
    if ild_matrix.shape != ipd_matrix.shape:
        raise ValueError("ILD and IPD matrices must have the same shape")
    n_freq = ild_matrix.shape[0]
    if window_length is None:
        window_length = 2 * (n_freq - 1)
    freqs = np.arange(n_freq) * sample_rate / window_length
    keep = freqs >= cutoff
    if not keep.any():
        raise ValueError(f"cutoff {cutoff} Hz removes every frequency bin")
    level = ild_matrix[keep].mean(axis=1)
    phase = ipd_matrix[keep].mean(axis=1)
    mag = np.abs(phase)
    phase = np.where(mag > EPS, phase / np.where(mag > EPS, mag, 1.0), 1.0 + 0j)
    values = np.concatenate([level, phase.real, phase.imag])
    return FeatureVector(values, float(cutoff), int(keep.sum()), int(sample_rate))


def resample(x, rate_in, rate_out):
    if rate_in == rate_out:
        return x
    ratio = Fraction(int(rate_out), int(rate_in))
    return resample_poly(x, ratio.numerator, ratio.denominator, axis=-1)


def binaural_feature(left, right, sample_rate, config=FeatureConfig()):
    """Feature vector of a pair of ear signals already at ``sample_rate``."""
    left = resample(np.asarray(left, float), sample_rate, config.sample_rate)
    right = resample(np.asarray(right, float), sample_rate, config.sample_rate)
    spec_l = stft(left, config.sample_rate, config.window_ms, config.overlap)
    spec_r = stft(right, config.sample_rate, config.window_ms, config.overlap)
    return assemble_feature(ild(spec_l, spec_r), ipd(spec_l, spec_r), config.sample_rate,
                            config.cutoff, spec_l.window_length)


def scene_to_feature(rir, noise_duration=None, seed=0, config=FeatureConfig()):
    """Convolve seeded white Gaussian noise with both ears and extract features."""
    duration = config.noise_duration if noise_duration is None else noise_duration
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(int(round(duration * rir.sample_rate)))
    left = fftconvolve(noise, rir.left)
    right = fftconvolve(noise, rir.right)
    return binaural_feature(left, right, rir.sample_rate, config)


# -- persistence -------------------------------------------------------------

def layout_sidecar(config):
    return {
        "layout": ["ild", "ipd_real", "ipd_imag"],
        "cutoff": config.cutoff,
        "sample_rate": config.sample_rate,
        "window_length": config.window_length,
        "hop": config.hop,
        "n_bins": len(config.retained_bins()),
        "dimension": config.dimension,
    }


def write_features_csv(path, matrix, config):
    path = Path(path)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    np.savetxt(path, matrix, delimiter=",", fmt="%.9g")
    path.with_suffix(".json").write_text(json.dumps(layout_sidecar(config), indent=2))


def read_features_csv(path):
    path = Path(path)
    matrix = np.loadtxt(path, delimiter=",", ndmin=2)
    meta = json.loads(path.with_suffix(".json").read_text())
    if matrix.size and matrix.shape[1] != meta["dimension"]:
        raise ValueError(f"{path}: {matrix.shape[1]} columns, sidecar says {meta['dimension']}")
    return matrix, meta


def write_features_binary(path, matrix):
    """Header ``<4sIQQ`` (magic, version, N, D) then N*D little-endian float32."""
    matrix = np.asarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    n, d = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, n, d))
        fh.write(np.ascontiguousarray(matrix).tobytes())


def read_features_binary(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, n, d = _HEADER.unpack(head)
        if magic != BINARY_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != BINARY_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != n * d:
        raise ValueError(f"{path}: expected {n * d} values, found {data.size}")
    return data.reshape(n, d).astype(np.float32)
