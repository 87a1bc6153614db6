"""BRIR export/import: 2-channel 32-bit float WAV plus a JSON sidecar."""

import json
import os
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .render import BinauralRir


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def save_brir(rir, path):
    """Write ``rir`` to ``path`` (WAV) and its metadata to ``path`` with a .json suffix."""
    path = Path(path)
    data = np.ascontiguousarray(np.stack([rir.left, rir.right], axis=1).astype("<f4"))
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        wavfile.write(fh, int(rir.sample_rate), data)
    os.replace(tmp, path)
    meta = dict(rir.metadata, sample_rate=int(rir.sample_rate), n_samples=len(rir),
                format="float32 stereo, channel 0 = left")
    side = sidecar_path(path)
    tmp = side.with_name(side.name + ".tmp")
    tmp.write_text(json.dumps(meta, indent=2, sort_keys=True))
    os.replace(tmp, side)


def load_brir(path):
    path = Path(path)
    rate, data = wavfile.read(path)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"{path}: expected a 2-channel WAV, got shape {data.shape}")
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    return BinauralRir(data[:, 0].astype(float), data[:, 1].astype(float), int(rate), meta)
