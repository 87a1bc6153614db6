"""Source grids, material registries and annotated dataset generation."""

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .acoustics.room import ANCHOR_FREQUENCIES, InvalidSceneError, SourceSpec, SurfaceProfile
from .acoustics.simulate import SimConfig, simulate_brir
from .features import (FeatureConfig, layout_sidecar, read_features_binary,
                       scene_to_feature, write_features_binary)

PARAM_NAMES = ("azimuth", "elevation", "range", "absorption")
GRID_RANGES = (1.0, 1.3, 1.6, 1.9, 2.2, 2.5)
MAX_MATERIAL_STD = 0.07
_MATERIAL_COLUMNS = ["name", "a125", "a250", "a500", "a1000", "a2000", "a4000"]


class MaterialError(ValueError):
    pass


# -- direction grids ---------------------------------------------------------

@dataclass(frozen=True)
class DirectionGrid:
    azimuths: tuple
    elevations: tuple
    role: str

    def directions(self):
        """(azimuth, elevation) pairs, azimuth-major."""
        return [(float(a), float(e)) for a in self.azimuths for e in self.elevations]

    def __len__(self):
        return len(self.azimuths) * len(self.elevations)


def build_grid(role="train", n_azimuth=None, n_elevation=None):
    """Source direction grid.

    ``train``: 3 deg spacing over [-45, 45] x [-30, 30] (31 x 21).
    ``test``: 6 deg spacing shifted by 1.5 deg (15 x 10), disjoint from train.
    Passing ``n_azimuth``/``n_elevation`` gives an evenly spaced grid of that
    size over the same ranges instead.
    """
    if n_azimuth is not None or n_elevation is not None:
        return DirectionGrid(tuple(np.linspace(-45, 45, n_azimuth or 31)),
                             tuple(np.linspace(-30, 30, n_elevation or 21)), role)
    if role == "train":
        return DirectionGrid(tuple(np.linspace(-45.0, 45.0, 31)),
                             tuple(np.linspace(-30.0, 30.0, 21)), role)
    if role == "test":
        return DirectionGrid(tuple(-43.5 + 6.0 * np.arange(15)),
                             tuple(-28.5 + 6.0 * np.arange(10)), role)
    raise ValueError(f"unknown grid role {role!r}")


def training_absorptions():
    """The 21 flat wall absorptions 0, 0.05, ..., 1 used for training."""
    return [round(0.05 * i, 10) for i in range(21)]


# -- materials ---------------------------------------------------------------

@dataclass(frozen=True)
class MaterialProfile:
    name: str
    absorption: tuple

    @property
    def mean_absorption_above_500(self):
        return mean_above_500(self.absorption)

    @property
    def std_above_500(self):
        return float(np.std(_above_500(self.absorption)))


def _above_500(absorption):
    anchors = np.asarray(ANCHOR_FREQUENCIES)
    return np.asarray(absorption, dtype=float)[anchors >= 500.0]


def mean_above_500(absorption):
    return float(np.mean(_above_500(absorption)))


def flat_material(value):
    return MaterialProfile(f"flat {value:g}", (float(value),) * 6)


def default_materials_path():
    return resources.files("vsloc") / "data" / "materials.csv"


def default_surfaces_path():
    return resources.files("vsloc") / "data" / "surfaces.csv"


def load_materials(path=None, max_std=MAX_MATERIAL_STD):
    """Read a materials CSV (name,a125,...,a4000).

    Every profile must lie in [0, 1]; with ``max_std`` set, the standard
    deviation over the 500 Hz - 4 kHz anchors must stay below it so that the
    mean summarises the profile.
    """
    path = default_materials_path() if path is None else Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _MATERIAL_COLUMNS:
            raise MaterialError(f"{path}: header must be {','.join(_MATERIAL_COLUMNS)}, "
                                f"got {reader.fieldnames}")
        out = []
        for line, row in enumerate(reader, start=2):
            try:
                values = tuple(float(row[c]) for c in _MATERIAL_COLUMNS[1:])
            except (TypeError, ValueError):
                raise MaterialError(f"{path}:{line}: non-numeric absorption value") from None
            name = (row["name"] or "").strip()
            if not name:
                raise MaterialError(f"{path}:{line}: empty material name")
            if any(not 0.0 <= v <= 1.0 for v in values):
                raise MaterialError(f"{path}:{line}: {name!r} has values outside [0, 1]")
            material = MaterialProfile(name, values)
            if max_std is not None and material.std_above_500 >= max_std:
                raise MaterialError(
                    f"{path}:{line}: {name!r} varies too much above 500 Hz "
                    f"(std {material.std_above_500:.3f} >= {max_std})")
            out.append(material)
    names = [m.name for m in out]
    if len(set(names)) != len(names):
        raise MaterialError(f"{path}: duplicate material names")
    return out


def load_surfaces(path=None):
    """Floor/ceiling registry; the wall selection criterion does not apply."""
    return load_materials(default_surfaces_path() if path is None else path, max_std=None)


def find_material(name, materials=None):
    materials = load_materials() if materials is None else materials
    for m in materials:
        if m.name == name:
            return m
    raise MaterialError(f"material {name!r} not in registry; available: "
                        + ", ".join(m.name for m in materials))


# -- scenes ------------------------------------------------------------------

@dataclass(frozen=True)
class SceneParams:
    azimuth: float
    elevation: float
    range: float
    wall_absorption: tuple
    material: str = ""

    @property
    def mean_wall_absorption(self):
        return mean_above_500(self.wall_absorption)

    def vector(self):
        return np.array([self.azimuth, self.elevation, self.range, self.mean_wall_absorption])

    def to_dict(self):
        d = asdict(self)
        d["wall_absorption"] = list(self.wall_absorption)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["azimuth"]), float(d["elevation"]), float(d["range"]),
                   tuple(float(x) for x in d["wall_absorption"]), d.get("material", ""))


def scene_product(directions, ranges, materials):
    """Cartesian product, ordered material-major, then range, then direction."""
    scenes = []
    for m in materials:
        for r in ranges:
            for az, el in directions:
                scenes.append(SceneParams(float(az), float(el), float(r),
                                          tuple(m.absorption), m.name))
    return scenes


def scene_seed(master_seed, index, scene):
    """Seed derived from the master seed, the row index and the scene itself."""
    key = json.dumps([int(master_seed), int(index), scene.to_dict()], sort_keys=True)
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little") >> 1


def room_seed(master_seed):
    """Seed of the diffuse-field realization shared by all scenes of one room.

    The scattering objects of a room do not move with the source, so the
    fine structure of the diffuse field is drawn once per master seed.
    """
    key = json.dumps(["diffuse-field", int(master_seed)])
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little") >> 1


@dataclass(frozen=True)
class GenerationConfig:
    sim: SimConfig = SimConfig()
    features: FeatureConfig = FeatureConfig()
    frozen_diffuse: bool = True     # False: fresh ray set and tail noise per scene

    def to_dict(self):
        return {"simulation": asdict(self.sim), "features": asdict(self.features),
                "frozen_diffuse": self.frozen_diffuse}


def config_hash(room_template, head, config):
    payload = {
        "room": _room_dict(room_template),
        "head": {"variant": head.variant, "head_radius": head.head_radius,
                 "ear_azimuth": head.ear_azimuth, "interpolation": head.interpolation},
        "config": config.to_dict(),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _room_dict(room):
    return {
        "dims": [room.width, room.depth, room.height],
        "receiver_position": list(room.receiver_position),
        "receiver_yaw": room.receiver_yaw,
        "speed_of_sound": room.speed_of_sound,
        "surfaces": [{"absorption": list(s.absorption), "diffusion": list(s.diffusion)}
                     for s in room.surfaces],
    }


def scene_feature(scene, seed, room_template, head, config, diffuse_seed=None, backend=None):
    """Simulate one scene and return its float32 feature row."""
    walls = SurfaceProfile(scene.wall_absorption, room_template.surfaces[0].diffusion,
                           room_template.anchor_frequencies)
    room = room_template.with_walls(walls)
    source = SourceSpec(scene.azimuth, scene.elevation, scene.range)
    rir = simulate_brir(room, source, head, config.sim, seed=seed, backend=backend,
                        diffuse_seed=diffuse_seed)
    noise_seed = int(np.random.SeedSequence([seed, 1]).generate_state(1, dtype=np.uint64)[0])
    return scene_to_feature(rir, seed=noise_seed, config=config.features).values.astype(np.float32)


@dataclass
class AnnotatedDataset:
    features: np.ndarray          # (N, D) float32
    params: np.ndarray            # (N, 4) azimuth, elevation, range, mean absorption
    scenes: list                  # SceneParams per row
    seeds: list                   # per-row scene seed
    config_hash: str = ""
    master_seed: int = 0
    diffuse_seed: int = None      # shared diffuse realization, None if per scene
    errors: list = field(default_factory=list)
    feature_layout: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.features)

    def select(self, names):
        """Parameter columns for the given annotation names."""
        cols = [PARAM_NAMES.index(n) for n in names]
        return self.params[:, cols]


_WORKER = {}


def _init_worker(room_template, head, config, diffuse_seed):
    _WORKER.update(room=room_template, head=head, config=config, diffuse_seed=diffuse_seed)


def _work(item):
    index, scene, seed = item
    try:
        row = scene_feature(scene, seed, _WORKER["room"], _WORKER["head"], _WORKER["config"],
                            _WORKER["diffuse_seed"])
    except InvalidSceneError as exc:
        return index, None, str(exc)
    return index, row, None


def generate(scenes, room_template, head, config=GenerationConfig(), seed=0, jobs=1,
             progress=None):
    """Simulate every scene and extract its features.

    Scenes that place the source outside the room are reported in
    ``errors`` and skipped; row order always follows ``scenes``.
    """
    items = [(i, s, scene_seed(seed, i, s)) for i, s in enumerate(scenes)]
    diffuse = room_seed(seed) if config.frozen_diffuse else None
    _init_worker(room_template, head, config, diffuse)
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker,
                                 initargs=(room_template, head, config, diffuse)) as pool:
            results = list(pool.map(_work, items, chunksize=max(1, len(items) // (8 * jobs))))
    else:
        results = []
        for n, item in enumerate(items):
            results.append(_work(item))
            if progress:
                progress(n + 1, len(items))
    rows, kept, seeds, errors = [], [], [], []
    for (index, row, err), (_, scene, s) in zip(results, items):
        if err is not None:
            errors.append({"index": index, "scene": scene.to_dict(), "error": err})
            continue
        rows.append(row)
        kept.append(scene)
        seeds.append(s)
    dim = config.features.dimension
    features = np.array(rows, dtype=np.float32).reshape(len(rows), dim)
    params = np.array([s.vector() for s in kept]).reshape(len(kept), 4)
    return AnnotatedDataset(features, params, kept, seeds,
                            config_hash(room_template, head, config), int(seed), diffuse,
                            errors, layout_sidecar(config.features))


def regenerate_row(dataset, row, room_template, head, config=GenerationConfig()):
    """Recompute one row from its stored scene and seeds alone."""
    return scene_feature(dataset.scenes[row], dataset.seeds[row], room_template, head, config,
                         dataset.diffuse_seed)


# -- container ---------------------------------------------------------------

def _atomic_write(path, data):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, str):
        data = data.encode()
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save_dataset(dataset, directory, extra=None):
    """Write features.bin, params.csv, provenance.json, errors.json, manifest.json.

    The manifest is written last, so a directory without one is incomplete.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest_path = directory / "manifest.json"
    if manifest_path.exists():
        manifest_path.unlink()
    tmp = directory / "features.bin.tmp"
    write_features_binary(tmp, dataset.features)
    os.replace(tmp, directory / "features.bin")
    _atomic_write(directory / "features.json", json.dumps(dataset.feature_layout, indent=2))
    lines = [",".join(PARAM_NAMES)]
    lines += [",".join(repr(float(v)) for v in row) for row in dataset.params]
    _atomic_write(directory / "params.csv", "\n".join(lines) + "\n")
    provenance = [{"row": i, "seed": s, "scene": sc.to_dict()}
                  for i, (s, sc) in enumerate(zip(dataset.seeds, dataset.scenes))]
    _atomic_write(directory / "provenance.json", json.dumps(provenance, indent=1))
    _atomic_write(directory / "errors.json", json.dumps(dataset.errors, indent=1))
    manifest = {
        "format": "vsloc-dataset", "tool_version": __version__,
        "config_hash": dataset.config_hash, "master_seed": dataset.master_seed,
        "diffuse_seed": dataset.diffuse_seed,
        "n_rows": len(dataset), "dimension": int(dataset.features.shape[1]),
        "n_errors": len(dataset.errors), "param_names": list(PARAM_NAMES),
        "files": ["features.bin", "features.json", "params.csv", "provenance.json",
                  "errors.json"],
    }
    if extra:
        manifest.update(extra)
    _atomic_write(manifest_path, json.dumps(manifest, indent=2, sort_keys=True))


def load_dataset(directory):
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{directory} has no manifest.json (incomplete dataset?)")
    manifest = json.loads(manifest_path.read_text())
    features = read_features_binary(directory / "features.bin")
    with open(directory / "params.csv") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != PARAM_NAMES:
            raise ValueError(f"{directory}/params.csv: unexpected header {header}")
        params = np.loadtxt(fh, delimiter=",", ndmin=2).reshape(-1, len(PARAM_NAMES))
    provenance = json.loads((directory / "provenance.json").read_text())
    if not (len(features) == len(params) == len(provenance) == manifest["n_rows"]):
        raise ValueError(f"{directory}: row counts disagree between files")
    return AnnotatedDataset(
        features, params, [SceneParams.from_dict(p["scene"]) for p in provenance],
        [int(p["seed"]) for p in provenance], manifest["config_hash"],
        int(manifest["master_seed"]), manifest.get("diffuse_seed"),
        json.loads((directory / "errors.json").read_text()),
        json.loads((directory / "features.json").read_text()))
