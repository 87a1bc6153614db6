"""Schema-strict TOML configuration.

Every section is optional; missing keys take the library defaults and unknown
keys are rejected. Units are meters, degrees, seconds and Hz.

::

    [room]
    width = 6.0
    depth = 5.0
    height = 3.3
    receiver_position = [2.0, 2.5, 1.6]
    receiver_yaw = 0.0
    speed_of_sound = 343.0
    walls = 0.5                 # flat value, 6 anchor values or a material name
    floor = "thin carpet"       # 6 values or a name from the surface registry
    ceiling = "gypsum board"
    diffusion = [0.003, 0.004, 0.045, 0.077, 0.210, 0.431]   # or a scalar
    anchor_frequencies = [125, 250, 500, 1000, 2000, 4000]

    [source]
    azimuth = 30.0
    elevation = 0.0
    range = 1.5

    [head]
    variant = "sphere"          # or "measured" together with hrir_dir
    head_radius = 0.0875
    ear_azimuth = 90.0
    hrir_dir = "path/to/hrirs"
    hrir_format = "vsloc"       # or "mit-kemar"
    interpolation = "nearest"   # or "bilinear"

    [simulation]                # SimConfig fields
    [features]                  # FeatureConfig fields
    [gllim]                     # K, annotation and EmConfig fields

    [dataset]
    directions = "train"        # "train", "test", "desk" or {azimuths=[..], elevations=[..]}
    ranges = [1.0, 1.6, 2.5]
    absorptions = [0.0, 0.5, 1.0]     # flat wall profiles
    materials = ["Rockwool backing behind plaster"]   # or "all"
    materials_file = "materials.csv"
    frozen_diffuse = true
"""

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .acoustics.room import (ANCHOR_FREQUENCIES, FURNISHED_DIFFUSION, RoomSpec, SourceSpec,
                             SurfaceProfile)
from .acoustics.simulate import SimConfig
from .binaural import HeadModel, load_hrir_set, load_mit_kemar
from .dataset import (GenerationConfig, PARAM_NAMES, build_grid, find_material,
                      flat_material, load_materials, load_surfaces)
from .features import FeatureConfig
from .gllim import EmConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "room": {"width", "depth", "height", "receiver_position", "receiver_yaw",
             "speed_of_sound", "walls", "floor", "ceiling", "diffusion",
             "anchor_frequencies"},
    "source": {"azimuth", "elevation", "range"},
    "head": {"variant", "head_radius", "ear_azimuth", "hrir_dir", "hrir_format",
             "interpolation"},
    "simulation": {f.name for f in fields(SimConfig)},
    "features": {f.name for f in fields(FeatureConfig)},
    "gllim": {"K", "annotation"} | {f.name for f in fields(EmConfig)},
    "dataset": {"directions", "ranges", "absorptions", "materials", "materials_file",
                "frozen_diffuse"},
}


@dataclass
class Config:
    room: RoomSpec = field(default_factory=RoomSpec)
    source: SourceSpec = None
    head: HeadModel = field(default_factory=HeadModel)
    sim: SimConfig = SimConfig()
    features: FeatureConfig = FeatureConfig()
    K: int = 25
    annotation: tuple = PARAM_NAMES
    em: EmConfig = EmConfig()
    dataset: dict = field(default_factory=dict)
    sections: frozenset = frozenset()

    @property
    def generation(self):
        return GenerationConfig(self.sim, self.features,
                                bool(self.dataset.get("frozen_diffuse", True)))


def load_config(path=None):
    """Parse and validate a config file; ``None`` gives the defaults."""
    if path is None:
        return parse_config({})
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, base=path.parent)


def parse_config(raw, base=Path(".")):
    for name, value in raw.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]; expected one of "
                              + ", ".join(sorted(_SECTIONS)))
        if not isinstance(value, dict):
            raise ConfigError(f"[{name}] must be a table")
        extra = set(value) - _SECTIONS[name]
        if extra:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")
    cfg = Config(sections=frozenset(raw))
    try:
        cfg.sim = SimConfig(**raw.get("simulation", {}))
        cfg.features = FeatureConfig(**raw.get("features", {}))
        cfg.room = _parse_room(raw.get("room", {}))
        if "source" in raw:
            src = raw["source"]
            missing = {"azimuth", "elevation", "range"} - set(src)
            if missing:
                raise ConfigError(f"[source] is missing {', '.join(sorted(missing))}")
            cfg.source = SourceSpec(float(src["azimuth"]), float(src["elevation"]),
                                    float(src["range"]))
        cfg.head = _parse_head(raw.get("head", {}), base)
        g = dict(raw.get("gllim", {}))
        cfg.K = int(g.pop("K", cfg.K))
        annotation = tuple(g.pop("annotation", cfg.annotation))
        bad = [a for a in annotation if a not in PARAM_NAMES]
        if bad or not annotation:
            raise ConfigError(f"annotation entries must be among {PARAM_NAMES}, got {bad}")
        cfg.annotation = tuple(n for n in PARAM_NAMES if n in annotation)
        cfg.em = EmConfig(**g)
        cfg.dataset = dict(raw.get("dataset", {}))
        if "materials_file" in cfg.dataset:
            cfg.dataset["materials_file"] = str(base / cfg.dataset["materials_file"])
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _profile(value, what, registry):
    if isinstance(value, str):
        return find_material(value, registry).absorption
    if isinstance(value, (int, float)):
        return (float(value),) * len(ANCHOR_FREQUENCIES)
    if isinstance(value, list):
        return tuple(float(v) for v in value)
    raise ConfigError(f"{what} must be a number, a list of anchor values or a material name")


def _parse_room(r):
    registry = load_materials() + load_surfaces()
    anchors = tuple(float(f) for f in r.get("anchor_frequencies", ANCHOR_FREQUENCIES))
    diffusion = r.get("diffusion", list(FURNISHED_DIFFUSION))
    if isinstance(diffusion, bool):
        diffusion = list(FURNISHED_DIFFUSION) if diffusion else 0.0
    diff = _profile(diffusion, "room.diffusion", registry)
    if len(diff) == 6 and len(anchors) != 6 and np.ndim(diffusion) == 0:
        diff = (diff[0],) * len(anchors)
    walls = SurfaceProfile(_profile(r.get("walls", 0.5), "room.walls", registry), diff, anchors)
    floor = SurfaceProfile(_profile(r.get("floor", "thin carpet"), "room.floor", registry),
                           diff, anchors)
    ceiling = SurfaceProfile(_profile(r.get("ceiling", "gypsum board"), "room.ceiling",
                                      registry), diff, anchors)
    kwargs = {k: r[k] for k in ("width", "depth", "height", "receiver_yaw", "speed_of_sound")
              if k in r}
    if "receiver_position" in r:
        kwargs["receiver_position"] = tuple(r["receiver_position"])
    return RoomSpec(surfaces=(walls, walls, walls, walls, floor, ceiling), **kwargs)


def _parse_head(h, base):
    h = dict(h)
    variant = h.get("variant", "sphere")
    interpolation = h.get("interpolation", "nearest")
    if variant == "measured":
        if "hrir_dir" not in h:
            raise ConfigError("[head] variant 'measured' needs hrir_dir")
        directory = base / h["hrir_dir"]
        fmt = h.get("hrir_format", "vsloc")
        if fmt == "vsloc":
            hrir = load_hrir_set(directory)
        elif fmt == "mit-kemar":
            hrir = load_mit_kemar(directory)
        else:
            raise ConfigError(f"unknown hrir_format {fmt!r}")
        return HeadModel.measured(hrir, interpolation)
    kwargs = {k: float(h[k]) for k in ("head_radius", "ear_azimuth") if k in h}
    return HeadModel(variant=variant, interpolation=interpolation, **kwargs)


def dataset_scenes_spec(cfg):
    """Resolve the [dataset] section into (directions, ranges, materials)."""
    d = cfg.dataset
    directions = d.get("directions", "train")
    if isinstance(directions, str):
        if directions == "desk":
            from .experiments import desk_train_directions
            directions = desk_train_directions()
        elif directions in ("train", "test"):
            directions = build_grid(directions).directions()
        else:
            raise ConfigError(f"unknown direction grid {directions!r}")
    elif isinstance(directions, dict):
        if set(directions) != {"azimuths", "elevations"}:
            raise ConfigError("dataset.directions table needs exactly azimuths and elevations")
        directions = [(float(a), float(e)) for a in directions["azimuths"]
                      for e in directions["elevations"]]
    else:
        raise ConfigError("dataset.directions must be a grid name or a table")
    ranges = [float(r) for r in d.get("ranges", [1.0])]
    materials = [flat_material(float(a)) for a in d.get("absorptions", [])]
    names = d.get("materials", [])
    if names:
        registry = load_materials(d.get("materials_file"))
        materials += registry if names == "all" else [find_material(n, registry) for n in names]
    if not materials:
        raise ConfigError("[dataset] needs absorptions and/or materials")
    return directions, ranges, materials
