import numpy as np
import pytest

from vsloc.acoustics.room import FURNISHED_DIFFUSION
from vsloc.binaural import HrirSet, save_hrir_set
from vsloc.config import ConfigError, dataset_scenes_spec, load_config, parse_config


def write(tmp_path, text):
    path = tmp_path / "c.toml"
    path.write_text(text)
    return path


def test_defaults():
    cfg = load_config(None)
    assert cfg.K == 25 and cfg.source is None
    assert cfg.features.dimension == 1443
    assert cfg.room.surfaces[0].absorption == (0.5,) * 6
    assert cfg.room.surfaces[5].absorption == (0.45, 0.55, 0.60, 0.90, 0.86, 0.75)
    assert cfg.room.surfaces[0].diffusion == tuple(FURNISHED_DIFFUSION)


def test_full_file(tmp_path):
    cfg = load_config(write(tmp_path, """
[room]
width = 7.0
walls = "Rockwool backing behind plaster"
diffusion = 0.1
[source]
azimuth = 20
elevation = -5
range = 1.2
[simulation]
duration = 0.25
[features]
sample_rate = 8000
[gllim]
K = 4
annotation = ["elevation", "azimuth"]
max_iter = 50
[dataset]
directions = {azimuths = [0, 10], elevations = [0]}
ranges = [1.0]
absorptions = [0.2, 0.4]
"""))
    assert cfg.room.width == 7.0
    assert cfg.room.surfaces[0].diffusion == (0.1,) * 6
    assert cfg.source.azimuth == 20.0
    assert cfg.sim.duration == 0.25 and cfg.features.dimension == 675
    assert cfg.K == 4 and cfg.annotation == ("azimuth", "elevation")
    assert cfg.em.max_iter == 50
    directions, ranges, materials = dataset_scenes_spec(cfg)
    assert directions == [(0.0, 0.0), (10.0, 0.0)] and len(materials) == 2


@pytest.mark.parametrize("text, needle", [
    ("[rooom]\nwidth = 3\n", "unknown section"),
    ("[room]\nwidht = 3\n", "unknown key"),
    ("[simulation]\nrays = 3\n", "unknown key"),
    ("[room]\nwalls = \"no such material\"\n", "not in registry"),
    ("[source]\nazimuth = 3\n", "missing"),
    ("[gllim]\nannotation = [\"colour\"]\n", "annotation"),
    ("[head]\nvariant = \"measured\"\n", "hrir_dir"),
    ("room = 3\n", "table"),
    ("[room\n", "c.toml"),
    ("[dataset]\ndirections = \"diagonal\"\n", "direction grid"),
])
def test_rejected(tmp_path, text, needle):
    with pytest.raises(ConfigError, match=needle):
        cfg = load_config(write(tmp_path, text))
        dataset_scenes_spec(cfg)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")


def test_dataset_needs_materials():
    with pytest.raises(ConfigError):
        dataset_scenes_spec(parse_config({"dataset": {"ranges": [1.0]}}))


def test_named_dataset_materials():
    cfg = parse_config({"dataset": {"directions": "test", "materials": "all"}})
    directions, ranges, materials = dataset_scenes_spec(cfg)
    assert len(directions) == 150 and len(materials) == 18 and ranges == [1.0]


def test_measured_head_from_directory(tmp_path, rng):
    dirs = np.array([[0.0, 0.0], [30.0, 0.0]])
    hrir = HrirSet(dirs, rng.standard_normal((2, 8)).astype(np.float32),
                   rng.standard_normal((2, 8)).astype(np.float32), 16000)
    save_hrir_set(hrir, tmp_path / "hrirs")
    cfg = load_config(write(tmp_path, '[head]\nvariant = "measured"\nhrir_dir = "hrirs"\n'))
    assert cfg.head.variant == "measured" and cfg.head.hrir is not None
