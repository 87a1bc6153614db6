"""Canned localization experiments and error reports.

Each preset describes a training selection, a test selection and the subset
of source parameters annotated for training. Two scales exist: ``paper`` (full scale) uses
the full grids (82,026 training scenes) and ``desk`` a reduced version that
runs in minutes on one core.
"""

import hashlib
import io
import json
import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import gllim
from .acoustics.room import default_room
from .acoustics.simulate import SimConfig
from .binaural import HeadModel
from .dataset import (GRID_RANGES, PARAM_NAMES, GenerationConfig, build_grid, find_material,
                      flat_material, generate, load_dataset, load_materials, save_dataset,
                      scene_product, training_absorptions)
from .features import FeatureConfig
from .gllim import EmConfig

log = logging.getLogger(__name__)

DESK_RANGES = (1.0, 1.6, 2.5)
DESK_ABSORPTIONS = (0.0, 0.25, 0.5, 0.75, 1.0)
SINGLE_TRAIN_MATERIAL = "Rockwool backing behind plaster"
CROSS_TEST_MATERIAL = "Rockwool core fabric panel (8pcf)"
ABSORPTION_BUCKETS = np.linspace(0.0, 1.0, 11)
UNITS = {"azimuth": "deg", "elevation": "deg", "range": "cm", "absorption": ""}
# Reporting scale from stored units (range is stored in meters).
_REPORT_SCALE = {"azimuth": 1.0, "elevation": 1.0, "range": 100.0, "absorption": 1.0}

DISCLAIMER = ("Reference values were obtained with measured KEMAR HRTFs, 82,026 training "
              "scenes and K=25; desk-scale runs use a spherical head model and reduced "
              "grids, so only orders of magnitude and directions of effect are comparable.")

# Reference mean +- std absolute errors (deg, deg, cm, unitless).
REFERENCE = {
    "single-config": {"azimuth": (1.67, 1.22), "elevation": (8.78, 7.08)},
    "cross-config": {"azimuth": (1.99, 1.42), "elevation": (15.79, 12.39)},
    "full": {"azimuth": (1.78, 1.34), "elevation": (7.87, 6.45), "range": (54.2, 29.65),
             "absorption": (0.18, 0.14)},
    "full-no-diffusion": {"azimuth": (2.16, 1.62), "elevation": (11.3, 7.95),
                          "range": (56.8, 34.3), "absorption": (0.80, 0.44)},
    "direction-only": {"azimuth": (1.72, 1.43), "elevation": (8.81, 7.81)},
    "dir+absorption": {"azimuth": (2.00, 1.51), "elevation": (8.45, 6.86),
                       "absorption": (0.22, 0.17)},
    "dir+range": {"azimuth": (1.91, 1.52), "elevation": (9.44, 7.55), "range": (58.5, 32.4)},
}
PRESETS = tuple(REFERENCE)


class ExperimentError(ValueError):
    pass


# -- scene selections ------------------------------------------------------------

def desk_train_directions():
    """9 x 7 directions spanning the training ranges."""
    return [(float(a), float(e)) for a in np.linspace(-45.0, 45.0, 9)
            for e in np.linspace(-30.0, 30.0, 7)]


def desk_test_directions():
    """Every third test azimuth and every other test elevation (5 x 5)."""
    grid = build_grid("test")
    return [(float(a), float(e)) for a in grid.azimuths[::3] for e in grid.elevations[::2]]


@dataclass(frozen=True)
class SceneSelection:
    directions: tuple
    ranges: tuple
    materials: tuple       # MaterialProfile entries
    diffusion: bool = True

    def scenes(self):
        return scene_product(self.directions, self.ranges, self.materials)

    def __len__(self):
        return len(self.directions) * len(self.ranges) * len(self.materials)

    def key(self):
        payload = [list(map(list, self.directions)), list(self.ranges),
                   [[m.name, list(m.absorption)] for m in self.materials], self.diffusion]
        return hashlib.sha256(json.dumps(payload).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    train: SceneSelection
    test: SceneSelection
    annotation: tuple
    K: int
    sim: SimConfig
    features: FeatureConfig = FeatureConfig()
    em: EmConfig = None
    seed: int = 0

    def __post_init__(self):
        if len(self.train) == 0 or len(self.test) == 0:
            raise ExperimentError(f"{self.name}: empty train or test selection")
        train = {(s.azimuth, s.elevation, s.range, s.wall_absorption)
                 for s in self.train.scenes()}
        if any((s.azimuth, s.elevation, s.range, s.wall_absorption) in train
               for s in self.test.scenes()):
            raise ExperimentError(f"{self.name}: train and test scenes overlap")

    def generation(self, diffusion):
        return GenerationConfig(replace(self.sim, diffusion=diffusion), self.features)


def preset(name, scale="desk", seed=0, materials=None):
    """Build the named experiment at ``desk`` or ``paper`` scale."""
    if name not in REFERENCE:
        raise ExperimentError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    if scale not in ("desk", "paper"):
        raise ExperimentError(f"unknown scale {scale!r}; use desk or paper")
    registry = load_materials(materials)
    desk = scale == "desk"
    sim = SimConfig(duration=0.2, n_rays=2000) if desk else SimConfig()
    K = 8 if desk else 25
    if name in ("single-config", "cross-config"):
        train_mat = find_material(SINGLE_TRAIN_MATERIAL, registry)
        train = SceneSelection(tuple(build_grid("train").directions()), (1.0,), (train_mat,))
        if name == "single-config":
            test = SceneSelection(tuple(build_grid("test").directions()), (1.0,), (train_mat,))
        else:
            test = SceneSelection(tuple(build_grid("test").directions()), (2.5,),
                                  (find_material(CROSS_TEST_MATERIAL, registry),))
        return ExperimentSpec(name, train, test, ("azimuth", "elevation"), K, sim, seed=seed)
    diffusion = name != "full-no-diffusion"
    if desk:
        train = SceneSelection(tuple(desk_train_directions()), DESK_RANGES,
                               tuple(flat_material(a) for a in DESK_ABSORPTIONS), diffusion)
        test = SceneSelection(tuple(desk_test_directions()), DESK_RANGES,
                              tuple(registry[::3]), diffusion)
    else:
        train = SceneSelection(tuple(build_grid("train").directions()), GRID_RANGES,
                               tuple(flat_material(a) for a in training_absorptions()),
                               diffusion)
        test = SceneSelection(tuple(build_grid("test").directions()), GRID_RANGES,
                              tuple(registry), diffusion)
    annotation = {
        "direction-only": ("azimuth", "elevation"),
        "dir+absorption": ("azimuth", "elevation", "absorption"),
        "dir+range": ("azimuth", "elevation", "range"),
    }.get(name, PARAM_NAMES)
    return ExperimentSpec(name, train, test, annotation, K, sim, seed=seed)


# -- error reports -----------------------------------------------------------------

@dataclass
class ErrorReport:
    """Absolute errors per test row for each estimated parameter."""

    targets: tuple
    truth: np.ndarray        # (N, 4) all stored parameters
    predicted: np.ndarray    # (N, len(targets))

    def errors(self):
        cols = [PARAM_NAMES.index(t) for t in self.targets]
        scale = np.array([_REPORT_SCALE[t] for t in self.targets])
        return np.abs(self.predicted - self.truth[:, cols]) * scale

    def baseline_errors(self):
        """Errors of always predicting the test-set mean."""
        cols = [PARAM_NAMES.index(t) for t in self.targets]
        truth = self.truth[:, cols]
        scale = np.array([_REPORT_SCALE[t] for t in self.targets])
        return np.abs(truth - truth.mean(axis=0)) * scale

    def summary(self):
        err, base = self.errors(), self.baseline_errors()
        return {t: {"mean": float(err[:, i].mean()), "std": float(err[:, i].std()),
                    "baseline_mean": float(base[:, i].mean()), "n": len(err)}
                for i, t in enumerate(self.targets)}

    def _table(self, header, rows):
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for row in rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def summary_csv(self):
        rows = [(t, UNITS[t], s["mean"], s["std"], s["baseline_mean"], s["n"])
                for t, s in self.summary().items()]
        return self._table(("target", "unit", "mean", "std", "baseline_mean", "n"), rows)

    def per_sample_csv(self):
        err = self.errors()
        header = ["row"] + list(PARAM_NAMES)
        for t in self.targets:
            header += [f"{t}_pred", f"{t}_error"]
        rows = []
        for n in range(len(self.truth)):
            row = [n] + list(self.truth[n])
            for i in range(len(self.targets)):
                row += [self.predicted[n, i], err[n, i]]
            rows.append(row)
        return self._table(header, rows)

    def by_absorption_csv(self):
        err = self.errors()
        a = self.truth[:, 3]
        idx = np.clip(np.searchsorted(ABSORPTION_BUCKETS, a, side="right") - 1, 0,
                      len(ABSORPTION_BUCKETS) - 2)
        rows = []
        for b in range(len(ABSORPTION_BUCKETS) - 1):
            sel = idx == b
            means = [float(err[sel, i].mean()) if sel.any() else float("nan")
                     for i in range(len(self.targets))]
            rows.append([ABSORPTION_BUCKETS[b], ABSORPTION_BUCKETS[b + 1], int(sel.sum())]
                        + means)
        header = ["absorption_low", "absorption_high", "n"] + [f"{t}_mean_error"
                                                              for t in self.targets]
        return self._table(header, rows)

    def by_range_csv(self):
        err = self.errors()
        r = self.truth[:, 2]
        rows = []
        for value in np.unique(r):
            sel = r == value
            rows.append([value, int(sel.sum())]
                        + [float(err[sel, i].mean()) for i in range(len(self.targets))])
        header = ["range_m", "n"] + [f"{t}_mean_error" for t in self.targets]
        return self._table(header, rows)

    def write(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, text in (("summary.csv", self.summary_csv()),
                           ("per_sample.csv", self.per_sample_csv()),
                           ("by_absorption.csv", self.by_absorption_csv()),
                           ("by_range.csv", self.by_range_csv())):
            _atomic_text(directory / name, text)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def _atomic_text(path, text):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def evaluate(model, dataset):
    """Run inverse prediction on every row of ``dataset``."""
    if dataset.features.shape[1] != model.D:
        raise ExperimentError(f"model expects D={model.D}, dataset has "
                              f"D={dataset.features.shape[1]}")
    targets = tuple(model.names) if model.names else PARAM_NAMES[:model.L]
    if len(dataset) == 0:
        return ErrorReport(targets, np.zeros((0, 4)), np.zeros((0, len(targets))))
    u_hat, _ = gllim.inverse_predict(model, dataset.features.astype(float))
    return ErrorReport(targets, dataset.params, np.atleast_2d(u_hat))


def training_set(dataset, annotation):
    return gllim.TrainingSet(dataset.features.astype(float), dataset.select(annotation),
                             tuple(annotation))


def write_ll_trace(model, path):
    lines = ["iteration,log_likelihood"]
    lines += [f"{i},{v!r}" for i, v in enumerate(model.log_likelihood_trace)]
    _atomic_text(Path(path), "\n".join(lines) + "\n")


# -- running ---------------------------------------------------------------------

def _dataset_for(selection, gen, seed, cache_dir, jobs, head, room):
    key = hashlib.sha256(json.dumps([selection.key(), gen.to_dict(), seed])
                         .encode()).hexdigest()[:16]
    directory = Path(cache_dir) / key
    if (directory / "manifest.json").exists():
        return load_dataset(directory), directory
    data = generate(selection.scenes(), room, head, gen, seed=seed, jobs=jobs)
    save_dataset(data, directory)
    # reload so that the float32 round trip is identical to cached runs
    return load_dataset(directory), directory


def run_experiment(spec, out_dir, jobs=1, head=None, cache_dir=None):
    """Generate (or reuse) datasets, fit, evaluate and write the report.

    Returns the ErrorReport; files land in ``out_dir/<name>/``.
    """
    head = HeadModel() if head is None else head
    out = Path(out_dir) / spec.name
    out.mkdir(parents=True, exist_ok=True)
    cache_dir = Path(out_dir) / "datasets" if cache_dir is None else Path(cache_dir)
    room = default_room(0.5, diffusion=True)
    train, _ = _dataset_for(spec.train, spec.generation(spec.train.diffusion), spec.seed,
                            cache_dir, jobs, head, room)
    test, _ = _dataset_for(spec.test, spec.generation(spec.test.diffusion), spec.seed,
                           cache_dir, jobs, head, room)
    em = spec.em or gllim.EmConfig()
    model = gllim.fit(training_set(train, spec.annotation), K=spec.K, config=em, seed=spec.seed)
    gllim.save_model(model, out / "model.vslg")
    write_ll_trace(model, out / "ll_trace.csv")
    report = evaluate(model, test)
    report.write(out / "report")
    return report


def comparison_rows(name, report):
    rows = []
    summary = report.summary()
    for target, (ref_mean, ref_std) in REFERENCE[name].items():
        s = summary.get(target)
        rows.append([name, target, UNITS[target],
                     s["mean"] if s else float("nan"), s["std"] if s else float("nan"),
                     ref_mean, ref_std])
    return rows


def write_comparison(rows, path):
    header = "preset,target,unit,mean,std,reference_mean,reference_std"
    lines = ["# " + DISCLAIMER, header]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _atomic_text(Path(path), "\n".join(lines) + "\n")


def format_comparison(rows):
    out = [f"{'preset':<18} {'target':<11} {'this run':>18} {'reference':>18}"]
    for name, target, unit, mean, std, rmean, rstd in rows:
        out.append(f"{name:<18} {target:<11} {mean:>9.3f} ± {std:<6.3f} "
                   f"{rmean:>9.2f} ± {rstd:<6.2f} {unit}")
    out.append(DISCLAIMER)
    return "\n".join(out)
