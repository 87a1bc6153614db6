"""Acceptance suite: one test and one PASS/FAIL line per criterion.

The desk-scale experiment runs are shared between criteria through
module-scoped fixtures; the whole module takes roughly ten minutes on one core.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from oracles import allen_berkley_images, naive_gllim_log_likelihood
from test_features import free_field_rir
from test_gllim import affine_set, three_component
from test_images import random_room
from vsloc import gllim
from vsloc.acoustics import (RoomSpec, SimConfig, SourceSpec, SurfaceProfile, default_room,
                             estimate_rt60, image_set, rain_diffusion, sabine_rt60,
                             simulate_brir)
from vsloc.acoustics.rain import EMITTED_ENERGY
from vsloc.binaural import HeadModel
from vsloc.cli import main
from vsloc.dataset import build_grid, find_material, load_materials
from vsloc.experiments import SINGLE_TRAIN_MATERIAL, preset, run_experiment
from vsloc.features import FeatureConfig, scene_to_feature

RESULTS = {}
ABLATION_SEEDS = range(5)


def record(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


# -- shared experiment runs ---------------------------------------------------------

@pytest.fixture(scope="module")
def ablation_runs(tmp_path_factory):
    """full / full-no-diffusion / direction-only at desk scale for five master seeds."""
    root = tmp_path_factory.mktemp("ablation")
    runs = {}
    for seed in ABLATION_SEEDS:
        out = root / f"seed{seed}"
        for name in ("full", "full-no-diffusion", "direction-only"):
            runs[seed, name] = run_experiment(preset(name, "desk", seed), out).summary()
    return runs


@pytest.fixture(scope="module")
def reproduce_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("reproduce")
    presets = ["single-config", "cross-config"]
    dirs, codes = {}, {}
    t0 = time.perf_counter()
    for label, jobs in (("a", 1), ("b", 1), ("c", 8)):
        dirs[label] = root / label
        codes[label] = main(["reproduce", *presets, "-o", str(dirs[label]), "--seed", "0",
                             "--jobs", str(jobs)])
        if label == "a":
            first_run = time.perf_counter() - t0
    return dirs, codes, first_run


def report_files(directory):
    return {p.relative_to(directory): p.read_bytes() for p in sorted(directory.rglob("*"))
            if p.is_file() and "datasets" not in p.parts}


def summary_means(path):
    lines = [l for l in Path(path).read_text().splitlines()[1:] if l]
    return {l.split(",")[0]: (float(l.split(",")[2]), float(l.split(",")[4])) for l in lines}


# -- criteria ------------------------------------------------------------------------

def test_criterion_01_image_source_oracle():
    t0 = time.perf_counter()
    ok, worst = True, 0.0
    for seed in range(20):
        room, src = random_room(np.random.default_rng(100 + seed))
        reflect = np.sqrt(1 - room.absorption_matrix())
        pos, orders, _ = allen_berkley_images(room.dims, src, room.receiver_position, reflect, 4)
        images = image_set(room, src, max_order=4)
        if len(images) != len(pos):
            ok = False
            continue
        key = np.lexsort(images.positions.T[::-1])
        worst = max(worst, float(np.abs(images.positions[key] - pos).max()))
        ok &= bool(np.array_equal(images.orders[key], orders))
    elapsed = time.perf_counter() - t0
    record(1, ok and worst < 1e-9 and elapsed < 10,
           f"20 scenes, order 4, max position error {worst:.1e} m, {elapsed:.1f} s")


def test_criterion_02_energy_properties():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        dims = rng.uniform(2.5, 8.0, 3)
        surf = SurfaceProfile(tuple(rng.uniform(0, 1, 6)), tuple(rng.uniform(0, 1, 6)))
        room = RoomSpec(*dims, receiver_position=tuple(rng.uniform(0.3, 0.7, 3) * dims),
                        surfaces=(surf,) * 6)
        hist = rain_diffusion(room, rng.uniform(0.1, 0.9, 3) * dims, n_rays=200,
                              max_time=0.3, seed=seed)
        worst = max(worst, hist.bins.sum(axis=1).max() / EMITTED_ENERGY)
    cfg = SimConfig(duration=0.2, n_rays=500)
    monotone = True
    for seed in range(5):
        energies = [simulate_brir(default_room(float(a)), SourceSpec(15, 5, 1.5), HeadModel(),
                                  cfg, seed=seed, diffuse_seed=seed).energy()
                    for a in np.linspace(0.0, 1.0, 10)]
        monotone &= all(e1 >= e2 for e1, e2 in zip(energies, energies[1:]))
    elapsed = time.perf_counter() - t0
    record(2, worst <= 1 + 1e-12 and monotone and elapsed < 120,
           f"max deposited/emitted {worst:.3f} over 100 scenes, RIR energy monotone "
           f"{monotone} (10 steps x 5 seeds), {elapsed:.1f} s")


def test_criterion_03_rt60():
    material = find_material(SINGLE_TRAIN_MATERIAL, load_materials())
    room = default_room(0.5).with_walls(SurfaceProfile(material.absorption,
                                                       default_room().surfaces[0].diffusion))
    cfg = SimConfig(duration=1.0, n_rays=2000)
    t60 = estimate_rt60(simulate_brir(room, SourceSpec(0, 0, 1.5), HeadModel(), cfg, seed=0))
    half = default_room(0.5)
    t60_half = estimate_rt60(simulate_brir(half, SourceSpec(0, 0, 1.5), HeadModel(), cfg, seed=0))
    ratio = t60_half / sabine_rt60(half)
    record(3, 0.09 <= t60 <= 1.0 and 0.5 <= ratio <= 2.0,
           f"RT60 {t60:.3f} s with mean-{material.mean_absorption_above_500:.2f} walls; "
           f"alpha=0.5 RT60/Sabine = {ratio:.2f}")


def test_criterion_04_feature_contract():
    cfg = FeatureConfig()
    n_bins, dim = len(cfg.retained_bins()), cfg.dimension
    antisym = []
    for az in (10.0, 25.0, 45.0, 70.0):
        plus = scene_to_feature(free_field_rir(az), seed=0).ild
        minus = scene_to_feature(free_field_rir(-az), seed=0).ild
        antisym.append(np.mean(np.abs(plus + minus)))
    rir = simulate_brir(default_room(0.3), SourceSpec(20, 10, 1.6), HeadModel(),
                        SimConfig(duration=0.2, n_rays=1000), seed=0)
    modulus = np.abs(np.abs(scene_to_feature(rir, seed=0).ipd) - 1).max()
    record(4, n_bins == 481 and dim == 1443 and max(antisym) < 0.5 and modulus < 1e-6,
           f"F'={n_bins}, D={dim}, ILD antisymmetry {max(antisym):.2e} dB, "
           f"IPD modulus error {modulus:.1e}")


def test_criterion_05_gllim_correctness():
    t0 = time.perf_counter()
    monotone = True
    data, A, b = affine_set(200, 6, 2, seed=1)
    m1 = gllim.fit(data, K=1)
    p = m1.original_parameters()
    rel = max(np.abs(p["A"][0] - A).max() / np.abs(A).max(),
              np.abs(p["b"][0] - b).max() / np.abs(b).max())
    monotone &= bool(np.all(np.diff(m1.log_likelihood_trace) >= -1e-8))
    train, _ = three_component(900, 0)
    m3 = gllim.fit(train, K=3)
    test, _ = three_component(300, 99)
    u_hat, _ = gllim.inverse_predict(m3, test.y)
    held_out = float(np.mean(np.abs(u_hat - test.u)) / np.ptp(test.u))
    for seed in range(5):
        d, _ = three_component(150, seed, noise=0.3)
        trace = np.array(gllim.fit(d, K=4, seed=seed).log_likelihood_trace)
        monotone &= bool(np.all(np.diff(trace) >= -1e-8 * np.abs(trace[:-1])))
    rng = np.random.default_rng(0)
    u = rng.standard_normal((10, 1))
    y = rng.standard_normal((10, 3)) + u
    small = gllim.fit((y, u), K=2, config=gllim.EmConfig(max_iter=5))
    oracle_gap = abs(gllim.log_likelihood(small, (y, u))
                     - naive_gllim_log_likelihood(small.original_parameters(), u, y))
    elapsed = time.perf_counter() - t0
    record(5, monotone and rel < 1e-6 and held_out < 0.05 and oracle_gap < 1e-9
           and elapsed < 60,
           f"LL monotone {monotone}, K=1 relative error {rel:.1e}, held-out error "
           f"{100 * held_out:.2f}% of range, oracle gap {oracle_gap:.1e}, {elapsed:.1f} s")


@pytest.mark.slow
def test_criterion_06_single_config(reproduce_runs):
    dirs, codes, first_run = reproduce_runs
    means = summary_means(dirs["a"] / "single-config" / "report" / "summary.csv")
    az, el = means["azimuth"][0], means["elevation"][0]
    record(6, codes["a"] == 0 and az < 5 and el < 15 and first_run < 900,
           f"azimuth {az:.2f} deg, elevation {el:.2f} deg, {first_run:.0f} s "
           f"(single- and cross-config together)")


@pytest.mark.slow
def test_criterion_07_full_training(ablation_runs):
    s = ablation_runs[0, "full"]
    absorption, rng_cm = s["absorption"]["mean"], s["range"]["mean"]
    baseline = s["absorption"]["baseline_mean"]
    record(7, absorption < 0.30 and rng_cm < 75 and absorption < baseline,
           f"absorption {absorption:.3f} (mean-predictor {baseline:.3f}), range {rng_cm:.1f} cm")


@pytest.mark.slow
def test_criterion_08_diffusion_ablation(ablation_runs):
    gaps = {t: np.median([ablation_runs[s, "full-no-diffusion"][t]["mean"]
                          - ablation_runs[s, "full"][t]["mean"] for s in ABLATION_SEEDS])
            for t in ("azimuth", "elevation", "range", "absorption")}
    record(8, gaps["elevation"] > 0 and gaps["absorption"] > 0,
           "median (no diffusion - diffusion): " + ", ".join(f"{t} {g:+.3f}"
                                                              for t, g in gaps.items()))


@pytest.mark.slow
def test_criterion_09_determinism(reproduce_runs):
    dirs, codes, _ = reproduce_runs
    a, b, c = (report_files(dirs[k]) for k in "abc")
    same_runs = a == b
    same_jobs = a == c
    record(9, all(v == 0 for v in codes.values()) and same_runs and same_jobs and len(a) > 8,
           f"{len(a)} report files; identical across runs {same_runs}, "
           f"across --jobs 1/8 {same_jobs}")


def test_criterion_10_counts(capsys):
    train = set(build_grid("train").directions())
    test = set(build_grid("test").directions())
    code = main(["dataset", "--preset", "full", "--scale", "paper", "--dry-run"])
    out = capsys.readouterr().out
    record(10, len(train) == 651 and len(test) == 150 and not train & test
           and code == 0 and "N = 82026" in out,
           f"train {len(train)}, test {len(test)}, overlap {len(train & test)}, "
           f"full-scale dry run: {out.split(chr(10))[0]}")


# -- further desk-scale property ----------------------------------------------------

@pytest.mark.slow
def test_full_annotation_does_not_hurt_elevation(ablation_runs):
    gap = np.median([ablation_runs[s, "full"]["elevation"]["mean"]
                     - ablation_runs[s, "direction-only"]["elevation"]["mean"]
                     for s in ABLATION_SEEDS])
    assert gap <= 1.0
