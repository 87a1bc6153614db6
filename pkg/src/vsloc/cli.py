"""Command-line entry point: simulate, dataset, train, eval, reproduce.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure,
3 partial success (some scenes failed and are listed in errors.json).
"""

import argparse
import logging
import shutil
import sys
import time
from pathlib import Path

from . import __version__, gllim
from .acoustics.room import InvalidSceneError
from .acoustics.simulate import simulate_brir
from .acoustics.wavio import save_brir
from .config import ConfigError, dataset_scenes_spec, load_config
from .dataset import (PARAM_NAMES, MaterialError, generate, load_dataset, save_dataset,
                      scene_product)
from .experiments import (PRESETS, ExperimentError, comparison_rows, evaluate,
                          format_comparison, preset, run_experiment, training_set,
                          write_comparison, write_ll_trace)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_PARTIAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--config", type=Path, help="TOML configuration file")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("--scale", choices=("desk", "paper"), default="desk",
                   help="experiment scale for presets (default desk)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="vsloc", description="Virtually-supervised binaural localization.")
    parser.add_argument("--version", action="version", version=f"vsloc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="render one BRIR to a WAV file")
    p.add_argument("-o", "--output", type=Path, required=True, help="output .wav path")

    p = sub.add_parser("dataset", parents=[common], help="generate an annotated dataset")
    p.add_argument("-o", "--output", type=Path, help="output directory")
    p.add_argument("--preset", choices=PRESETS, help="take the scene set from a preset")
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--dry-run", action="store_true", help="only resolve and count scenes")

    p = sub.add_parser("train", parents=[common], help="fit a GLLiM model on a dataset")
    p.add_argument("dataset", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="model file")
    p.add_argument("--annotation", help="comma-separated subset of " + ",".join(PARAM_NAMES))
    p.add_argument("-K", type=int, help="number of mixture components")

    p = sub.add_parser("eval", parents=[common], help="evaluate a model on a test dataset")
    p.add_argument("model", type=Path)
    p.add_argument("dataset", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="report directory")

    p = sub.add_parser("reproduce", parents=[common], help="run canned experiments")
    p.add_argument("presets", nargs="*", help="preset names, or 'all'")
    p.add_argument("-o", "--output", type=Path, default=Path("vsloc-results"))
    p.add_argument("--list", action="store_true", help="list presets and exit")
    return parser


def _claim_output(path, force):
    path = Path(path)
    if path.exists():
        if not force:
            raise UsageError(f"{path} already exists; pass --force to overwrite")
        if path.is_dir():
            shutil.rmtree(path)
        else:
            path.unlink()


def cmd_simulate(args):
    cfg = load_config(args.config)
    if cfg.source is None:
        raise ConfigError("simulate needs a [source] section in the config")
    if args.output.exists() and not args.force:
        raise UsageError(f"{args.output} already exists; pass --force to overwrite")
    rir = simulate_brir(cfg.room, cfg.source, cfg.head, cfg.sim, seed=args.seed)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    save_brir(rir, args.output)
    print(f"wrote {args.output} ({len(rir)} samples at {rir.sample_rate} Hz)")
    return EXIT_OK


def _dataset_selection(args, cfg):
    if args.preset:
        spec = preset(args.preset, args.scale, args.seed)
        sel = spec.train if args.split == "train" else spec.test
        return sel.scenes(), spec.generation(sel.diffusion)
    directions, ranges, materials = dataset_scenes_spec(cfg)
    return scene_product(directions, ranges, materials), cfg.generation


def cmd_dataset(args):
    cfg = load_config(args.config)
    scenes, gen = _dataset_selection(args, cfg)
    if args.dry_run:
        print(f"N = {len(scenes)}")
        print(f"D = {gen.features.dimension}")
        return EXIT_OK
    if args.output is None:
        raise UsageError("dataset needs -o/--output unless --dry-run is given")
    _claim_output(args.output, args.force)
    t0 = time.perf_counter()
    data = generate(scenes, cfg.room, cfg.head, gen, seed=args.seed, jobs=args.jobs)
    save_dataset(data, args.output)
    elapsed = time.perf_counter() - t0
    print(f"N = {len(data)}")
    print(f"D = {gen.features.dimension}")
    print(f"time = {elapsed:.1f} s")
    if data.errors:
        print(f"{len(data.errors)} scene(s) failed; see {args.output / 'errors.json'}",
              file=sys.stderr)
        return EXIT_RUNTIME if len(data) == 0 else EXIT_PARTIAL
    return EXIT_OK


def cmd_train(args):
    cfg = load_config(args.config)
    data = load_dataset(args.dataset)
    annotation = cfg.annotation
    if args.annotation:
        annotation = tuple(a.strip() for a in args.annotation.split(",") if a.strip())
        bad = [a for a in annotation if a not in PARAM_NAMES]
        if bad or not annotation:
            raise UsageError(f"unknown annotation {bad}; choose from {','.join(PARAM_NAMES)}")
        annotation = tuple(n for n in PARAM_NAMES if n in annotation)
    K = args.K if args.K is not None else cfg.K
    if args.output.exists() and not args.force:
        raise UsageError(f"{args.output} already exists; pass --force to overwrite")
    model = gllim.fit(training_set(data, annotation), K=K, config=cfg.em, seed=args.seed)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    gllim.save_model(model, args.output)
    trace = args.output.with_suffix(".ll.csv")
    write_ll_trace(model, trace)
    print(f"K = {model.K}, L = {model.L}, D = {model.D}, "
          f"{len(model.log_likelihood_trace)} EM iterations")
    print(f"wrote {args.output} and {trace}")
    return EXIT_OK


def cmd_eval(args):
    model = gllim.load_model(args.model)
    data = load_dataset(args.dataset)
    report = evaluate(model, data)
    _claim_output(args.output, args.force)
    report.write(args.output)
    for target, s in report.summary().items():
        print(f"{target:<11} {s['mean']:.4f} ± {s['std']:.4f}")
    return EXIT_OK


def cmd_reproduce(args):
    if args.list or not args.presets:
        print("\n".join(PRESETS))
        return EXIT_OK
    names = list(PRESETS) if args.presets == ["all"] else args.presets
    unknown = [n for n in names if n not in PRESETS]
    if unknown:
        raise UsageError(f"unknown preset(s) {', '.join(unknown)}; available: "
                         + ", ".join(PRESETS))
    out = args.output
    if args.force and out.exists():
        shutil.rmtree(out)
    for name in names:
        if (out / name).exists():
            raise UsageError(f"{out / name} already exists; pass --force to overwrite")
    rows = []
    for name in names:
        t0 = time.perf_counter()
        report = run_experiment(preset(name, args.scale, args.seed), out, jobs=args.jobs)
        print(f"{name}: done in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        rows += comparison_rows(name, report)
    write_comparison(rows, out / "comparison.csv")
    print(format_comparison(rows))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "dataset": cmd_dataset, "train": cmd_train,
            "eval": cmd_eval, "reproduce": cmd_reproduce}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, ExperimentError, MaterialError, InvalidSceneError) as exc:
        print(f"vsloc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"vsloc {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
