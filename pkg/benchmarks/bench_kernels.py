"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Also times one full BRIR simulation with each backend.
"""

import argparse
import timeit

import numpy as np

from vsloc import kernels
from vsloc.acoustics import SimConfig, SourceSpec, default_room, simulate_brir
from vsloc.acoustics.rain import uniform_sphere
from vsloc.binaural import HeadModel


def accumulate_case(backend):
    rng = np.random.default_rng(0)
    m, bands, n = 20000, 6, 4800
    delays = rng.uniform(0, n - 10, m)
    weights = rng.standard_normal((m, bands))
    rows = rng.integers(0, 2, m).astype(np.int64) * bands
    impl = kernels.get_backend(backend)

    def run():
        out = np.zeros((2 * bands, n))
        impl.accumulate_impulses(out, delays, weights, rows, 5)
    return run


def rain_case(backend, n_rays=2000):
    room = default_room(0.3)
    pos = room.source_position(SourceSpec(30.0, 10.0, 1.5))
    dirs = uniform_sphere(n_rays, np.random.default_rng(1))
    impl = kernels.get_backend(backend)

    def run():
        hist = np.zeros((6, 300))
        impl.trace_rain(room.dims.astype(float), pos, np.asarray(room.receiver_position),
                        dirs, room.absorption_matrix(), room.diffusion_matrix(),
                        4 * np.pi / n_rays, 343.0, 0.3, 1e-3, 0.0875, 1e-6, hist)
    return run


def simulate_case(backend):
    room = default_room(0.3)
    cfg = SimConfig(duration=0.2, n_rays=2000)

    def run():
        simulate_brir(room, SourceSpec(30.0, 10.0, 1.5), HeadModel(), cfg, seed=0,
                      backend=backend)
    return run


def best_of(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if kernels.BACKEND != "cython":
        print("compiled extension not available; only the python backend will be timed")
    backends = ("cython", "python") if kernels.BACKEND == "cython" else ("python",)
    cases = {"accumulate_impulses": accumulate_case, "trace_rain": rain_case,
             "simulate_brir": simulate_case}
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + "     speedup")
    for name, make in cases.items():
        times = [best_of(make(b), args.repeat) for b in backends]
        line = f"{name:<22}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
        if len(times) == 2:
            line += f"{times[1] / times[0]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
