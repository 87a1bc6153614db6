import numpy as np
import pytest

from vsloc import kernels
from vsloc.acoustics.rain import uniform_sphere
from vsloc.acoustics.room import default_room

pytestmark = pytest.mark.skipif(kernels.BACKEND != "cython",
                                reason="compiled extension not built")


def test_accumulate_backends_agree():
    rng = np.random.default_rng(0)
    m, bands = 500, 6
    delays = rng.uniform(-3, 1010, m)
    weights = rng.standard_normal((m, bands))
    rows = rng.integers(0, 3, m).astype(np.int64) * bands
    outs = []
    for name in ("cython", "python"):
        out = np.zeros((3 * bands, 1000))
        kernels.get_backend(name).accumulate_impulses(out, delays, weights, rows, 5)
        outs.append(out)
    np.testing.assert_allclose(outs[0], outs[1], atol=1e-12)


def test_trace_rain_backends_agree():
    room = default_room(wall_absorption=0.3)
    src = room.source_position
    rng = np.random.default_rng(1)
    dirs = uniform_sphere(300, rng)
    from vsloc.acoustics.room import SourceSpec
    pos = src(SourceSpec(30, 10, 1.5))
    hists, hits = [], []
    for name in ("cython", "python"):
        hist = np.zeros((6, 200))
        n = kernels.get_backend(name).trace_rain(
            room.dims.astype(float), pos, np.asarray(room.receiver_position), dirs,
            room.absorption_matrix(), room.diffusion_matrix(), 4 * np.pi / 300, 343.0,
            0.2, 1e-3, 0.0875, 1e-6, hist)
        hists.append(hist)
        hits.append(n)
    assert hits[0] == hits[1]
    np.testing.assert_allclose(hists[0], hists[1], rtol=1e-10, atol=1e-18)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
