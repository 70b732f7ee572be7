import os
import subprocess
import sys

import numpy as np
import pytest

from ksipm import _kernels as K

SHAPES = [(8, 8), (32, 17), (64, 64)]


def arrays(shape, count, seed, complex_=False):
    rng = np.random.default_rng(seed)
    if complex_:
        return [rng.standard_normal(shape) + 1j * rng.standard_normal(shape) for _ in range(count)]
    return [rng.standard_normal(shape) for _ in range(count)]


@pytest.mark.parametrize("shape", SHAPES)
class TestBackendsAgree:
    def test_fluxes(self, shape):
        args = arrays(shape, 3, 0)
        for a, b in zip(K.NUMPY_KERNELS["fluxes"](*args), K.NUMBA_KERNELS["fluxes"](*args)):
            np.testing.assert_array_equal(a, b)

    def test_fluxes_speed(self, shape):
        args = arrays(shape, 5, 1)
        a = K.NUMPY_KERNELS["fluxes_speed"](*args)
        b = K.NUMBA_KERNELS["fluxes_speed"](*args)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-15)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-15)
        assert a[2] == pytest.approx(b[2], rel=1e-15)

    def test_heun(self, shape):
        dec = np.exp(-np.random.default_rng(2).random(shape))
        x, n0, n1 = arrays(shape, 3, 3, complex_=True)
        np.testing.assert_allclose(K.NUMPY_KERNELS["heun_predict"](dec, x, n0, 1e-3),
                                   K.NUMBA_KERNELS["heun_predict"](dec, x, n0, 1e-3), rtol=1e-15)
        np.testing.assert_allclose(K.NUMPY_KERNELS["heun_correct"](dec, x, n0, n1, 1e-3),
                                   K.NUMBA_KERNELS["heun_correct"](dec, x, n0, n1, 1e-3), rtol=1e-15)

    def test_field_stats(self, shape):
        (v,) = arrays(shape, 1, 4)
        assert K.NUMPY_KERNELS["field_stats"](v, 0.3) == K.NUMBA_KERNELS["field_stats"](v, 0.3)


class TestNonfinite:
    def test_stats_flag_nan(self):
        v = np.ones((8, 8))
        v[3, 3] = np.nan
        for kern in (K.NUMPY_KERNELS, K.NUMBA_KERNELS):
            assert kern["field_stats"](v, 1.0)[3] is False

    def test_speed_propagates_nan(self):
        args = arrays((8, 8), 5, 5)
        args[1][2, 2] = np.nan
        for kern in (K.NUMPY_KERNELS, K.NUMBA_KERNELS):
            assert np.isnan(kern["fluxes_speed"](*args)[2])


def test_env_flag_selects_numpy():
    code = "from ksipm import BACKEND; print(BACKEND)"
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, KSIPM_DISABLE_NUMBA=flag)
        out[flag] = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                                   check=True).stdout.strip()
    assert out == {"1": "numpy", "0": "numba"}


def test_backends_give_same_run():
    code = (
        "import numpy as np\n"
        "from ksipm import Grid, SimParams, run\n"
        "from ksipm.initial import gaussian_bump\n"
        "g = Grid(32, 32)\n"
        "r = run(SimParams(grid=g, g=1.0, t_end=0.05), gaussian_bump(g, sigma=0.5))\n"
        "print(repr(r.trajectory[-1].l2sq))\n"
    )
    vals = []
    for flag in ("1", "0"):
        env = dict(os.environ, KSIPM_DISABLE_NUMBA=flag)
        vals.append(float(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                                         check=True).stdout))
    assert vals[0] == pytest.approx(vals[1], rel=1e-12)
