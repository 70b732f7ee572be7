import numpy as np
import pytest

from ksipm.spectral import Grid, RealField


def smooth_random(grid: Grid, seed: int, kmax: int = 10) -> RealField:
    """Random trigonometric polynomial, band-limited well below Nyquist."""
    rng = np.random.default_rng(seed)
    x1, x2 = grid.mesh
    f = np.zeros(grid.shape)
    for k1 in range(-kmax, kmax + 1):
        for k2 in range(kmax + 1):
            a, b = rng.standard_normal(2) / (1 + k1 * k1 + k2 * k2)
            f += a * np.cos(k1 * x1 + b) * np.cos(k2 * x2)
    return RealField(grid, f)


def noise(grid: Grid, seed: int) -> RealField:
    return RealField(grid, np.random.default_rng(seed).standard_normal(grid.shape))


@pytest.fixture(params=[(32, 32), (64, 48)], ids=lambda s: f"{s[0]}x{s[1]}")
def grid(request):
    return Grid(*request.param)


def random_trace(seed: int, N0: int = 4):
    """Piecewise-linear trace in log2 space around the base level.

    Half the traces snap their samples to integer exponents, so exact touches
    of dyadic levels (including touch-and-turn-back) are common.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    times = np.cumsum(rng.uniform(0.05, 1.0, n))
    expo = N0 + np.cumsum(rng.normal(0.0, rng.uniform(0.3, 1.5), n)) + rng.uniform(-2, 2)
    if seed % 2 == 0:
        expo = np.round(expo)
    return list(times), list(2.0**expo)
