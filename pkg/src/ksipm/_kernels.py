"""Pointwise kernels of the time stepper.

Every kernel exists twice: a numba loop (``*_nb``) and a vectorised numpy
version (``*_np``). The module-level names bind to one of them according to
``KSIPM_DISABLE_NUMBA``; both sets stay importable so tests and the benchmark
can compare them directly.
"""

import math

import numpy as np

from ._backend import USE_NUMBA, njit


# -- numpy path ---------------------------------------------------------------


def fluxes_np(rho, v1, v2):
    return rho * v1, rho * v2


def fluxes_speed_np(rho, u1, u2, c1, c2):
    speed = np.sqrt(u1 * u1 + u2 * u2) + np.sqrt(c1 * c1 + c2 * c2)
    return rho * (u1 + c1), rho * (u2 + c2), float(speed.max())


def heun_predict_np(decay, x, n0, dt):
    return decay * (x + dt * n0)


def heun_correct_np(decay, x, n0, n1, dt):
    return decay * (x + 0.5 * dt * n0) + 0.5 * dt * n1


def field_stats_np(rho, rho_m):
    """Return ``(min, max, max|rho - rho_m|, all_finite)`` in one call."""
    finite = bool(np.isfinite(rho).all())
    if not finite:
        return math.nan, math.nan, math.nan, False
    lo = float(rho.min())
    hi = float(rho.max())
    return lo, hi, max(hi - rho_m, rho_m - lo), True


# -- numba path ---------------------------------------------------------------


@njit(cache=True)
def fluxes_nb(rho, v1, v2):
    n1, n2 = rho.shape
    f1 = np.empty_like(rho)
    f2 = np.empty_like(rho)
    for i in range(n1):
        for j in range(n2):
            r = rho[i, j]
            f1[i, j] = r * v1[i, j]
            f2[i, j] = r * v2[i, j]
    return f1, f2


@njit(cache=True)
def fluxes_speed_nb(rho, u1, u2, c1, c2):
    n1, n2 = rho.shape
    f1 = np.empty_like(rho)
    f2 = np.empty_like(rho)
    vmax = 0.0
    for i in range(n1):
        for j in range(n2):
            a1 = u1[i, j]
            a2 = u2[i, j]
            b1 = c1[i, j]
            b2 = c2[i, j]
            r = rho[i, j]
            f1[i, j] = r * (a1 + b1)
            f2[i, j] = r * (a2 + b2)
            s = math.sqrt(a1 * a1 + a2 * a2) + math.sqrt(b1 * b1 + b2 * b2)
            # NaN never wins a ">" comparison; propagate it explicitly
            if s > vmax or s != s:
                vmax = s
    return f1, f2, vmax


@njit(cache=True)
def heun_predict_nb(decay, x, n0, dt):
    m, n = x.shape
    out = np.empty_like(x)
    for i in range(m):
        for j in range(n):
            out[i, j] = decay[i, j] * (x[i, j] + dt * n0[i, j])
    return out


@njit(cache=True)
def heun_correct_nb(decay, x, n0, n1, dt):
    m, n = x.shape
    out = np.empty_like(x)
    h = 0.5 * dt
    for i in range(m):
        for j in range(n):
            out[i, j] = decay[i, j] * (x[i, j] + h * n0[i, j]) + h * n1[i, j]
    return out


@njit(cache=True)
def field_stats_nb(rho, rho_m):
    n1, n2 = rho.shape
    lo = np.inf
    hi = -np.inf
    for i in range(n1):
        for j in range(n2):
            r = rho[i, j]
            if not np.isfinite(r):
                return np.nan, np.nan, np.nan, False
            if r < lo:
                lo = r
            if r > hi:
                hi = r
    return lo, hi, max(hi - rho_m, rho_m - lo), True


NUMPY_KERNELS = {
    "fluxes": fluxes_np,
    "fluxes_speed": fluxes_speed_np,
    "heun_predict": heun_predict_np,
    "heun_correct": heun_correct_np,
    "field_stats": field_stats_np,
}

NUMBA_KERNELS = {
    "fluxes": fluxes_nb,
    "fluxes_speed": fluxes_speed_nb,
    "heun_predict": heun_predict_nb,
    "heun_correct": heun_correct_nb,
    "field_stats": field_stats_nb,
}

ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS
BACKEND = "numba" if USE_NUMBA else "numpy"

fluxes = ACTIVE["fluxes"]
fluxes_speed = ACTIVE["fluxes_speed"]
heun_predict = ACTIVE["heun_predict"]
heun_correct = ACTIVE["heun_correct"]
field_stats = ACTIVE["field_stats"]
