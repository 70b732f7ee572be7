"""Spectral machinery on the strip T x [0, pi].

Fields live on a tensor grid that is periodic in x1 and uses half-integer
(cell-centred) nodes in x2. On those nodes the type-II cosine and sine
transforms are both exact changes of basis, so every field has a Neumann
(cosine) and a Dirichlet (sine) coefficient representation at the same time.

Coefficients follow the continuum normalisation

    f_N(k1, k2) = 1/pi \\int\\int f e^{-i k1 x1} cos(k2 x2) dx2 dx1,
    f_D(k1, k2) = 1/pi \\int\\int f e^{-i k1 x1} sin(k2 x2) dx2 dx1,

with the integrals replaced by the midpoint rule on the grid. Neumann
coefficients carry the weight ``1/(1 + delta(k2))`` on reconstruction; the
top sine mode ``k2 = n2`` carries the weight 1/2 (it is the sine "Nyquist"
mode of the half-integer grid).

Internally everything works on *raw* half spectra ``rfft_x1(dct_x2(f))`` and
``rfft_x1(dst_x2(f))``. Raw and normalised coefficients differ by the common
factor ``pi (-1)^k1 / (n1 n2)``, which every operator here commutes with.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from ._backend import FFT_WORKERS


class SpectralError(ValueError):
    """Base class for invalid inputs to spectral operations."""


class NonFiniteError(SpectralError):
    pass


class SolvabilityError(SpectralError):
    """Neumann Poisson right-hand side with nonzero mean."""


# Relative mean tolerance for the Neumann solve.
MEAN_ZERO_RTOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Collocation grid: ``x1_i = -pi + 2 pi i / n1``, ``x2_j = pi (j + 1/2) / n2``."""

    n1: int
    n2: int

    def __post_init__(self):
        if int(self.n1) != self.n1 or int(self.n2) != self.n2:
            raise ValueError("grid sizes must be integers")
        if self.n1 < 8 or self.n2 < 8:
            raise ValueError(f"grid sizes must be >= 8, got {self.n1}x{self.n2}")
        if self.n1 % 2:
            raise ValueError(f"n1 must be even, got {self.n1}")

    @cached_property
    def x1(self) -> np.ndarray:
        return -np.pi + 2.0 * np.pi * np.arange(self.n1) / self.n1

    @cached_property
    def x2(self) -> np.ndarray:
        return np.pi * (np.arange(self.n2) + 0.5) / self.n2

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    @property
    def h1(self) -> float:
        return 2.0 * np.pi / self.n1

    @property
    def h2(self) -> float:
        return np.pi / self.n2

    @property
    def h(self) -> float:
        return min(self.h1, self.h2)

    @property
    def cell(self) -> float:
        return self.h1 * self.h2

    @property
    def area(self) -> float:
        return 2.0 * np.pi**2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)


@dataclass(frozen=True, eq=False)
class RealField:
    """Nodal values ``values[i, j] = f(x1_i, x2_j)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.isfinite(v).all():
            raise NonFiniteError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "RealField":
        x1, x2 = grid.mesh
        return cls(grid, np.broadcast_to(fn(x1, x2), grid.shape).astype(float))

    @classmethod
    def zeros(cls, grid: Grid) -> "RealField":
        return cls(grid, np.zeros(grid.shape))

    def __add__(self, other):
        return RealField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return RealField(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return RealField(self.grid, self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return RealField(self.grid, -self.values)


def _vals(x):
    return x.values if isinstance(x, RealField) else x


# -- wavenumber tables -------------------------------------------------------


class Basis:
    """Wavenumber tables for one grid, in the raw half-spectrum layout.

    Rows index ``k1 = 0 .. n1/2`` (rfft order); columns index ``k2 = 0 .. n2-1``
    for cosine spectra and ``k2 = 1 .. n2`` for sine spectra.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        n1, n2 = grid.shape
        k1 = np.arange(n1 // 2 + 1, dtype=float)
        self.k1 = k1
        # first derivatives drop the unpaired Nyquist mode
        k1d = k1.copy()
        k1d[-1] = 0.0
        self.ik1 = (1j * k1d)[:, None]
        self.k1d_sq = (k1d**2)[:, None]
        self.k2c = np.arange(n2, dtype=float)
        self.k2s = np.arange(1, n2 + 1, dtype=float)
        self.lap_c = k1[:, None] ** 2 + self.k2c[None, :] ** 2
        self.lap_s = k1[:, None] ** 2 + self.k2s[None, :] ** 2
        inv = np.zeros_like(self.lap_c)
        inv[self.lap_c > 0] = 1.0 / self.lap_c[self.lap_c > 0]
        self.inv_lap_c = inv
        self.inv_lap_s = 1.0 / self.lap_s
        # multiplicity of each half-spectrum row in the full spectrum
        mult = np.full(k1.size, 2.0)
        mult[0] = 1.0
        mult[-1] = 1.0
        self.row_mult = mult[:, None]
        wc = np.ones(n2)
        wc[0] = 0.5
        ws = np.ones(n2)
        ws[-1] = 0.5
        self.w_c = wc[None, :]
        self.w_s = ws[None, :]
        # |raw|^2 -> |normalised|^2
        self.norm_sq = (np.pi / (n1 * n2)) ** 2
        self.phase = np.where(np.arange(k1.size) % 2 == 0, 1.0, -1.0)[:, None]
        self.dealias_c = (3 * k1[:, None] < n1) & (3 * self.k2c[None, :] < 2 * n2)
        self.dealias_s = (3 * k1[:, None] < n1) & (3 * self.k2s[None, :] < 2 * n2)
        self.odd_c = (np.arange(n2) % 2 == 1)[None, :]

    def energy_c(self, x: np.ndarray) -> np.ndarray:
        """Per-mode Parseval weights times ``|coeff|^2`` for a raw cosine spectrum."""
        return self.norm_sq * self.row_mult * self.w_c * np.abs(x) ** 2

    def energy_s(self, x: np.ndarray) -> np.ndarray:
        return self.norm_sq * self.row_mult * self.w_s * np.abs(x) ** 2


@functools.lru_cache(maxsize=16)
def basis(grid: Grid) -> Basis:
    return Basis(grid)


# -- raw transforms (arrays in, arrays out) ----------------------------------


def fwd_c(f):
    return sfft.rfft(sfft.dct(f, type=2, axis=1, workers=FFT_WORKERS), axis=0, workers=FFT_WORKERS)


def _inverse(x, n1, kind, ncols):
    if ncols is None or ncols >= x.shape[1]:
        return kind(sfft.irfft(x, n=n1, axis=0, workers=FFT_WORKERS), type=2, axis=1, workers=FFT_WORKERS)
    # columns past ncols are zero: skip their x1 transforms
    mid = np.zeros((n1, x.shape[1]))
    mid[:, :ncols] = sfft.irfft(x[:, :ncols], n=n1, axis=0, workers=FFT_WORKERS)
    return kind(mid, type=2, axis=1, workers=FFT_WORKERS)


def inv_c(x, n1, ncols=None):
    """Inverse of ``fwd_c``; ``ncols`` promises that later columns of ``x`` vanish."""
    return _inverse(x, n1, sfft.idct, ncols)


def fwd_s(f):
    return sfft.rfft(sfft.dst(f, type=2, axis=1, workers=FFT_WORKERS), axis=0, workers=FFT_WORKERS)


def fwd_s_band(f, nrows, ncols):
    """``fwd_s`` truncated to the leading ``nrows x ncols`` block, zero elsewhere."""
    n1, n2 = f.shape
    out = np.zeros((n1 // 2 + 1, n2), dtype=complex)
    d = sfft.dst(f, type=2, axis=1, workers=FFT_WORKERS)
    out[:nrows, :ncols] = sfft.rfft(d[:, :ncols], axis=0, workers=FFT_WORKERS)[:nrows]
    return out


def inv_s(x, n1, ncols=None):
    return _inverse(x, n1, sfft.idst, ncols)


@functools.lru_cache(maxsize=16)
def _k2_factor(n2):
    return np.arange(1, n2, dtype=float)


def c2s_deriv(x):
    """d/dx2 of a cosine spectrum, returned as a sine spectrum."""
    out = np.empty_like(x)
    np.multiply(x[:, 1:], -_k2_factor(x.shape[1]), out=out[:, :-1])
    out[:, -1] = 0.0
    return out


def s2c_deriv(x):
    """d/dx2 of a sine spectrum, returned as a cosine spectrum (top mode dropped)."""
    out = np.empty_like(x)
    np.multiply(x[:, :-1], _k2_factor(x.shape[1]), out=out[:, 1:])
    out[:, 0] = 0.0
    return out


def ddx1_raw(f, b: Basis):
    n1 = f.shape[0]
    return sfft.irfft(b.ik1 * sfft.rfft(f, axis=0, workers=FFT_WORKERS), n=n1, axis=0, workers=FFT_WORKERS)


# -- coefficient containers --------------------------------------------------


def _full_k1(n1: int) -> np.ndarray:
    return np.rint(np.fft.fftfreq(n1) * n1).astype(int)


def _half_to_full(half: np.ndarray, n1: int) -> np.ndarray:
    full = np.empty((n1, half.shape[1]), dtype=complex)
    full[: n1 // 2 + 1] = half
    # k1 = -m for m = 1 .. n1/2 - 1 sits at index n1 - m
    full[n1 // 2 + 1 :] = np.conj(half[1 : n1 // 2][::-1])
    return full


def _normalise(half_raw: np.ndarray, b: Basis) -> np.ndarray:
    n1, n2 = b.grid.shape
    full = _half_to_full(half_raw, n1)
    k1 = _full_k1(n1)
    phase = np.where(k1 % 2 == 0, 1.0, -1.0)[:, None]
    return (np.pi / (n1 * n2)) * phase * full


def _denormalise(coeffs: np.ndarray, b: Basis) -> np.ndarray:
    n1, n2 = b.grid.shape
    half = coeffs[: n1 // 2 + 1]
    return half * b.phase * (n1 * n2 / np.pi)


@dataclass(frozen=True, eq=False)
class _Spectrum:
    grid: Grid
    coeffs: np.ndarray  # (n1, n2) complex, rows in FFT order of k1

    @property
    def k1(self) -> np.ndarray:
        """k1 value of every row (FFT order: 0, 1, ..., n1/2-1, -n1/2, ..., -1)."""
        return _full_k1(self.grid.n1)

    def _row(self, k1: int) -> int:
        n1 = self.grid.n1
        if not -n1 // 2 <= k1 < n1 // 2:
            raise IndexError(f"k1={k1} outside [-{n1 // 2}, {n1 // 2 - 1}]")
        return k1 % n1

    def energy(self) -> float:
        """Weighted sum of ``|coeff|^2``; equals the nodal L2 norm squared."""
        return float(np.sum(self.weights[None, :] * np.abs(self.coeffs) ** 2))


class NeumannSpectrum(_Spectrum):
    """Cosine-basis coefficients, ``k2 = 0 .. n2-1`` along columns."""

    @property
    def k2(self) -> np.ndarray:
        return np.arange(self.grid.n2)

    @property
    def weights(self) -> np.ndarray:
        w = np.ones(self.grid.n2)
        w[0] = 0.5
        return w

    def coeff(self, k1: int, k2: int) -> complex:
        if not 0 <= k2 < self.grid.n2:
            raise IndexError(f"k2={k2} outside [0, {self.grid.n2 - 1}]")
        return complex(self.coeffs[self._row(k1), k2])


class DirichletSpectrum(_Spectrum):
    """Sine-basis coefficients, column ``j`` holds ``k2 = j + 1``."""

    @property
    def k2(self) -> np.ndarray:
        return np.arange(1, self.grid.n2 + 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.ones(self.grid.n2)
        w[-1] = 0.5
        return w

    def coeff(self, k1: int, k2: int) -> complex:
        if not 1 <= k2 <= self.grid.n2:
            raise IndexError(f"k2={k2} outside [1, {self.grid.n2}]")
        return complex(self.coeffs[self._row(k1), k2 - 1])


def _check_finite(f: RealField):
    # RealField validates on construction; arrays mutated in place could slip by
    if not np.isfinite(f.values).all():
        raise NonFiniteError("field contains non-finite values")


def forward_neumann(f: RealField) -> NeumannSpectrum:
    _check_finite(f)
    b = basis(f.grid)
    return NeumannSpectrum(f.grid, _normalise(fwd_c(f.values), b))


def inverse_neumann(s: NeumannSpectrum) -> RealField:
    b = basis(s.grid)
    return RealField(s.grid, inv_c(_denormalise(s.coeffs, b), s.grid.n1))


def forward_dirichlet(f: RealField) -> DirichletSpectrum:
    _check_finite(f)
    b = basis(f.grid)
    return DirichletSpectrum(f.grid, _normalise(fwd_s(f.values), b))


def inverse_dirichlet(s: DirichletSpectrum) -> RealField:
    b = basis(s.grid)
    return RealField(s.grid, inv_s(_denormalise(s.coeffs, b), s.grid.n1))


# -- quadrature and norms ----------------------------------------------------


def integrate(f: RealField) -> float:
    """Midpoint-rule integral over the strip."""
    return float(np.sum(f.values)) * f.grid.cell


def inner(f: RealField, g: RealField) -> float:
    return float(np.sum(f.values * g.values)) * f.grid.cell


def mean(f: RealField) -> float:
    return float(np.mean(f.values))


def grad_l2_sq(f: RealField) -> float:
    """``sum w (k1^2 + k2^2) |f_N|^2``, the Neumann quadratic form of ``-Laplacian``."""
    b = basis(f.grid)
    x = fwd_c(f.values)
    return float(np.sum(b.lap_c * b.energy_c(x)))


def norms(f: RealField) -> dict:
    v = f.values
    cell = f.grid.cell
    return {
        "l1": float(np.sum(np.abs(v))) * cell,
        "l2": math.sqrt(float(np.sum(v * v)) * cell),
        "linf": float(np.max(np.abs(v))),
        "grad_l2_sq": grad_l2_sq(f),
    }


# -- Poisson solves ----------------------------------------------------------


def solve_poisson_neumann(f: RealField) -> RealField:
    """Zero-mean ``c`` with ``-Lap_N c = f``; ``f`` must have zero mean."""
    _check_finite(f)
    scale = math.sqrt(float(np.mean(f.values**2)))
    m = mean(f)
    if abs(m) > MEAN_ZERO_RTOL * scale and abs(m) > 1e-300:
        raise SolvabilityError(f"right-hand side has mean {m:.3e} (rms {scale:.3e})")
    b = basis(f.grid)
    x = fwd_c(f.values) * b.inv_lap_c
    return RealField(f.grid, inv_c(x, f.grid.n1))


def solve_poisson_dirichlet(f: RealField) -> RealField:
    """``psi`` with ``-Lap_D psi = f`` and ``psi = 0`` on ``x2 in {0, pi}``."""
    _check_finite(f)
    b = basis(f.grid)
    return RealField(f.grid, inv_s(fwd_s(f.values) * b.inv_lap_s, f.grid.n1))


def laplacian_neumann(f: RealField) -> RealField:
    b = basis(f.grid)
    return RealField(f.grid, inv_c(-b.lap_c * fwd_c(f.values), f.grid.n1))


def laplacian_dirichlet(f: RealField) -> RealField:
    b = basis(f.grid)
    return RealField(f.grid, inv_s(-b.lap_s * fwd_s(f.values), f.grid.n1))


# -- derivatives ---------------------------------------------------------------


def ddx1(f: RealField) -> RealField:
    return RealField(f.grid, ddx1_raw(f.values, basis(f.grid)))


def ddx2_cos_to_sin(f: RealField) -> RealField:
    """x2 derivative of a cosine-type (Neumann) field; the result is sine-type."""
    return RealField(f.grid, inv_s(c2s_deriv(fwd_c(f.values)), f.grid.n1))


def ddx2_sin_to_cos(f: RealField) -> RealField:
    """x2 derivative of a sine-type (Dirichlet) field; the result is cosine-type."""
    return RealField(f.grid, inv_c(s2c_deriv(fwd_s(f.values)), f.grid.n1))


def grad(f: RealField) -> tuple[RealField, RealField]:
    """Gradient of a cosine-type field: ``(d1 f, d2 f)``."""
    return ddx1(f), ddx2_cos_to_sin(f)


def perp_grad(psi: RealField) -> tuple[RealField, RealField]:
    """``(-d2 psi, d1 psi)`` for a sine-type stream function."""
    return -ddx2_sin_to_cos(psi), ddx1(psi)


def divergence(v1: RealField, v2: RealField) -> RealField:
    """``d1 v1 + d2 v2`` with ``v2`` sine-type (vanishing normal component)."""
    return ddx1(v1) + ddx2_sin_to_cos(v2)


# -- x1 decomposition ----------------------------------------------------------


def x1_average(f: RealField) -> RealField:
    avg = f.values.mean(axis=0, keepdims=True)
    return RealField(f.grid, np.broadcast_to(avg, f.grid.shape).copy())


def x1_fluctuation(f: RealField) -> RealField:
    return RealField(f.grid, f.values - f.values.mean(axis=0, keepdims=True))


def hminus1_norm_sq_dx1_raw(rho: np.ndarray, b: Basis) -> float:
    x = fwd_s(rho)
    return float(np.sum(b.k1d_sq * b.inv_lap_s * b.energy_s(x)))


def hminus1_norm_sq_dx1(rho: RealField) -> float:
    """``|| d1 rho ||^2`` in the dual of H^1_0: ``sum k1^2 / |k|^2 |rho_D|^2``."""
    return hminus1_norm_sq_dx1_raw(rho.values, basis(rho.grid))


def hminus1_norm_sq(f: RealField) -> float:
    """``sum |f_D|^2 / |k|^2 = \\int f (-Lap_D)^{-1} f``."""
    b = basis(f.grid)
    return float(np.sum(b.inv_lap_s * b.energy_s(fwd_s(f.values))))


def boundary_traces(f: RealField) -> tuple[np.ndarray, np.ndarray]:
    """Values of the cosine interpolant at ``x2 = 0`` and ``x2 = pi``."""
    return boundary_traces_raw(f.values)


def boundary_traces_raw(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n2 = v.shape[1]
    y = sfft.dct(v, type=2, axis=1, workers=FFT_WORKERS)
    sign = np.where(np.arange(n2) % 2 == 0, 1.0, -1.0)
    bottom = (y[:, 0] + 2.0 * y[:, 1:].sum(axis=1)) / (2 * n2)
    top = (y[:, 0] + 2.0 * (y[:, 1:] * sign[1:]).sum(axis=1)) / (2 * n2)
    return bottom, top
