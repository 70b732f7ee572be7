"""Cone projections and the mixing-improved Nash inequality.

For a field whose x1-fluctuation is well mixed,

    || d1 rho ||^2_{H^-1_0} <= N^-1 || rho~ ||^2,

the Nash ratio ``||rho~||^2 / (||rho~||_1 ||grad rho~||)`` is expected to
shrink like ``N^(-1/4)``. The tools here build cone-supported test fields,
evaluate both sides of the hypothesis and measure the ratio.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    DirichletSpectrum,
    Grid,
    RealField,
    basis,
    fwd_c,
    fwd_s,
    grad_l2_sq,
    hminus1_norm_sq_dx1,
    inv_c,
    inv_s,
    inverse_dirichlet,
    x1_fluctuation,
)

DEFAULT_APERTURE = 0.25
MEAN_TOL = 1e-10


class ConeError(ValueError):
    pass


@dataclass(frozen=True)
class ConeSpec:
    """Cones ``C1 = {k2 >= a sqrt(N) |k1|}`` and ``C2 = {k2 >= a^2 sqrt(N) |k1|}``."""

    a: float = DEFAULT_APERTURE
    N: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.a <= 0.5:
            raise ValueError(f"aperture must satisfy 0 < a <= 1/2, got {self.a}")
        if self.N < 1.0:
            raise ValueError(f"mixing strength must be >= 1, got {self.N}")

    @property
    def slope1(self) -> float:
        return self.a * math.sqrt(self.N)

    @property
    def slope2(self) -> float:
        return self.a**2 * math.sqrt(self.N)

    def in_c1(self, k1, k2):
        return np.asarray(k2) >= self.slope1 * np.abs(k1)

    def in_c2(self, k1, k2):
        return np.asarray(k2) >= self.slope2 * np.abs(k1)


def _half_k(grid: Grid, sine: bool):
    b = basis(grid)
    k2 = b.k2s if sine else b.k2c
    return b.k1[:, None], k2[None, :]


def _require_fluctuation(f: RealField):
    avg = np.abs(f.values.mean(axis=0)).max()
    scale = max(float(np.abs(f.values).max()), 1e-300)
    if avg > MEAN_TOL * scale:
        raise ConeError(f"input has nonzero x1-mean (max {avg:.3e})")


def _dirichlet_mask(grid, cone):
    k1, k2 = _half_k(grid, sine=True)
    return cone.in_c1(k1, k2)


def _neumann_mask(grid, cone):
    k1, k2 = _half_k(grid, sine=False)
    return cone.in_c2(k1, k2)


def project_cone_dirichlet(rho_tilde: RealField, cone: ConeSpec) -> RealField:
    """Keep the sine coefficients inside ``C1``."""
    _require_fluctuation(rho_tilde)
    g = rho_tilde.grid
    return RealField(g, inv_s(fwd_s(rho_tilde.values) * _dirichlet_mask(g, cone), g.n1))


def project_cone_neumann(rho_tilde: RealField, cone: ConeSpec) -> RealField:
    """Keep the cosine coefficients inside ``C2``."""
    _require_fluctuation(rho_tilde)
    g = rho_tilde.grid
    return RealField(g, inv_c(fwd_c(rho_tilde.values) * _neumann_mask(g, cone), g.n1))


def _l2sq(f: RealField) -> float:
    return float(np.sum(f.values**2)) * f.grid.cell


def check_mixing_hypothesis(rho_tilde: RealField, N: float) -> dict:
    lhs = hminus1_norm_sq_dx1(rho_tilde)
    rhs = _l2sq(rho_tilde) / N
    return {"holds": bool(lhs <= rhs * (1 + 1e-12)), "lhs": lhs, "rhs": rhs}


def nash_ratio(rho_tilde: RealField) -> float:
    """``||f||_2^2 / (||f||_1 ||grad f||_2)``; invariant under positive scaling."""
    v = rho_tilde.values
    cell = rho_tilde.grid.cell
    l1 = float(np.sum(np.abs(v))) * cell
    gsq = grad_l2_sq(rho_tilde)
    if l1 == 0.0 or gsq <= 0.0:
        raise ValueError("nash_ratio is undefined for the zero field")
    return float(np.sum(v * v)) * cell / (l1 * math.sqrt(gsq))


def leakage_check(rho_tilde: RealField, cone: ConeSpec) -> dict:
    """Energy of the C1 part that falls outside C2 in the cosine basis.

    Returns ``lhs = ||(I - P2_N) P1_D rho~||^2 / ||rho~||^2`` and
    ``bound_factor = lhs / a``.
    """
    total = _l2sq(rho_tilde)
    if total == 0.0:
        return {"lhs": 0.0, "bound_factor": 0.0}
    inside = project_cone_dirichlet(rho_tilde, cone)
    rest = inside - project_cone_neumann(inside, cone)
    lhs = _l2sq(rest) / total
    return {"lhs": lhs, "bound_factor": lhs / cone.a}


# -- test-field factory -----------------------------------------------------------


def _source_field(grid: Grid, mask: np.ndarray, seed: int, decay: float, n_sources: int) -> RealField:
    """Filtered superposition of random point sources on a sine-spectrum mask.

    ``mask`` is given on the full k1 range (FFT row order) and must be
    symmetric under ``k1 -> -k1``.
    """
    rng = np.random.default_rng(seed)
    c1 = rng.uniform(-np.pi, np.pi, n_sources)
    c2 = rng.uniform(0.2 * np.pi, 0.8 * np.pi, n_sources)
    w = rng.choice([-1.0, 1.0], n_sources) * rng.uniform(0.5, 1.5, n_sources)
    k1 = np.rint(np.fft.fftfreq(grid.n1) * grid.n1)[:, None]
    k2 = np.arange(1, grid.n2 + 1, dtype=float)[None, :]
    amp = np.where(mask, (k1**2 + k2**2) ** (-decay / 2.0), 0.0)
    acc = np.zeros(mask.shape, dtype=complex)
    for s in range(n_sources):
        acc += w[s] * np.exp(-1j * k1 * c1[s]) * np.sin(k2 * c2[s])
    coeffs = amp * acc
    # the unpaired Nyquist row cannot hold a complex coefficient of a real field
    coeffs[grid.n1 // 2] = 0.0
    return inverse_dirichlet(DirichletSpectrum(grid, coeffs))


def _full_k(grid):
    k1 = np.abs(np.rint(np.fft.fftfreq(grid.n1) * grid.n1))[:, None]
    k2 = np.arange(1, grid.n2 + 1, dtype=float)[None, :]
    return k1, k2


def generate_cone_field(cone: ConeSpec, seed: int, spectrum_decay: float = 3.0, *,
                        grid: Grid = Grid(256, 256), n_sources: int = 4) -> RealField:
    """Zero-x1-mean field with sine spectrum supported in ``C1``.

    Coefficients are ``|k|^-decay`` times the spectrum of a few random point
    sources, so fields are localised and anisotropic: narrow in x2, wide in x1.
    """
    k1, k2 = _full_k(grid)
    mask = cone.in_c1(k1, k2) & (k1 > 0) & (k1 < grid.n1 // 2)
    if not mask.any():
        raise ConeError(f"cone a={cone.a}, N={cone.N} holds no mode with k1 != 0 on {grid.n1}x{grid.n2}")
    return _source_field(grid, mask, seed, spectrum_decay, n_sources)


def _wrap(d):
    return (d + np.pi) % (2.0 * np.pi) - np.pi


def _packets(grid: Grid, cone: ConeSpec, seed: int, isotropic: bool, max_packets: int) -> RealField:
    x1, x2 = grid.mesh
    rng = np.random.default_rng(seed)
    f = np.zeros(grid.shape)
    for _ in range(rng.integers(1, max_packets + 1)):
        # carrier a few times the cone slope, envelope a few carrier periods wide
        K = rng.uniform(5.0, 7.0) * cone.slope1
        w = rng.uniform(3.5, 4.5) / K
        c1 = rng.uniform(-np.pi, np.pi)
        c2 = rng.uniform(0.35 * np.pi, 0.65 * np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        weight = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5)
        d1 = _wrap(x1 - c1)
        d2 = x2 - c2
        if isotropic:
            f += weight * np.exp(-(d1**2 + d2**2) / (2 * w * w)) * np.cos(K * d1 + phase)
        else:
            f += weight * np.cos(x1 - c1) * np.exp(-(d2**2) / (2 * w * w)) * np.cos(K * d2 + phase)
    return x1_fluctuation(RealField(grid, f))


def generate_cone_packets(cone: ConeSpec, seed: int, *, grid: Grid = Grid(256, 256),
                          max_packets: int = 3) -> RealField:
    """Wave packets oscillating in x2 at the lowest frequencies the cone admits.

    Each packet is ``cos(x1 - c1)`` times a Gaussian-modulated ``cos(K x2)``
    with ``K`` a few times ``a sqrt(N)``; the sum is projected onto ``C1``.
    These fields come close to the largest Nash ratio a cone field can have.
    """
    if 2.0 * cone.slope1 > grid.n2 / 4:
        raise ConeError(f"carrier for N={cone.N} is unresolved on {grid.n1}x{grid.n2}")
    return project_cone_dirichlet(_packets(grid, cone, seed, False, max_packets), cone)


def generate_isotropic_packets(cone: ConeSpec, seed: int, *, grid: Grid = Grid(256, 256),
                               max_packets: int = 3) -> RealField:
    """Baseline: packets at the same carrier scale but oscillating in x1, no cone."""
    return _packets(grid, cone, seed, True, max_packets)


# -- ensembles and time averages ---------------------------------------------------


ENSEMBLE_COLUMNS = ("N", "a", "seed", "lhs_hypothesis", "rhs_hypothesis", "nash_ratio", "leakage_ratio")


def ensemble(Ns, a: float = DEFAULT_APERTURE, members: int = 50, *, grid: Grid = Grid(256, 256),
             kind: str = "packets", decay: float = 3.0, seed0: int = 0) -> list[dict]:
    """Evaluate the hypothesis, Nash ratio and leakage for every member.

    ``kind`` is ``"packets"`` (cone wave packets), ``"baseline"`` (isotropic
    packets, no cone) or ``"power"`` (random power-law cone spectra). Seeds
    differ per N slot so the ensembles are independent draws.
    """
    makers = {
        "packets": lambda cone, seed: generate_cone_packets(cone, seed, grid=grid),
        "baseline": lambda cone, seed: generate_isotropic_packets(cone, seed, grid=grid),
        "power": lambda cone, seed: generate_cone_field(cone, seed, decay, grid=grid),
    }
    if kind not in makers:
        raise ValueError(f"unknown ensemble kind {kind!r}")
    rows = []
    for slot, N in enumerate(Ns):
        cone = ConeSpec(a, N)
        for m in range(members):
            seed = seed0 + 100_000 * slot + m
            f = makers[kind](cone, seed)
            hyp = check_mixing_hypothesis(f, N)
            rows.append({
                "N": N, "a": a, "seed": seed,
                "lhs_hypothesis": hyp["lhs"], "rhs_hypothesis": hyp["rhs"],
                "nash_ratio": nash_ratio(f),
                "leakage_ratio": leakage_check(f, cone)["lhs"],
            })
    return rows


def loglog_slope(Ns, values) -> float:
    x = np.log(np.asarray(Ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def ensemble_max(rows, key="nash_ratio"):
    Ns = sorted({r["N"] for r in rows})
    return Ns, [max(r[key] for r in rows if r["N"] == N) for N in Ns]


def write_ensemble_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ENSEMBLE_COLUMNS)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in ENSEMBLE_COLUMNS])


def time_averaged_nash(fields, times, N: float) -> dict:
    """Trapezoid time averages of the hypothesis and of both Nash sides.

    ``fields`` are density snapshots; their x1-fluctuations are used.
    """
    if len(fields) < 2 or len(fields) != len(times):
        raise ValueError("need at least two snapshots with matching times")
    h, l2, den, ratios = [], [], [], []
    for f in fields:
        ft = x1_fluctuation(f)
        cell = ft.grid.cell
        sq = float(np.sum(ft.values**2)) * cell
        l1 = float(np.sum(np.abs(ft.values))) * cell
        h.append(hminus1_norm_sq_dx1(ft))
        l2.append(sq)
        den.append(l1 * math.sqrt(grad_l2_sq(ft)))
        ratios.append(sq / den[-1] if den[-1] > 0 else math.nan)
    t = np.asarray(times, dtype=float)
    trap = lambda y: float(np.trapezoid(np.asarray(y), t))  # noqa: E731
    lhs, rhs = trap(h), trap(l2) / N
    return {
        "holds_fraction": float(np.mean([hi <= li / N for hi, li in zip(h, l2)])),
        "hypothesis_holds": bool(lhs <= rhs * (1 + 1e-12)),
        "lhs_hypothesis": lhs,
        "rhs_hypothesis": rhs,
        "aggregate_ratio": trap(l2) / trap(den),
        "max_pointwise_ratio": float(np.nanmax(ratios)),
    }
