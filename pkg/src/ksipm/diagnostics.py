"""Scalar diagnostics of a density snapshot and residual checks of the energy laws.

The potential energy ``E = \\int rho (pi - x2)`` evolves as

    E' = -g ||d1 rho||^2_{H^-1_0} + \\int d2 rho - \\int rho d2 c,

and its three terms are recorded individually so the identity can be checked
against the time series of ``E`` itself.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .spectral import (
    RealField,
    basis,
    boundary_traces_raw,
    c2s_deriv,
    fwd_c,
    grad_l2_sq,
    hminus1_norm_sq_dx1,
    inv_s,
)

COLUMNS = (
    "t", "dt", "mass", "l2sq", "l2sq_bar", "l2sq_tilde", "linf", "min_rho", "grad_l2sq",
    "E", "term_main", "term_diff", "term_ks", "lambda_flux", "nash_ratio",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    dt: float
    mass: float
    l2sq: float
    l2sq_bar: float
    l2sq_tilde: float
    linf: float
    min_rho: float
    grad_l2sq: float
    E: float
    term_main: float
    term_diff: float
    term_ks: float
    lambda_flux: float
    nash_ratio: float | None = None

    @property
    def dE(self) -> float:
        return self.term_main + self.term_diff + self.term_ks


def potential_energy(rho: RealField) -> float:
    """Nodal quadrature of ``rho (pi - x2)``."""
    g = rho.grid
    return float(np.sum(rho.values @ (np.pi - g.x2))) * g.cell


def _term_diff_raw(v: np.ndarray, cell_x1: float) -> float:
    bottom, top = boundary_traces_raw(v)
    return float(np.sum(top - bottom)) * cell_x1


def _term_ks_raw(v: np.ndarray, rho_M: float, grid) -> float:
    b = basis(grid)
    X = fwd_c(v)
    C = X * b.inv_lap_c
    c2 = inv_s(c2s_deriv(C), grid.n1)
    return -float(np.sum(v * c2)) * grid.cell


def dE_terms(rho: RealField, rho_M: float, g: float) -> tuple[float, float, float]:
    """``(term_main, term_diff, term_ks)`` of the potential-energy law.

    ``term_diff = \\int (rho(x1, pi) - rho(x1, 0)) dx1`` uses the cosine series
    summed at the walls; ``term_ks = -\\int rho d2 c`` is a nodal quadrature.
    """
    grid = rho.grid
    term_main = -g * hminus1_norm_sq_dx1(rho) if g != 0.0 else 0.0
    term_diff = _term_diff_raw(rho.values, grid.h1)
    term_ks = _term_ks_raw(rho.values, rho_M, grid)
    return term_main, term_diff, term_ks


def compute_record(rho: RealField, rho_M: float, g: float, t: float, dt: float,
                   *, nash: bool = False) -> DiagnosticsRecord:
    grid = rho.grid
    v = rho.values
    cell = grid.cell
    dev = v - rho_M
    bar = dev.mean(axis=0)
    tilde = v - v.mean(axis=0, keepdims=True)
    l2sq_bar = float(np.sum(bar**2)) * grid.n1 * cell
    l2sq_tilde = float(np.sum(tilde**2)) * cell
    main, diff, ks = dE_terms(rho, rho_M, g)
    ratio = None
    if nash:
        from .nash import nash_ratio

        try:
            ratio = nash_ratio(RealField(grid, tilde))
        except ValueError:
            ratio = None
    return DiagnosticsRecord(
        t=float(t), dt=float(dt),
        mass=float(np.sum(v)) * cell,
        l2sq=float(np.sum(dev**2)) * cell,
        l2sq_bar=l2sq_bar,
        l2sq_tilde=l2sq_tilde,
        linf=float(np.max(np.abs(dev))),
        min_rho=float(v.min()),
        grad_l2sq=grad_l2_sq(rho),
        E=potential_energy(rho),
        term_main=main, term_diff=diff, term_ks=ks,
        lambda_flux=abs(diff),
        nash_ratio=ratio,
    )


def make_record(state, g: float, dt: float, *, nash: bool = False) -> DiagnosticsRecord:
    return compute_record(state.rho, state.rho_M, g, state.t, dt, nash=nash)


# -- identity residuals ----------------------------------------------------------


def energy_identity_residual(records) -> float:
    """``|E_end - E_start - trapezoid(E')|`` over a window, scaled by ``max(|E|, 1)``."""
    if len(records) < 2:
        raise ValueError("need at least two records")
    t = np.array([r.t for r in records])
    rate = np.array([r.dE for r in records])
    E = np.array([r.E for r in records])
    jump = E[-1] - E[0] - float(np.trapezoid(rate, t))
    return abs(jump) / max(float(np.max(np.abs(E))), 1.0)


def split_windows(records, every: float):
    """Group consecutive records into windows ``[k every, (k+1) every]``; endpoints are shared."""
    if every <= 0:
        raise ValueError("window length must be positive")
    windows, current = [], [records[0]]
    edge = every
    for r in records[1:]:
        current.append(r)
        if r.t >= edge * (1 - 1e-12):
            windows.append(current)
            current = [r]
            edge = (math.floor(r.t / every + 1e-9) + 1) * every
    if len(current) > 1:
        windows.append(current)
    return windows


def interval_residuals(records, every: float) -> list[float]:
    return [energy_identity_residual(w) for w in split_windows(records, every)]


@dataclass(frozen=True)
class NaiveEnergyReport:
    lhs: float
    rhs: float
    margin: float
    C_needed: float


def naive_energy_residual(records, rho_M: float, C: float = 1.0) -> NaiveEnergyReport:
    """Both sides of ``d/dt l2sq + ||grad rho||^2 <= C l2sq^2 + 2 rho_M l2sq``, integrated.

    ``C_needed`` is the smallest constant that would make the window satisfy
    the inequality (zero if it holds even with ``C = 0``).
    """
    if len(records) < 2:
        raise ValueError("need at least two records")
    t = np.array([r.t for r in records])
    l2 = np.array([r.l2sq for r in records])
    grad = np.array([r.grad_l2sq for r in records])
    lhs = l2[-1] - l2[0] + float(np.trapezoid(grad, t))
    quartic = float(np.trapezoid(l2**2, t))
    linear = 2.0 * rho_M * float(np.trapezoid(l2, t))
    rhs = C * quartic + linear
    need = max(0.0, (lhs - linear) / quartic) if quartic > 0 else 0.0
    return NaiveEnergyReport(lhs=lhs, rhs=rhs, margin=rhs - lhs, C_needed=need)


def ks_bound_constant(rec: DiagnosticsRecord, rho_M: float) -> float:
    """``|term_ks| / (rho_M^(2/3) l2sq^(2/3))``, the empirical constant of the KS-term bound."""
    if rec.l2sq <= 0:
        return 0.0
    return abs(rec.term_ks) / (rho_M ** (2 / 3) * rec.l2sq ** (2 / 3))


# -- CSV ---------------------------------------------------------------------------


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


class CsvSink:
    """Append-only diagnostics CSV with the fixed column order."""

    def __init__(self, path, append: bool = False):
        self.path = path
        self._fh = open(path, "a" if append else "w", newline="")
        self._w = csv.writer(self._fh)
        if not append or self._fh.tell() == 0:
            self._w.writerow(COLUMNS)

    def __call__(self, record, state=None):
        emit(record, self)

    def write(self, record: DiagnosticsRecord):
        d = asdict(record)
        self._w.writerow([_fmt(d[c]) for c in COLUMNS])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def emit(record: DiagnosticsRecord, sink) -> None:
    """Append ``record`` to ``sink``: a ``CsvSink`` or any list-like with ``append``."""
    if hasattr(sink, "write"):
        sink.write(record)
    else:
        sink.append(record)


def read_csv(path) -> list[DiagnosticsRecord]:
    out = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected diagnostics header {header}")
        names = [f.name for f in fields(DiagnosticsRecord)]
        for row in r:
            vals = [float(x) if x != "" else None for x in row]
            out.append(DiagnosticsRecord(**dict(zip(names, vals))))
    return out
