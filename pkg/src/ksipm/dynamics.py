"""Time integration of the Keller-Segel system coupled to Darcy flow.

The density obeys

    d_t rho + u . grad rho - Lap rho + div(rho grad c) = 0,
    -Lap_N c = rho - rho_M,   u + grad p = g rho e2,   div u = 0,

with no-flux conditions on ``x2 in {0, pi}``. Diffusion is integrated
exactly in the cosine basis; the transport terms are advanced with Heun's
method under the integrating factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import _kernels as K
from .spectral import (
    Grid,
    RealField,
    basis,
    c2s_deriv,
    fwd_c,
    fwd_s,
    fwd_s_band,
    inv_c,
    inv_s,
    perp_grad,
    s2c_deriv,
    solve_poisson_dirichlet,
    solve_poisson_neumann,
    ddx1,
)

OK = "ok"
BLOWUP_LINF = "blowup_linf"
BLOWUP_L2 = "blowup_l2"
DT_FLOOR = "dt_floor"
NONFINITE = "nonfinite"
FLAGS = (OK, BLOWUP_LINF, BLOWUP_L2, DT_FLOOR, NONFINITE)

# discrete maximum-principle monitor: min rho >= -NEG_RTOL * max rho
NEG_RTOL = 1e-6


@dataclass(frozen=True)
class SimParams:
    """Run controls.

    ``output_every = 0`` emits a record after every step. The three term
    switches are test hooks; ``diffusive_cap`` adds the explicit-diffusion
    limit ``cfl h^2 / 4`` to the step-size rule.
    """

    grid: Grid
    g: float = 0.0
    t_end: float = 1.0
    cfl: float = 0.5
    dt_max: float = 1e-3
    dt_min: float = 1e-9
    blowup_linf: float = 1e6
    blowup_l2sq: float = 1e8
    dealias: bool = True
    output_every: float = 0.01
    advection: bool = True
    chemotaxis: bool = True
    diffusion: bool = True
    diffusive_cap: bool = False

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not 0.0 < self.dt_min < self.dt_max:
            raise ValueError(f"need 0 < dt_min < dt_max, got {self.dt_min}, {self.dt_max}")
        if self.blowup_linf <= 0 or self.blowup_l2sq <= 0:
            raise ValueError("blowup thresholds must be positive")
        if self.t_end < 0 or self.output_every < 0:
            raise ValueError("t_end and output_every must be nonnegative")
        if not math.isfinite(self.g):
            raise ValueError("g must be finite")


@dataclass(frozen=True)
class SimState:
    t: float
    rho: RealField
    rho_M: float
    step_count: int = 0

    @classmethod
    def initial(cls, rho0: RealField, t: float = 0.0) -> "SimState":
        return cls(t=t, rho=rho0, rho_M=float(np.mean(rho0.values)), step_count=0)


@dataclass(frozen=True)
class StepOutcome:
    state: SimState
    dt_used: float
    flag: str = OK
    min_rho: float = 0.0
    negative: bool = False


@dataclass
class RunResult:
    final: SimState
    reason: str
    trajectory: list = field(default_factory=list)
    negativity_events: int = 0
    min_rho_ratio: float = 0.0


# -- field-level operators -----------------------------------------------------


def chemical_field(rho: RealField, rho_M: float) -> RealField:
    """``c = (-Lap_N)^{-1}(rho - rho_M)``."""
    return solve_poisson_neumann(RealField(rho.grid, rho.values - rho_M))


def velocity(rho: RealField, g: float) -> tuple[RealField, RealField]:
    """Darcy velocity ``u = grad_perp psi`` with ``psi = -g (-Lap_D)^{-1} d1 rho``.

    The minus sign makes ``curl u = d1 u2 - d2 u1 = g d1 rho``, i.e. the curl
    of ``u + grad p = g rho e2``.
    """
    if g == 0.0:
        z = RealField.zeros(rho.grid)
        return z, z
    psi = solve_poisson_dirichlet(ddx1(rho))
    u1, u2 = perp_grad(psi)
    return u1 * (-g), u2 * (-g)


class _Operator:
    """Nonlinear right-hand side on raw cosine spectra, with work tables cached."""

    def __init__(self, params: SimParams):
        self.p = params
        self.b = basis(params.grid)
        self.n1 = params.grid.n1
        if params.dealias:
            # the 2/3 masks are rectangular: leading rows and columns survive
            self.rows = int(self.b.dealias_c[:, 0].sum())
            self.cc = int(self.b.dealias_c[0].sum())
            self.cs = int(self.b.dealias_s[0].sum())
        else:
            self.rows = self.cc = self.cs = None

    def fields(self, X):
        """Dealiased density plus spectra of ``psi`` (sine) and ``c`` (cosine)."""
        b, p = self.b, self.p
        if p.dealias:
            Xd = np.zeros_like(X)
            Xd[:self.rows, :self.cc] = X[:self.rows, :self.cc]
            X = Xd
        rho = inv_c(X, self.n1, self.cc)
        C = X * b.inv_lap_c if p.chemotaxis else None
        if p.advection and p.g != 0.0:
            S = fwd_s_band(rho, self.rows, self.cs) if p.dealias else fwd_s(rho)
            Psi = (-p.g) * b.ik1 * S * b.inv_lap_s
        else:
            Psi = None
        return rho, Psi, C

    def _div(self, F1, F2):
        b = self.b
        return -(b.ik1 * fwd_c(F1) + s2c_deriv(fwd_s(F2)))

    def rhs(self, X):
        """Nonlinear tendency and the transport speed ``max(|u| + |grad c|)``."""
        rho, Psi, C = self.fields(X)
        b, n1, cc, cs = self.b, self.n1, self.cc, self.cs
        if Psi is None and C is None:
            return np.zeros_like(X), 0.0
        zero = np.zeros_like(rho)
        if Psi is not None:
            u1, u2 = inv_c(-s2c_deriv(Psi), n1, cc), inv_s(b.ik1 * Psi, n1, cs)
        else:
            u1 = u2 = zero
        if C is not None:
            c1, c2 = inv_c(b.ik1 * C, n1, cc), inv_s(c2s_deriv(C), n1, cs)
        else:
            c1 = c2 = zero
        F1, F2, vmax = K.fluxes_speed(rho, u1, u2, c1, c2)
        return self._div(F1, F2), vmax

    def rhs_fast(self, X):
        """Same tendency without the speed; velocity and drift summed spectrally."""
        rho, Psi, C = self.fields(X)
        b, n1 = self.b, self.n1
        if Psi is None and C is None:
            return np.zeros_like(X)
        s1 = 0.0
        s2 = 0.0
        if Psi is not None:
            s1 = -s2c_deriv(Psi)
            s2 = b.ik1 * Psi
        if C is not None:
            s1 = s1 + b.ik1 * C
            s2 = s2 + c2s_deriv(C)
        F1, F2 = K.fluxes(rho, inv_c(s1, n1, self.cc), inv_s(s2, n1, self.cs))
        return self._div(F1, F2)


def rhs_nonlinear(rho: RealField, rho_M: float, g: float, *, dealias: bool = True,
                  advection: bool = True, chemotaxis: bool = True) -> RealField:
    """``-div(rho u) - div(rho grad c)`` evaluated pseudo-spectrally."""
    params = SimParams(grid=rho.grid, g=g, dealias=dealias, advection=advection, chemotaxis=chemotaxis)
    out, _ = _Operator(params).rhs(fwd_c(rho.values))
    return RealField(rho.grid, inv_c(out, rho.grid.n1))


# -- stepping -------------------------------------------------------------------


class Stepper:
    """Reusable single-step integrator for one parameter set."""

    def __init__(self, params: SimParams):
        self.p = params
        self.op = _Operator(params)
        self.b = self.op.b
        grid = params.grid
        self.mass_mode = 2.0 * grid.n1 * grid.n2
        self.h = grid.h
        self._decay_dt = None
        self._decay = None
        # spectrum of the last field this stepper produced, reused as the next X0
        self._carry = (None, None)

    def decay(self, dt):
        if dt != self._decay_dt:
            if self.p.diffusion:
                self._decay = np.exp(-self.b.lap_c * dt)
            else:
                self._decay = np.ones_like(self.b.lap_c)
            self._decay_dt = dt
        return self._decay

    def choose_dt(self, vmax):
        p = self.p
        dt = p.dt_max
        if vmax > 0.0:
            dt = min(dt, p.cfl * self.h / vmax)
        if p.diffusive_cap:
            dt = min(dt, p.cfl * self.h**2 / 4.0)
        return dt

    def step(self, state: SimState, t_stop: float | None = None) -> StepOutcome:
        """Advance one step, never past ``t_stop``."""
        p = self.p
        last_values, last_X = self._carry
        X0 = last_X if state.rho.values is last_values else fwd_c(state.rho.values)
        N0, vmax = self.op.rhs(X0)
        if not math.isfinite(vmax):
            return StepOutcome(state, 0.0, NONFINITE)
        dt = self.choose_dt(vmax)
        if dt < p.dt_min:
            return StepOutcome(state, 0.0, DT_FLOOR)
        t_new = state.t + dt
        if t_stop is not None and t_new >= t_stop - 1e-12 * max(1.0, abs(t_stop)):
            dt = t_stop - state.t
            t_new = t_stop
        E = self.decay(dt)
        Xp = K.heun_predict(E, X0, N0, dt)
        Xp[0, 0] = self.mass_mode * state.rho_M
        N1 = self.op.rhs_fast(Xp)
        X1 = K.heun_correct(E, X0, N0, N1, dt)
        X1[0, 0] = self.mass_mode * state.rho_M
        values = inv_c(X1, p.grid.n1)
        lo, hi, dev, finite = K.field_stats(values, state.rho_M)
        if not finite:
            return StepOutcome(state, dt, NONFINITE)
        new = SimState(t=t_new, rho=RealField(p.grid, values), rho_M=state.rho_M,
                       step_count=state.step_count + 1)
        self._carry = (new.rho.values, X1)
        negative = lo < -NEG_RTOL * hi
        flag = OK
        if dev > p.blowup_linf:
            flag = BLOWUP_LINF
        elif float(np.sum((values - state.rho_M) ** 2)) * p.grid.cell > p.blowup_l2sq:
            flag = BLOWUP_L2
        return StepOutcome(new, dt, flag, min_rho=lo, negative=negative)


def step(state: SimState, params: SimParams) -> StepOutcome:
    """One integrating-factor Heun step (convenience wrapper around ``Stepper``)."""
    return Stepper(params).step(state, params.t_end)


def _next_output(t, every, t_end):
    if every <= 0.0:
        return t_end
    k = math.floor(t / every + 1e-9) + 1
    return min(k * every, t_end)


def run(params: SimParams, rho0: RealField | SimState, sinks: Iterable[Callable] = (),
        *, record: bool = True, nash: bool = False, on_step: Callable | None = None) -> RunResult:
    """Integrate from ``rho0`` to ``params.t_end`` or the first non-ok flag.

    Records are built at the start, at every multiple of ``output_every``
    (every step when it is zero) and at the final time. Each sink is called
    as ``sink(record, state)``. Output times sit on a global grid in ``t`` so a
    run restarted from a stored state replays the same step sequence.
    """
    from .diagnostics import make_record

    state = rho0 if isinstance(rho0, SimState) else SimState.initial(rho0)
    sinks = list(sinks)
    result = RunResult(final=state, reason=OK)

    def emit(st, dt):
        if not record and not sinks:
            return
        rec = make_record(st, params.g, dt, nash=nash)
        if record:
            result.trajectory.append(rec)
        for sink in sinks:
            sink(rec, st)

    emit(state, 0.0)
    stepper = Stepper(params)
    min_ratio = 0.0
    while state.t < params.t_end:
        target = _next_output(state.t, params.output_every, params.t_end)
        out = stepper.step(state, target)
        if out.flag in (NONFINITE, DT_FLOOR):
            result.reason = out.flag
            break
        state = out.state
        if out.negative:
            result.negativity_events += 1
        hi = float(state.rho.values.max())
        if hi > 0:
            min_ratio = min(min_ratio, out.min_rho / hi)
        if on_step is not None:
            on_step(out)
        if params.output_every <= 0.0 or state.t >= target or out.flag != OK:
            emit(state, out.dt_used)
        if out.flag != OK:
            result.reason = out.flag
            break
    result.final = state
    result.min_rho_ratio = min_ratio
    return result
