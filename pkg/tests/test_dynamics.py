import numpy as np
import pytest

from ksipm import diagnostics
from ksipm.dynamics import (
    BLOWUP_L2,
    BLOWUP_LINF,
    DT_FLOOR,
    OK,
    SimParams,
    SimState,
    Stepper,
    chemical_field,
    rhs_nonlinear,
    run,
    step,
    velocity,
)
from ksipm.initial import gaussian_bump
from ksipm.spectral import Grid, RealField, divergence, integrate

from conftest import smooth_random

G32 = Grid(32, 32)


def field(grid, fn):
    return RealField.from_function(grid, fn)


def smooth_positive(grid, seed=0):
    f = smooth_random(grid, seed, kmax=4)
    return f * (0.5 / np.abs(f.values).max()) + 1.0


class TestParams:
    @pytest.mark.parametrize("kw", [{"cfl": 0.0}, {"cfl": 1.5}, {"dt_min": 1e-2, "dt_max": 1e-3},
                                    {"blowup_l2sq": 0.0}, {"t_end": -1.0}, {"g": np.inf}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SimParams(grid=G32, **kw)


class TestChemicalField:
    def test_constant(self):
        rho = field(G32, lambda x1, x2: 3.0 + 0 * x1)
        assert np.abs(chemical_field(rho, 3.0).values).max() < 1e-14

    def test_eigenmodes(self):
        x1, x2 = G32.mesh
        c = chemical_field(RealField(G32, 2.0 + np.cos(x2)), 2.0)
        np.testing.assert_allclose(c.values, np.cos(x2), atol=1e-12)
        pert = np.cos(2 * x1) * np.cos(x2)
        c = chemical_field(RealField(G32, 2.0 + pert), 2.0)
        np.testing.assert_allclose(c.values, pert / 5, atol=1e-12)


class TestVelocity:
    def test_x1_independent(self):
        u1, u2 = velocity(field(G32, lambda x1, x2: np.cos(x2) + 0 * x1), 1.0)
        assert max(np.abs(u1.values).max(), np.abs(u2.values).max()) < 1e-12

    def test_eigenmode(self):
        x1, x2 = G32.mesh
        u1, u2 = velocity(RealField(G32, np.sin(x1) * np.sin(x2)), 1.0)
        # psi = -(1/2) cos x1 sin x2, u = (-d2 psi, d1 psi)
        np.testing.assert_allclose(u1.values, np.cos(x1) * np.cos(x2) / 2, atol=1e-12)
        np.testing.assert_allclose(u2.values, np.sin(x1) * np.sin(x2) / 2, atol=1e-12)

    def test_darcy_curl(self):
        """curl u = g d1 rho, the curl of u + grad p = g rho e2."""
        from ksipm.spectral import ddx1, ddx2_cos_to_sin

        # sine-type in x2 so d1 rho is band-limited in the Dirichlet basis
        x1, x2 = G32.mesh
        rng = np.random.default_rng(3)
        rho = RealField(G32, sum(rng.standard_normal() * np.cos(k1 * x1 + rng.uniform(0, 6)) * np.sin(k2 * x2)
                                 for k1 in range(4) for k2 in range(1, 5)))
        g = 2.5
        u1, u2 = velocity(rho, g)
        curl = ddx1(u2).values - ddx2_cos_to_sin(u1).values
        np.testing.assert_allclose(curl, g * ddx1(rho).values, atol=1e-10)

    def test_divergence_free(self):
        u1, u2 = velocity(smooth_random(G32, 4), 1.0)
        assert np.abs(divergence(u1, u2).values).max() < 1e-11

    def test_g_zero(self):
        u1, u2 = velocity(smooth_random(G32, 5), 0.0)
        assert not u1.values.any() and not u2.values.any()


class TestRhs:
    def test_equilibrium(self):
        rho = field(G32, lambda x1, x2: 1.7 + 0 * x1)
        assert np.abs(rhs_nonlinear(rho, 1.7, 1.0).values).max() < 1e-13

    def test_integral_zero(self):
        for seed in range(3):
            rho = smooth_positive(G32, seed)
            out = rhs_nonlinear(rho, float(rho.values.mean()), 1.0)
            assert abs(integrate(out)) < 1e-10 * np.sqrt(integrate(rho * rho))

    def test_linearisation(self):
        rho_M = 2.0
        x1 = G32.mesh[0]
        errs = []
        for eps in (1e-2, 5e-3):
            rho = RealField(G32, rho_M + eps * np.cos(x1))
            out = rhs_nonlinear(rho, rho_M, 0.0)
            # -div(rho grad c) ~ -rho_M Lap c = rho_M (rho - rho_M)
            errs.append(np.abs(out.values - rho_M * eps * np.cos(x1)).max())
        assert errs[0] < 2 * 1e-4
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)

    def test_no_flux_keeps_mass_without_dealias(self):
        rho = smooth_positive(G32, 7)
        out = rhs_nonlinear(rho, float(rho.values.mean()), 1.0, dealias=False)
        assert abs(integrate(out)) < 1e-10


class TestStep:
    def test_heat_eigenmode(self):
        x2 = G32.mesh[1]
        rho0 = RealField(G32, 1.0 + np.cos(x2))
        p = SimParams(grid=G32, g=0.0, t_end=1.0, advection=False, chemotaxis=False, output_every=0.0)
        res = run(p, rho0, record=False)
        amp = float(np.sum((res.final.rho.values - 1.0) * np.cos(x2)) / np.sum(np.cos(x2) ** 2))
        assert amp == pytest.approx(np.exp(-1.0), rel=1e-6)

    def test_equilibrium_fixed_point(self):
        rho = field(G32, lambda x1, x2: 0.8 + 0 * x1)
        state = SimState.initial(rho)
        stepper = Stepper(SimParams(grid=G32, g=1.0, t_end=1.0))
        for _ in range(20):
            state = stepper.step(state).state
        assert np.abs(state.rho.values - 0.8).max() < 1e-12

    def test_step_wrapper_respects_t_end(self):
        p = SimParams(grid=G32, g=1.0, t_end=1e-4)
        out = step(SimState.initial(smooth_positive(G32)), p)
        assert out.flag == OK
        assert out.state.t == pytest.approx(1e-4, abs=1e-18)

    def test_second_order_convergence(self):
        rho0 = smooth_positive(G32, 2)

        def final(dt):
            p = SimParams(grid=G32, g=1.0, t_end=0.2, dt_max=dt, dt_min=1e-12, cfl=1.0, output_every=0.0)
            steps = []
            res = run(p, rho0, record=False, on_step=lambda o: steps.append(o.dt_used))
            assert max(steps) == pytest.approx(dt, rel=1e-9), "CFL limit must not bind"
            return res.final.rho.values

        ref = final(0.02 / 8)
        e1 = np.abs(final(0.02) - ref).max()
        e2 = np.abs(final(0.01) - ref).max()
        assert 3.0 < e1 / e2 < 5.0

    def test_blowup_thresholds(self):
        bump = gaussian_bump(G32, mass=4 * np.pi, sigma=0.5)
        p = SimParams(grid=G32, g=0.0, t_end=1.0, blowup_l2sq=1e-3)
        assert run(p, bump, record=False).reason == BLOWUP_L2
        p = SimParams(grid=G32, g=0.0, t_end=1.0, blowup_linf=1e-3)
        assert run(p, bump, record=False).reason == BLOWUP_LINF

    def test_dt_floor_returns_previous_state(self):
        bump = gaussian_bump(G32, mass=4 * np.pi, sigma=0.5)
        p = SimParams(grid=G32, g=0.0, t_end=1.0, dt_max=1.0, dt_min=0.5)
        res = run(p, bump, record=False)
        assert res.reason == DT_FLOOR
        assert res.final.t == 0.0 and res.final.step_count == 0


class TestRun:
    def test_t_end_zero(self):
        rho0 = smooth_positive(G32)
        res = run(SimParams(grid=G32, t_end=0.0), rho0)
        assert res.reason == OK
        assert res.final.rho is rho0
        assert len(res.trajectory) == 1

    def test_mass_conservation(self):
        rho0 = gaussian_bump(G32, mass=4 * np.pi, sigma=0.5)
        res = run(SimParams(grid=G32, g=1.0, t_end=0.5), rho0)
        for r in res.trajectory:
            assert abs(r.mass - 4 * np.pi) / (4 * np.pi) < 1e-12

    def test_x1_independent_stays_1d(self):
        rho0 = field(G32, lambda x1, x2: 1.0 + 0.5 * np.cos(x2) + 0.2 * np.cos(2 * x2) + 0 * x1)
        res = run(SimParams(grid=G32, g=0.0, t_end=0.5), rho0, record=False)
        v = res.final.rho.values
        assert np.abs(v - v[:1]).max() < 1e-10

    def test_reflection_symmetry(self):
        x1, x2 = G32.mesh
        rho0 = RealField(G32, 1.0 + 0.5 * np.cos(x1) * np.cos(x2) + 0.3 * np.cos(2 * x1) * np.cos(3 * x2))
        res = run(SimParams(grid=G32, g=1.0, t_end=0.5), rho0, record=False)
        v = res.final.rho.values
        # x1 -> -x1 maps node i to node (n1 - i) mod n1
        mirrored = np.roll(v[::-1], 1, axis=0)
        assert np.abs(v - mirrored).max() < 1e-9

    def test_output_times_and_sinks(self):
        seen = []
        p = SimParams(grid=G32, g=1.0, t_end=0.05, output_every=0.01)
        res = run(p, smooth_positive(G32), [lambda rec, st: seen.append(rec.t)])
        np.testing.assert_allclose(seen, np.arange(6) * 0.01, atol=1e-12)
        assert [r.t for r in res.trajectory] == seen

    def test_deterministic(self):
        p = SimParams(grid=G32, g=1.0, t_end=0.05)
        a = run(p, smooth_positive(G32, 3))
        b = run(p, smooth_positive(G32, 3))
        assert a.trajectory == b.trajectory

    def test_naive_energy_constant_stable(self):
        rho0 = gaussian_bump(Grid(64, 64), mass=4 * np.pi, sigma=0.4)
        needed = []
        for dt in (2e-3, 1e-3):
            p = SimParams(grid=rho0.grid, g=1.0, t_end=0.1, dt_max=dt, output_every=0.01)
            rec = run(p, rho0).trajectory
            rho_M = 4 * np.pi / rho0.grid.area
            needed.append(diagnostics.naive_energy_residual(rec, rho_M).C_needed)
        assert np.isfinite(needed).all()
        assert needed[0] == pytest.approx(needed[1], rel=0.05)
