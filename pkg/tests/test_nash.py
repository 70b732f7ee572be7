import math

import numpy as np
import pytest

from ksipm import nash as Nh
from ksipm.spectral import Grid, RealField, forward_dirichlet, grad_l2_sq, inner, x1_fluctuation

from conftest import noise

G64 = Grid(64, 64)


def mode(grid, k1, k2):
    x1, x2 = grid.mesh
    return RealField(grid, np.cos(k1 * x1) * np.sin(k2 * x2))


class TestConeSpec:
    @pytest.mark.parametrize("a,N", [(0.0, 4), (0.6, 4), (0.25, 0.5)])
    def test_invalid(self, a, N):
        with pytest.raises(ValueError):
            Nh.ConeSpec(a, N)

    def test_membership(self):
        cone = Nh.ConeSpec(0.25, 64)
        assert cone.slope1 == pytest.approx(2.0) and cone.slope2 == pytest.approx(0.5)
        assert cone.in_c1(1, 2) and not cone.in_c1(1, 1.99)
        assert cone.in_c2(2, 1) and not cone.in_c2(3, 1)


class TestProjections:
    def test_mode_inside_unchanged(self):
        cone = Nh.ConeSpec(0.25, 64)
        f = mode(G64, 1, math.ceil(cone.slope1) + 1)
        np.testing.assert_allclose(Nh.project_cone_dirichlet(f, cone).values, f.values, atol=1e-12)

    def test_mode_outside_removed(self):
        cone = Nh.ConeSpec(0.25, 64)
        f = mode(G64, G64.n1 // 4, 1)
        assert np.abs(Nh.project_cone_dirichlet(f, cone).values).max() < 1e-12

    @pytest.mark.parametrize("project", [Nh.project_cone_dirichlet, Nh.project_cone_neumann])
    def test_idempotent_and_orthogonal(self, project):
        cone = Nh.ConeSpec(0.25, 64)
        f = x1_fluctuation(noise(G64, 1))
        p = project(f, cone)
        np.testing.assert_allclose(project(p, cone).values, p.values, atol=1e-12)
        q = f - p
        assert inner(f, f) == pytest.approx(inner(p, p) + inner(q, q), rel=1e-10)
        assert abs(inner(p, q)) < 1e-12 * inner(f, f)

    def test_requires_fluctuation(self):
        with pytest.raises(Nh.ConeError):
            Nh.project_cone_dirichlet(noise(G64, 2) + 1.0, Nh.ConeSpec(0.25, 16))


class TestHypothesis:
    @pytest.mark.parametrize("K", [1, 3, 6])
    def test_single_mode_low_k1(self, K):
        f = mode(G64, 1, K)
        res = Nh.check_mixing_hypothesis(f, 1.0)
        assert res["lhs"] / inner(f, f) == pytest.approx(1 / (1 + K * K), rel=1e-12)
        for N in (1 + K * K - 0.5, 1 + K * K + 0.5):
            assert Nh.check_mixing_hypothesis(f, N)["holds"] == (1 + K * K >= N)

    def test_single_mode_high_k1(self):
        M = 20
        f = mode(G64, M, 1)
        res = Nh.check_mixing_hypothesis(f, 2.0)
        assert res["lhs"] / inner(f, f) == pytest.approx(M * M / (M * M + 1), rel=1e-12)
        assert not res["holds"]

    def test_zero(self):
        res = Nh.check_mixing_hypothesis(RealField.zeros(G64), 10.0)
        assert res["holds"] and res["lhs"] == 0 and res["rhs"] == 0


class TestNashRatio:
    def test_sin_sin(self):
        # ||f||^2 = pi^2/2, ||f||_1 = 8, ||grad f||^2 = pi^2
        x1, x2 = Grid(128, 128).mesh
        r = Nh.nash_ratio(RealField(Grid(128, 128), np.sin(x1) * np.sin(x2)))
        assert 0 < r < math.inf
        assert r == pytest.approx(math.pi / 16, rel=1e-2)

    def test_scale_invariant(self):
        f = x1_fluctuation(noise(G64, 3))
        assert Nh.nash_ratio(f * 7.5) == pytest.approx(Nh.nash_ratio(f), rel=1e-12)

    def test_zero_field(self):
        with pytest.raises(ValueError):
            Nh.nash_ratio(RealField.zeros(G64))

    def test_baseline_bounded_and_resolution_stable(self):
        maxima = []
        for grid in (Grid(128, 128), Grid(256, 256)):
            rows = Nh.ensemble([16, 64, 256], 0.25, 10, grid=grid, kind="baseline")
            maxima.append(max(r["nash_ratio"] for r in rows))
        assert maxima[0] < 1.0
        assert maxima[0] == pytest.approx(maxima[1], rel=0.02)


class TestLeakage:
    def test_zero(self):
        assert Nh.leakage_check(RealField.zeros(G64), Nh.ConeSpec(0.25, 16))["lhs"] == 0.0

    def test_single_mode_overlap(self):
        cone = Nh.ConeSpec(0.5, 256)
        k2 = 9
        f = mode(G64, 1, k2)
        assert cone.in_c1(1, k2)
        y, h = G64.x2, G64.h2
        # cosine coefficients of sin(k2 y) by midpoint quadrature, the rule the transform inverts exactly
        leak = 0.0
        for m in range(G64.n2):
            if cone.in_c2(1, m):
                continue
            overlap = np.sum(np.sin(k2 * y) * np.cos(m * y)) * h
            A = overlap / np.pi if m == 0 else 2 * overlap / np.pi
            leak += A * A * (np.pi if m == 0 else np.pi / 2)
        assert Nh.leakage_check(f, cone)["lhs"] == pytest.approx(leak / (np.pi / 2), rel=1e-10)

    def test_aperture_sweep_monotone_and_linear_bound(self):
        kappas = []
        for grid in (Grid(64, 64), Grid(128, 128)):
            kappa = 0.0
            for N in (64, 256):
                for seed in range(3):
                    # drawn in the narrowest cone, so each field lies in every cone of the sweep
                    f = Nh.generate_cone_field(Nh.ConeSpec(0.4, N), seed, grid=grid)
                    leak = [Nh.leakage_check(f, Nh.ConeSpec(a, N)) for a in (0.05, 0.1, 0.2, 0.4)]
                    lhs = [x["lhs"] for x in leak]
                    assert all(b >= a * (1 - 1e-9) for a, b in zip(lhs, lhs[1:]))
                    assert lhs[-1] > lhs[0]
                    kappa = max(kappa, max(x["bound_factor"] for x in leak))
            kappas.append(kappa)
        assert kappas[0] == pytest.approx(kappas[1], rel=0.02)


class TestGenerators:
    def test_deterministic(self):
        cone = Nh.ConeSpec(0.25, 64)
        a = Nh.generate_cone_field(cone, 5, grid=G64)
        b = Nh.generate_cone_field(cone, 5, grid=G64)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, Nh.generate_cone_field(cone, 6, grid=G64).values)

    def test_support_and_mean(self):
        cone = Nh.ConeSpec(0.25, 64)
        f = Nh.generate_cone_field(cone, 1, grid=G64)
        assert np.abs(f.values.mean(axis=0)).max() < 1e-12
        s = forward_dirichlet(f)
        k1 = np.abs(s.k1)[:, None]
        k2 = s.k2[None, :]
        outside = ~cone.in_c1(k1, k2)
        assert np.abs(s.coeffs[outside]).max() < 1e-12 * np.abs(s.coeffs).max()

    @pytest.mark.parametrize("N", [16, 64, 256])
    def test_hypothesis_at_cone_strength(self, N):
        cone = Nh.ConeSpec(0.25, N)
        for seed in range(5):
            f = Nh.generate_cone_field(cone, seed, grid=G64)
            assert Nh.check_mixing_hypothesis(f, 1 + cone.a**2 * N)["holds"]
            g = Nh.generate_cone_packets(cone, seed, grid=Grid(128, 128))
            assert Nh.check_mixing_hypothesis(g, 1 + cone.a**2 * N)["holds"]

    def test_decay_monotone(self):
        cone = Nh.ConeSpec(0.25, 16)
        ratios = []
        for decay in (1.5, 2.5, 3.5, 4.5):
            fs = [Nh.generate_cone_field(cone, s, decay, grid=G64) for s in range(8)]
            ratios.append(np.mean([math.sqrt(grad_l2_sq(f) / inner(f, f)) for f in fs]))
        assert all(b < a for a, b in zip(ratios, ratios[1:]))

    def test_empty_cone(self):
        with pytest.raises(Nh.ConeError):
            Nh.generate_cone_field(Nh.ConeSpec(0.5, 1e6), 0, grid=Grid(16, 16))


class TestTimeAveraged:
    def test_constant_in_time(self):
        f = Nh.generate_cone_field(Nh.ConeSpec(0.25, 64), 0, grid=G64) + 1.0
        res = Nh.time_averaged_nash([f, f, f], [0.0, 0.5, 1.0], 2.0)
        assert res["aggregate_ratio"] == pytest.approx(Nh.nash_ratio(x1_fluctuation(f)), rel=1e-12)

    def test_mediant(self):
        cone = Nh.ConeSpec(0.25, 64)
        fields = [Nh.generate_cone_field(cone, s, grid=G64) for s in range(5)]
        res = Nh.time_averaged_nash(fields, [0.0, 0.1, 0.3, 0.35, 1.0], 1 + cone.a**2 * 64)
        assert res["hypothesis_holds"]
        assert res["aggregate_ratio"] <= res["max_pointwise_ratio"] * (1 + 1e-12)

    def test_violation_flagged(self):
        f = mode(G64, 20, 1)
        res = Nh.time_averaged_nash([f, f * 2.0], [0.0, 1.0], 50.0)
        assert not res["hypothesis_holds"]
        assert res["aggregate_ratio"] > 0

    def test_needs_two(self):
        with pytest.raises(ValueError):
            Nh.time_averaged_nash([mode(G64, 1, 1)], [0.0], 2.0)
