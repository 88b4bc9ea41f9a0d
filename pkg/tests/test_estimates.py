from functools import partial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anideg import AnisotropySpec, RegularizedMaterial, TorusGrid, log_quench
from anideg.anisotropy import agrad_lipschitz, certify_constants, eval_Agrad
from anideg.diagnostics import DiagnosticsRecord
from anideg.errors import EstimateViolated, SlopeUndefined
from anideg.estimates import (
    chain_rule_defect,
    check_energy_law,
    check_energy_monotone,
    check_entropy_estimate,
    check_excess_l2_bound,
    check_h2_monotonicity,
    check_lipschitz_composition,
    check_mass_conservation,
    check_weak_residual,
    fit_excess_slope,
    h2_chain,
    run_delta_continuation,
    smooth_test_fields,
)
from anideg.material import mobility_lipschitz
from anideg.stepper import SimState, SolverConfig, Trajectory, advance, step_imex

ELLIPSOID = AnisotropySpec.ellipsoid_sum([np.diag([1.0, 0.25]), [[0.5, 0.2], [0.2, 0.8]]])
certify_constants(ELLIPSOID)


def rec(t, E, D, **kw):
    base = dict(t=t, mass=1.0, energy=E, entropy=0.0, dissipation_cum=D, excess_L2=0.0, hess_sq_cum=0.0, dt=0.1, accepted=True)
    base.update(kw)
    return DiagnosticsRecord(**base)


class TestEnergyChecks:
    def test_energy_law_pass(self):
        recs = [rec(0, 1.0, 0.0), rec(1, 0.8, 0.4), rec(2, 0.7, 0.5)]
        assert check_energy_law(recs).passed

    def test_energy_law_violation(self):
        recs = [rec(0, 1.0, 0.0), rec(1, 0.9, 0.4)]
        with pytest.raises(EstimateViolated) as err:
            check_energy_law(recs)
        assert err.value.record.t == 1
        assert not check_energy_law(recs, strict=False).passed

    def test_rejected_rows_ignored(self):
        recs = [rec(0, 1.0, 0.0), rec(0, 5.0, 0.0, accepted=False), rec(1, 0.9, 0.1)]
        assert check_energy_law(recs).passed and check_energy_monotone(recs).passed

    def test_monotone_violation(self):
        with pytest.raises(EstimateViolated):
            check_energy_monotone([rec(0, 1.0, 0.0), rec(1, 1.0 + 1e-9, 0.0)])

    def test_mass(self):
        assert check_mass_conservation([rec(0, 1, 0), rec(1, 1, 0, mass=1.0 + 1e-14)]).passed
        with pytest.raises(EstimateViolated):
            check_mass_conservation([rec(0, 1, 0), rec(1, 1, 0, mass=1.0 + 1e-9)])


class TestH2:
    @given(st.integers(0, 10**6), st.sampled_from([1, 2, 3]))
    def test_isotropic_equality(self, seed, d):
        grid = TorusGrid.uniform(d, 8 if d == 3 else 16, 5.0)
        phi = np.random.default_rng(seed).standard_normal(grid.shape)
        lhs, rhs, diff, shift = h2_chain(grid, phi, AnisotropySpec.isotropic(d))
        assert lhs == pytest.approx(rhs, rel=1e-12)
        assert diff == pytest.approx(rhs, rel=1e-12) and shift == pytest.approx(rhs, rel=1e-12)

    @given(st.integers(0, 10**6))
    def test_ellipsoid_inequality(self, seed):
        grid = TorusGrid((16, 32), (0, 0), (4.0, 6.0))
        for phi in smooth_test_fields(grid, 3, seed, kmax=6) + [np.random.default_rng(seed).standard_normal(grid.shape)]:
            lhs, rhs, diff, shift = h2_chain(grid, phi, ELLIPSOID)
            assert diff == pytest.approx(rhs, rel=1e-10) and shift == pytest.approx(rhs, rel=1e-10)
            assert check_h2_monotonicity(grid, phi, ELLIPSOID)[2]

    def test_violation_detected(self):
        grid = TorusGrid.uniform(1, 16, 4.0)
        phi = np.sin(2 * np.pi * np.arange(16) / 16)
        spec = AnisotropySpec.isotropic(1)
        certify_constants(spec)
        spec.constants = spec.constants._replace(cA=2.0)
        with pytest.raises(EstimateViolated):
            check_h2_monotonicity(grid, phi, spec)


class TestLipschitzComposition:
    @given(st.integers(0, 10**6))
    def test_mobility_and_gradient(self, seed):
        grid = TorusGrid.uniform(2, 16, 3.0)
        mat = RegularizedMaterial(log_quench(), 0.05)
        for f in smooth_test_fields(grid, 5, seed):
            u = 2 * f / np.max(np.abs(f))
            assert check_lipschitz_composition(grid, u, mat.b, mobility_lipschitz(mat.base))[2]
            g = grid.grad(f)
            assert check_lipschitz_composition(grid, g, partial(eval_Agrad, ELLIPSOID), agrad_lipschitz(ELLIPSOID))[2]

    def test_too_small_constant_fails(self):
        grid = TorusGrid.uniform(1, 16, 3.0)
        u = np.linspace(-0.5, 0.5, 16)
        with pytest.raises(EstimateViolated):
            check_lipschitz_composition(grid, u, lambda r: 3 * r, 1.0)

    def test_chain_rule_defect_vanishes_for_linear_maps(self):
        grid = TorusGrid.uniform(1, 32, 3.0)
        phi = 0.3 * np.sin(2 * np.pi * np.arange(32) / 32)
        mat = RegularizedMaterial(log_quench(), 0.05)
        # b is quadratic, so the defect is the second-order term h/2 b'' (d+ phi)^2
        expect = np.sqrt(grid.inner(grid.grad(phi) ** 2 * grid.h[0], grid.grad(phi) ** 2 * grid.h[0]))
        assert chain_rule_defect(grid, phi, mat) == pytest.approx(expect, rel=1e-10)


class TestWeakResidual:
    @given(st.integers(0, 10**6))
    @settings(max_examples=20)
    def test_aux_identity(self, seed):
        grid = TorusGrid.uniform(2, 16, 8.0)
        mat = RegularizedMaterial(log_quench(), 0.05)
        phi = 0.5 * np.random.default_rng(seed).uniform(-1, 1, grid.shape)
        s = SimState.from_phi(grid, phi, mat, ELLIPSOID)
        nxt = step_imex(s, 1e-4, 1.0)
        res = check_weak_residual(grid, s.phi, s.J, s.w, mat, ELLIPSOID, phi_next=nxt.phi, dt=1e-4)
        assert res["aux"] <= 1e-10
        # the explicit part of the update is exactly the discrete conservation law
        expl = SimState.from_phi(grid, phi - 1e-4 * grid.div(s.J), mat, ELLIPSOID)
        assert check_weak_residual(grid, s.phi, s.J, s.w, mat, ELLIPSOID, phi_next=expl.phi, dt=1e-4)["mass"] <= 1e-10

    def test_flux_residual_second_order(self):
        out = []
        for n in (32, 64, 128):
            grid = TorusGrid.uniform(1, n, 32.0)
            x = grid.coords()[0]
            phi = 0.3 + 0.4 * np.cos(2 * np.pi * x / 32) + 0.2 * np.sin(4 * np.pi * x / 32 + 1)
            mat = RegularizedMaterial(log_quench(), 0.05)
            s = SimState.from_phi(grid, phi, mat, AnisotropySpec.isotropic(1))
            out.append(check_weak_residual(grid, s.phi, s.J, s.w, mat, s.aniso)["flux"])
        slope = -np.polyfit(np.log([32, 64, 128]), np.log(out), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.3)

    def test_test_fields_resolution_independent(self):
        a = smooth_test_fields(TorusGrid.uniform(1, 16, 2.0), 2, 5)
        b = smooth_test_fields(TorusGrid.uniform(1, 32, 2.0), 2, 5)
        np.testing.assert_allclose(a[1], b[1][::2], atol=1e-13)


class TestExcess:
    def test_fit_exact_power_law(self):
        d = np.array([0.2, 0.1, 0.05, 0.025])
        slope, intercept, zero = fit_excess_slope(d, 3.0 * d**0.5)
        assert slope == pytest.approx(0.5) and intercept == pytest.approx(np.log(3.0)) and zero == []

    def test_fit_skips_zero(self):
        d = [0.2, 0.1, 0.05, 0.025]
        slope, _, zero = fit_excess_slope(d, [0.4, 0.1, 0.025, 0.0])
        assert slope == pytest.approx(2.0) and zero == [0.025]

    def test_slope_undefined(self):
        with pytest.raises(SlopeUndefined):
            fit_excess_slope([0.2, 0.1], [0.3, 0.0])

    def test_bound_on_field(self):
        grid = TorusGrid.uniform(1, 32, 4.0)
        mat = RegularizedMaterial(log_quench(), 0.1)
        phi = 1.2 * np.sin(2 * np.pi * np.arange(32) / 32)
        lhs, rhs, ok = check_excess_l2_bound(grid, phi, mat)
        assert lhs > 0 and ok

    def test_continuation_small(self):
        grid = TorusGrid.uniform(1, 32, 8.0)
        phi0 = 0.4 + 0.1 * np.random.default_rng(7).uniform(-1, 1, 32)
        solver = SolverConfig(dt_init=1e-6, dt_min=1e-9, dt_max=1e-2, t_final=1.0)
        res = run_delta_continuation(grid, partial(log_quench, theta_c=2.5), AnisotropySpec.isotropic(1), phi0, solver, [0.2, 0.1], workers=1)
        assert res.deltas == [0.2, 0.1] and len(res.trajectories) == 2 and len(res.cauchy) == 1
        res2 = run_delta_continuation(grid, partial(log_quench, theta_c=2.5), AnisotropySpec.isotropic(1), phi0, solver, [0.2, 0.1], workers=2)
        assert res2.excess_sup == res.excess_sup and res2.cauchy == res.cauchy

    def test_deltas_must_decrease(self):
        grid = TorusGrid.uniform(1, 16, 4.0)
        with pytest.raises(ValueError):
            run_delta_continuation(grid, log_quench, AnisotropySpec.isotropic(1), np.zeros(16), SolverConfig(), [0.1, 0.2])


class TestEntropy:
    def test_reference_segment(self):
        grid = TorusGrid.uniform(1, 64, 16.0)
        mat = RegularizedMaterial(log_quench(), 0.05)
        aniso = AnisotropySpec.isotropic(1)
        phi = 0.95 * (0.2 + 0.1 * np.random.default_rng(1).uniform(-1, 1, 64))
        traj = Trajectory(grid)
        advance(SimState.from_phi(grid, phi, mat, aniso), SolverConfig(dt_init=1e-6, dt_min=1e-9, dt_max=2e-3, t_final=1.0), traj)
        rep = check_entropy_estimate(traj, mat, aniso)
        assert rep.passed

    def test_violation(self):
        mat = RegularizedMaterial(log_quench(), 0.05)
        aniso = AnisotropySpec.isotropic(1)
        certify_constants(aniso)
        recs = [rec(0, 1, 0, entropy=0.5), rec(1, 1, 0, entropy=0.6)]
        with pytest.raises(EstimateViolated):
            check_entropy_estimate(recs, mat, aniso)
