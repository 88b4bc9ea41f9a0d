import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anideg import AnisotropySpec, RegularizedMaterial, TorusGrid, double_well, log_quench
from anideg.diagnostics import energy
from anideg.errors import EnergySafeguardExhausted, NonFiniteField
from anideg.material import regularize_initial
from anideg.stepper import (
    SimState,
    SolverConfig,
    Trajectory,
    advance,
    default_kappa,
    step_explicit,
    step_imex,
)


def mode_state(k=3, n=64, length=16.0, eps=1e-6):
    grid = TorusGrid.uniform(1, n, length)
    x = grid.coords()[0]
    phi = eps * np.cos(2 * np.pi * k * x / length)
    mat = RegularizedMaterial(double_well(1.0), 0.05)
    aniso = AnisotropySpec.isotropic(1)
    lam = grid.neg_lap_symbol()[k]
    return SimState.from_phi(grid, phi, mat, aniso), lam


def noise_state(seed=0, n=64, length=16.0, mean=0.2, amp=0.1, d=1):
    grid = TorusGrid.uniform(d, n, length)
    rng = np.random.default_rng(seed)
    mat = RegularizedMaterial(log_quench(1.0, 2.0), 0.05)
    aniso = AnisotropySpec.isotropic(d)
    phi = regularize_initial(mean + amp * rng.uniform(-1, 1, grid.shape), 0.05)
    return SimState.from_phi(grid, phi, mat, aniso)


class TestLinearModes:
    # around phi = 0 with psi = (1 - r^2)^2 / 4 and b(0) = 1 the update of a
    # cosine mode is phi -> (1 - dt lam (lam - 1) / (1 + dt kappa lam^2)) phi
    @pytest.mark.parametrize("k", [1, 3, 7])
    def test_explicit_decay_factor(self, k):
        state, lam = mode_state(k)
        dt = 1e-3
        new = step_explicit(state, dt)
        np.testing.assert_allclose(new.phi, (1 - dt * lam * (lam - 1)) * state.phi, rtol=1e-9, atol=1e-18)

    @pytest.mark.parametrize("k", [1, 3, 7])
    @pytest.mark.parametrize("kappa", [0.0, 1.0, 5.0])
    def test_imex_decay_factor(self, k, kappa):
        state, lam = mode_state(k)
        dt = 1e-2
        new = step_imex(state, dt, kappa)
        factor = 1 - dt * lam * (lam - 1) / (1 + dt * kappa * lam * lam)
        np.testing.assert_allclose(new.phi, factor * state.phi, rtol=1e-9, atol=1e-18)

    def test_imex_zero_kappa_is_explicit(self):
        state = noise_state()
        np.testing.assert_allclose(step_imex(state, 1e-4, 0.0).phi, step_explicit(state, 1e-4).phi, atol=1e-13)


class TestConservation:
    @given(st.integers(0, 10**6), st.sampled_from([1, 2]))
    def test_mass_per_step(self, seed, d):
        state = noise_state(seed, n=16 if d == 2 else 64, d=d)
        m0 = state.grid.integrate(state.phi)
        for new in (step_explicit(state, 1e-5), step_imex(state, 1e-3, 1.0)):
            assert abs(state.grid.integrate(new.phi) - m0) <= 1e-13 * abs(m0) + 1e-15

    def test_fields_consistent_after_step(self):
        state = noise_state()
        new = step_imex(state, 1e-3, 1.0)
        g = new.grid
        np.testing.assert_allclose(new.mu, new.w + new.material.psi(new.phi, 1), atol=1e-12)
        assert new.t == pytest.approx(1e-3) and new.step_count == 1


class TestAdvance:
    def test_records_and_snapshots(self):
        state = noise_state()
        cfg = SolverConfig(dt_init=1e-5, dt_min=1e-8, dt_max=1e-3, t_final=0.05, snapshot_stride=40, diagnostics_stride=7)
        traj = Trajectory()
        final = advance(state, cfg, traj)
        assert traj.records[0].t == 0.0 and traj.records[0].dissipation_cum == 0.0
        assert traj.records[-1].t == pytest.approx(0.05) and final.t == pytest.approx(0.05)
        assert traj.snapshots[0][0] == 0.0 and traj.snapshots[-1][0] == pytest.approx(0.05)
        E = [r.energy for r in traj.accepted]
        assert all(b <= a for a, b in zip(E, E[1:]))
        D = [r.dissipation_cum for r in traj.accepted]
        assert all(b >= a for a, b in zip(D, D[1:]))

    def test_step_growth(self):
        state = noise_state()
        cfg = SolverConfig(dt_init=1e-6, dt_min=1e-8, dt_max=8e-6, t_final=1e-3, diagnostics_stride=1)
        traj = Trajectory()
        advance(state, cfg, traj)
        dts = [r.dt for r in traj.records[1:]]
        assert dts[:50] == [1e-6] * 50
        assert dts[50] == 2e-6
        assert max(dts) == 8e-6

    def test_reject_and_halve(self):
        state = noise_state()
        cfg = SolverConfig(scheme="explicit", dt_init=8e-3, dt_min=1e-9, dt_max=8e-3, t_final=1e-2)
        traj = Trajectory()
        final = advance(state, cfg, traj)
        rejected = [r for r in traj.records if not r.accepted]
        assert final.n_rejected == len(rejected) > 0
        assert rejected[0].dt == 8e-3 and rejected[1].dt == 4e-3
        assert all(r.t == 0.0 for r in rejected[:2])
        E = [r.energy for r in traj.accepted]
        assert all(b <= a for a, b in zip(E, E[1:]))

    def test_safeguard_exhausted(self):
        state = noise_state()
        cfg = SolverConfig(scheme="explicit", dt_init=1e-1, dt_min=1e-1, dt_max=1e-1, t_final=1.0)
        with pytest.raises(EnergySafeguardExhausted):
            advance(state, cfg)

    def test_warn_only(self, caplog):
        state = noise_state()
        cfg = SolverConfig(scheme="explicit", dt_init=1e-1, dt_min=1e-1, dt_max=1e-1, t_final=1e-1, safeguard="warn_only")
        with caplog.at_level(logging.WARNING):
            final = advance(state, cfg)
        assert final.step_count == 1 and "energy increased" in caplog.text

    def test_nonfinite(self):
        grid = TorusGrid.uniform(1, 16, 4.0)
        phi = np.zeros(16)
        phi[3] = np.nan
        with pytest.raises(NonFiniteField):
            SimState.from_phi(grid, phi, RegularizedMaterial(log_quench(), 0.1), AnisotropySpec.isotropic(1))

    def test_default_kappa(self):
        mat = RegularizedMaterial(log_quench(), 0.1)
        assert default_kappa(AnisotropySpec.isotropic(2), mat) == pytest.approx(1.0)
        assert default_kappa(AnisotropySpec.quadratic(np.diag([1.0, 4.0])), mat) == pytest.approx(4.0, rel=1e-6)

    def test_deterministic(self):
        cfg = SolverConfig(dt_init=1e-5, dt_min=1e-8, dt_max=1e-3, t_final=0.02)
        a, b = Trajectory(), Trajectory()
        advance(noise_state(4), cfg, a)
        advance(noise_state(4), cfg, b)
        assert [r.csv_row() for r in a.records] == [r.csv_row() for r in b.records]

    def test_energy_recorded_matches_state(self):
        state = noise_state()
        cfg = SolverConfig(dt_init=1e-5, dt_min=1e-8, dt_max=1e-3, t_final=0.01, snapshot_stride=1, diagnostics_stride=1)
        traj = Trajectory()
        advance(state, cfg, traj)
        for rec, (t, phi) in zip(traj.accepted, traj.snapshots):
            assert rec.t == t
            assert rec.energy == pytest.approx(energy(state.grid, phi, state.material, state.aniso), rel=1e-14)


class TestSolverConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"scheme": "rk4"},
            {"safeguard": "ignore"},
            {"dt_init": 1.0, "dt_max": 0.1},
            {"dt_min": 0.0},
            {"t_final": -1.0},
            {"kappa": -1.0},
            {"snapshot_stride": 0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)
