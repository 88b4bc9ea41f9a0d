"""Time stepping for the delta-regularized system.

Two first-order schemes share the conservative flux form
``div_h(b_delta(face phi) grad_h mu)``: explicit Euler, and a stabilized
linearly implicit variant that adds ``kappa * lap_h^2 (phi^{n+1} - phi^n)``
and is solved by one transform per step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from anideg.anisotropy import AnisotropySpec, certify_constants
from anideg.diagnostics import (
    DiagnosticsRecord,
    anisotropic_term,
    dissipation_rate,
    energy,
    entropy,
    excess_l2,
    face_mobility,
    psi2_gradient_term,
)
from anideg.errors import EnergySafeguardExhausted, NonFiniteField
from anideg.grid import TorusGrid
from anideg.material import RegularizedMaterial

log = logging.getLogger(__name__)

SCHEMES = ("explicit", "imex")
SAFEGUARDS = ("reject_and_halve", "warn_only")


@dataclass
class SimState:
    grid: TorusGrid
    phi: np.ndarray
    mu: np.ndarray
    J: np.ndarray
    w: np.ndarray
    material: RegularizedMaterial
    aniso: AnisotropySpec
    t: float = 0.0
    step_count: int = 0
    n_rejected: int = 0

    @classmethod
    def from_phi(cls, grid, phi, material, aniso, t=0.0):
        phi = np.array(phi, dtype=float)
        if phi.shape != grid.shape:
            raise ValueError("phi does not match grid shape")
        w, mu, J = auxiliary_fields(grid, phi, material, aniso)
        return cls(grid, phi, mu, J, w, material, aniso, t)


@dataclass
class SolverConfig:
    scheme: str = "imex"
    dt_init: float = 1e-3
    dt_min: float = 1e-8
    dt_max: float = 1e-2
    kappa: float | None = None
    t_final: float = 1.0
    energy_tol_per_step: float = 1e-12
    safeguard: str = "reject_and_halve"
    snapshot_stride: int = 100
    diagnostics_stride: int = 1
    grow_after: int = 50
    shrink_factor: float = 0.5

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.safeguard not in SAFEGUARDS:
            raise ValueError(f"safeguard must be one of {SAFEGUARDS}")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")
        if self.kappa is not None and self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.snapshot_stride < 1 or self.diagnostics_stride < 1:
            raise ValueError("strides must be positive")


def default_kappa(aniso, material):
    """2 * A1 * B^*, certifying the anisotropy constants if needed."""
    consts = aniso.constants or certify_constants(aniso)
    return 2.0 * consts.A1 * material.base.B_upper


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteField(f"{name} has non-finite values")


def assemble_mu(grid, phi, material, aniso):
    mu = anisotropic_term(grid, phi, aniso) + material.psi(phi, 1)
    _check_finite("mu", mu)
    return mu


def auxiliary_fields(grid, phi, material, aniso):
    """(w, mu, J) consistent with phi."""
    w = anisotropic_term(grid, phi, aniso)
    mu = w + material.psi(phi, 1)
    _check_finite("mu", mu)
    J = -face_mobility(grid, phi, material) * grid.grad(mu)
    return w, mu, J


def _rebuild(state, phi, dt):
    _check_finite("phi", phi)
    w, mu, J = auxiliary_fields(state.grid, phi, state.material, state.aniso)
    return replace(state, phi=phi, mu=mu, J=J, w=w, t=state.t + dt, step_count=state.step_count + 1)


def step_explicit(state: SimState, dt: float) -> SimState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    phi = state.phi - dt * state.grid.div(state.J)
    return _rebuild(state, phi, dt)


def step_imex(state: SimState, dt: float, kappa: float) -> SimState:
    """(phi+ - phi)/dt + kappa lap^2 (phi+ - phi) = -div_h J."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    rhs = -dt * grid.div(state.J)
    lam = grid.neg_lap_symbol()
    multiplier = 1.0 + dt * kappa * lam * lam
    inc_hat = np.fft.rfftn(rhs) / multiplier
    inc_hat.flat[0] = 0.0
    phi = state.phi + np.fft.irfftn(inc_hat, s=grid.shape, axes=range(grid.dim))
    return _rebuild(state, phi, dt)


class Trajectory:
    """In-memory sink: diagnostics records and (t, phi) snapshots."""

    def __init__(self, grid=None):
        self.grid = grid
        self.records: list[DiagnosticsRecord] = []
        self.snapshots: list[tuple[float, np.ndarray]] = []

    def record(self, rec: DiagnosticsRecord):
        self.records.append(rec)

    def snapshot(self, state: SimState):
        self.snapshots.append((state.t, state.phi.copy()))

    @property
    def accepted(self):
        return [r for r in self.records if r.accepted]


@dataclass
class _Accum:
    dissipation: float = 0.0
    hess: float = 0.0
    psi2: float = 0.0
    extra: dict = field(default_factory=dict)


def make_record(state, acc, dt, accepted=True, E=None):
    g, phi, mat = state.grid, state.phi, state.material
    return DiagnosticsRecord(
        t=state.t,
        mass=g.integrate(phi),
        energy=energy(g, phi, mat, state.aniso) if E is None else E,
        entropy=entropy(g, phi, mat),
        dissipation_cum=acc.dissipation,
        excess_L2=excess_l2(g, phi),
        hess_sq_cum=acc.hess,
        dt=dt,
        accepted=accepted,
        psi2_cum=acc.psi2,
        step=state.step_count,
    )


def advance(state: SimState, config: SolverConfig, sink=None) -> SimState:
    """Step until ``config.t_final`` with the energy safeguard.

    Cumulative integrals (dissipation, Hessian, psi2 term) use the
    left-endpoint rule on every accepted step.
    """
    if sink is None:
        sink = Trajectory(state.grid)
    if getattr(sink, "grid", None) is None:
        sink.grid = state.grid
    if config.scheme == "imex":
        kappa = default_kappa(state.aniso, state.material) if config.kappa is None else config.kappa

        def step(s, dt):
            return step_imex(s, dt, kappa)

    else:
        step = step_explicit

    grid, mat = state.grid, state.material
    acc = _Accum()
    E = energy(grid, state.phi, mat, state.aniso)
    dt = config.dt_init
    sink.record(make_record(state, acc, 0.0, E=E))
    sink.snapshot(state)
    streak = 0
    last_dt = 0.0
    t_end = config.t_final
    eps = 1e-12 * max(1.0, t_end)
    while state.t < t_end - eps:
        dt_try = min(dt, t_end - state.t)
        try:
            trial = step(state, dt_try)
            E_new = energy(grid, trial.phi, mat, state.aniso)
            ok = np.isfinite(E_new) and E_new <= E + config.energy_tol_per_step * (1 + abs(E))
            finite = np.isfinite(E_new)
        except NonFiniteField:
            ok, finite = False, False
        if not ok:
            if config.safeguard == "warn_only" and finite:
                log.warning("energy increased at t=%.6g (dt=%.3g); accepting", state.t, dt_try)
            else:
                if dt_try <= config.dt_min:
                    raise EnergySafeguardExhausted(
                        f"energy increase persists at dt_min={config.dt_min:g}, t={state.t:.6g}"
                    )
                state.n_rejected += 1
                sink.record(make_record(state, acc, dt_try, accepted=False, E=E))
                dt = max(dt_try * config.shrink_factor, config.dt_min)
                streak = 0
                continue
        acc.dissipation += dt_try * dissipation_rate(grid, state.phi, state.mu, mat)
        acc.hess += dt_try * grid.hessian_frobenius_sq(state.phi)
        acc.psi2 += dt_try * psi2_gradient_term(grid, state.phi, mat)
        trial.n_rejected = state.n_rejected
        state, E, last_dt = trial, E_new, dt_try
        streak += 1
        if streak >= config.grow_after:
            dt = min(2 * dt, config.dt_max)
            streak = 0
        if state.step_count % config.diagnostics_stride == 0:
            sink.record(make_record(state, acc, dt_try, E=E))
        if state.step_count % config.snapshot_stride == 0:
            sink.snapshot(state)
    if state.step_count % config.diagnostics_stride != 0:
        sink.record(make_record(state, acc, last_dt, E=E))
    if state.step_count % config.snapshot_stride != 0:
        sink.snapshot(state)
    return state
