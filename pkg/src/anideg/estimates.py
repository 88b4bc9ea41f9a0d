"""A-priori estimates checked on discrete trajectories.

Each ``check_*`` returns a :class:`CheckReport` (or a small tuple for the
pointwise checks) and raises :class:`EstimateViolated` when ``strict`` and
the inequality fails. Margins are ``lhs - rhs``; negative means satisfied.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from anideg.anisotropy import certify_constants, eval_Agrad
from anideg.diagnostics import anisotropic_term, entropy, excess_l2, face_mobility
from anideg.errors import EstimateViolated, SlopeUndefined
from anideg.material import RegularizedMaterial, regularize_initial
from anideg.stepper import SimState, Trajectory, advance


@dataclass
class CheckReport:
    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    detail: str = ""

    def csv_row(self):
        return [self.name, repr(self.lhs), repr(self.rhs), repr(self.margin), str(int(self.passed))]


REPORT_COLUMNS = ("name", "lhs", "rhs", "margin", "pass")


def _finish(report, strict, record=None):
    if strict and not report.passed:
        raise EstimateViolated(
            f"{report.name}: lhs={report.lhs:.6e} > rhs={report.rhs:.6e} ({report.detail})", record
        )
    return report


def _accepted(trajectory):
    recs = trajectory.records if isinstance(trajectory, Trajectory) else list(trajectory)
    return [r for r in recs if r.accepted]


def check_energy_law(trajectory, tol=1e-6, strict=True) -> CheckReport:
    """E(t) + dissipation_cum(t)/2 <= E(0) + tol (1 + |E(0)|) at every record."""
    recs = _accepted(trajectory)
    E0 = recs[0].energy
    slack = tol * (1 + abs(E0))
    worst, worst_rec = -np.inf, None
    for r in recs:
        m = r.energy + 0.5 * r.dissipation_cum - E0
        if m > worst:
            worst, worst_rec = m, r
    rep = CheckReport(
        "energy_law",
        worst_rec.energy + 0.5 * worst_rec.dissipation_cum,
        E0,
        worst,
        worst <= slack,
        f"worst at t={worst_rec.t:.6g}",
    )
    return _finish(rep, strict, worst_rec)


def check_energy_monotone(trajectory, strict=True) -> CheckReport:
    """Raw energy column nonincreasing over accepted records."""
    E = np.array([r.energy for r in _accepted(trajectory)])
    inc = float(np.max(np.diff(E))) if E.size > 1 else 0.0
    rep = CheckReport("energy_monotone", inc, 0.0, inc, inc <= 0.0, "largest increase between records")
    return _finish(rep, strict)


def check_entropy_estimate(trajectory, material: RegularizedMaterial, aniso, tol=1e-4, strict=True):
    """Entropy inequality with the Hessian term, tested at every record.

    ``int Phi(phi(t)) + cA * hess_sq_cum(t) <= int Phi(phi0) - psi2_cum(t)``
    with slack ``tol * (1 + |rhs|)``. At snapshot times the entropy is
    recomputed from the stored field instead of taken from the record.
    """
    cA = (aniso.constants or certify_constants(aniso)).cA
    recs = _accepted(trajectory)
    ent = {r.t: r.entropy for r in recs}
    grid = getattr(trajectory, "grid", None)
    if grid is not None:
        for t, phi in trajectory.snapshots:
            if t in ent:
                ent[t] = entropy(grid, phi, material)
    ent0 = ent[recs[0].t]
    worst = None
    for r in recs:
        lhs = ent[r.t] + cA * r.hess_sq_cum
        rhs = ent0 - r.psi2_cum
        margin = lhs - rhs
        rel = margin - tol * (1 + abs(rhs))
        if worst is None or rel > worst[0]:
            worst = (rel, lhs, rhs, margin, r)
    rel, lhs, rhs, margin, r = worst
    rep = CheckReport("entropy_estimate", lhs, rhs, margin, rel <= 0, f"worst at t={r.t:.6g}")
    return _finish(rep, strict, r)


def check_mass_conservation(trajectory, tol=1e-12, strict=True) -> CheckReport:
    """Relative drift of the spatial mean over accepted records.

    The drift is divided by max(|mean(0)|, 1e-3) so that a zero-mean datum
    is judged on an absolute scale.
    """
    recs = _accepted(trajectory)
    m = np.array([r.mass for r in recs])
    drift = float(np.max(np.abs(m - m[0])))
    grid = getattr(trajectory, "grid", None)
    vol = grid.volume if grid is not None else 1.0
    denom = max(abs(m[0]) / vol, 1e-3) * vol
    rel = drift / denom
    rep = CheckReport("mass_conservation", rel, tol, rel - tol, rel <= tol, "relative mean drift")
    return _finish(rep, strict)


def check_snapshots_h2(trajectory, aniso, tol=1e-12, strict=True) -> CheckReport:
    """H2 monotonicity on every stored snapshot; worst lhs - rhs reported."""
    worst = None
    for t, phi in trajectory.snapshots:
        lhs, rhs, _ = check_h2_monotonicity(trajectory.grid, phi, aniso, tol, strict=False)
        rel = (lhs - rhs) / (1 + abs(rhs))
        if worst is None or rel > worst[0]:
            worst = (rel, lhs, rhs, t)
    rel, lhs, rhs, t = worst
    rep = CheckReport("h2_monotonicity", lhs, rhs, lhs - rhs, rel <= tol, f"worst at t={t:.6g}")
    return _finish(rep, strict)


def check_snapshots_excess(trajectory, material, atol=1e-10, strict=True) -> CheckReport:
    """Excess bound on every stored snapshot; worst lhs - rhs reported."""
    worst = None
    for t, phi in trajectory.snapshots:
        lhs, rhs, _ = check_excess_l2_bound(trajectory.grid, phi, material, atol)
        if worst is None or lhs - rhs > worst[0]:
            worst = (lhs - rhs, lhs, rhs, t)
    margin, lhs, rhs, t = worst
    rep = CheckReport(f"excess_bound(delta={material.delta:g})", lhs, rhs, margin, margin <= atol, f"worst at t={t:.6g}")
    return _finish(rep, strict)


def h2_chain(grid, phi, aniso):
    """The three equal forms of the right-hand side of the H2 inequality.

    Returns (lhs, rhs, rhs_difference_form, rhs_shift_form):
      lhs   = cA * sum_{i,j} |d_j^+ d_i^+ phi|^2
      rhs   = sum div_h(A'(grad phi)) * lap_h phi
      diff  = sum_j d_j^+[A'(grad phi)] . d_j^+ grad phi
      shift = -sum_j A'(grad phi) . d_j^- d_j^+ grad phi
    """
    cA = (aniso.constants or certify_constants(aniso)).cA
    g = grid.grad(phi)
    a = eval_Agrad(aniso, g)
    lhs = cA * grid.hessian_frobenius_sq(phi)
    rhs = grid.inner(grid.div(a), grid.lap(phi))
    diff = 0.0
    shift = 0.0
    for j in range(grid.dim):
        dg = np.stack([grid.dq_forward(gi, j) for gi in g])
        da = np.stack([grid.dq_forward(ai, j) for ai in a])
        diff += grid.inner(da, dg)
        shift -= grid.inner(a, np.stack([grid.dq_backward(x, j) for x in dg]))
    return lhs, rhs, diff, shift


def check_h2_monotonicity(grid, phi, aniso, tol=1e-12, strict=True):
    lhs, rhs, _, _ = h2_chain(grid, phi, aniso)
    ok = lhs <= rhs + tol * (1 + abs(rhs))
    if strict and not ok:
        raise EstimateViolated(f"h2_monotonicity: lhs={lhs:.6e} > rhs={rhs:.6e}")
    return lhs, rhs, ok


def smooth_test_fields(grid, n, seed, kmax=3):
    """Seeded smooth periodic fields: random low-mode trigonometric sums.

    They are defined through physical coordinates, so the same seed gives
    the same continuous function on every resolution.
    """
    rng = np.random.default_rng(seed)
    x = grid.coords()
    L = [b - a for a, b in zip(grid.lower, grid.upper)]
    out = []
    for _ in range(n):
        f = np.zeros(grid.shape)
        for _ in range(4):
            k = rng.integers(-kmax, kmax + 1, size=grid.dim)
            amp, phase = rng.standard_normal(), rng.uniform(0, 2 * np.pi)
            arg = sum(2 * np.pi * kk * (xx - a) / l for kk, xx, a, l in zip(k, x, grid.lower, L))
            f = f + amp * np.cos(arg + phase)
        out.append(f)
    return out


def _h1_norm(grid, f):
    g = grid.grad(f)
    return np.sqrt(grid.inner(f, f) + grid.inner(g, g))


def check_weak_residual(grid, phi, J, w, material, aniso, n_test=8, seed=0, phi_next=None, dt=None):
    """Normalized residuals of the flux-based weak formulation.

    Returns a dict with keys ``aux`` (definition of w), ``flux`` (definition
    of J in weak form) and, if ``phi_next``/``dt`` are given, ``mass``
    (time-integrated conservation law between two states).
    """
    d = grid.dim
    scal = smooth_test_fields(grid, n_test, seed)
    vec = [np.stack(smooth_test_fields(grid, d, seed + 1000 + i)) for i in range(n_test)]
    a = eval_Agrad(aniso, grid.grad(phi))
    bf = face_mobility(grid, phi, material)
    dphi = grid.grad(phi)
    psi2nd = np.stack([material.psi(grid.face_average(phi, j), 2) for j in range(d)])

    aux = 0.0
    for xi in scal:
        r = grid.inner(w, xi) - grid.inner(a, grid.grad(xi))
        aux = max(aux, abs(r) / _h1_norm(grid, xi))
    flux = 0.0
    for eta in vec:
        r = grid.inner(J, eta) - grid.inner(w, grid.div(bf * eta)) + grid.inner(bf * psi2nd * dphi, eta)
        norm = np.sqrt(sum(_h1_norm(grid, eta[j]) ** 2 for j in range(d))) + np.max(np.abs(eta))
        flux = max(flux, abs(r) / norm)
    out = {"aux": float(aux), "flux": float(flux)}
    if phi_next is not None:
        mass = 0.0
        for zeta in scal:
            r = grid.inner(phi_next - phi, zeta) - dt * grid.inner(J, grid.grad(zeta))
            mass = max(mass, abs(r) / (dt * _h1_norm(grid, zeta)))
        out["mass"] = float(mass)
    return out


def check_lipschitz_composition(grid, u, v, L, strict=True, tol=1e-12):
    """Discrete ||D(v o u)|| <= L ||D u|| with forward quotients.

    ``u`` is a scalar field or a stack of n fields; ``v`` maps arrays of
    that shape to a scalar field or stack of m fields. Pointwise
    |d^+(v o u)| <= L |d^+ u| holds for every face, so the constant is 1.
    """
    u = np.asarray(u, dtype=float)
    vu = np.asarray(v(u), dtype=float)

    def dnorm(f):
        f = f.reshape((-1,) + grid.shape)
        total = 0.0
        for comp in f:
            for j in range(grid.dim):
                dq = grid.dq_forward(comp, j)
                total += grid.inner(dq, dq)
        return np.sqrt(total)

    lhs = dnorm(vu)
    rhs = L * dnorm(u)
    ok = lhs <= rhs * (1 + tol) + tol
    if strict and not ok:
        raise EstimateViolated(f"lipschitz_composition: {lhs:.6e} > {rhs:.6e}")
    return lhs, rhs, ok


def chain_rule_defect(grid, phi, material):
    """|| grad_h b_delta(phi) - b_delta'(phi) grad_h phi ||_L2."""
    diff = grid.grad(material.b(phi)) - material.b_prime(phi) * grid.grad(phi)
    return float(np.sqrt(grid.inner(diff, diff)))


def check_excess_l2_bound(grid, phi, material, atol=1e-10):
    """excess_L2^2 <= 2^(m+1) delta^m B^* int Phi_delta(phi) + atol."""
    lhs = excess_l2(grid, phi) ** 2
    rhs = material.excess_constant() * entropy(grid, phi, material)
    return lhs, rhs, lhs <= rhs + atol


@dataclass
class ScalingStudyResult:
    deltas: list
    excess_sup: list
    slope: float
    intercept: float
    vacuous: bool
    vacuous_deltas: list = field(default_factory=list)
    cauchy: list = field(default_factory=list)
    trajectories: list = field(default_factory=list, repr=False)


def _continuation_run(args):
    grid, factory, aniso, phi0, solver, delta = args
    material = RegularizedMaterial(factory(), delta)
    state = SimState.from_phi(grid, regularize_initial(phi0, delta), material, aniso)
    traj = Trajectory(grid)
    final = advance(state, solver, traj)
    return traj, final.phi


def fit_excess_slope(deltas, excess_sup):
    """Least-squares slope of log(excess) against log(delta).

    Runs whose excess is exactly zero satisfy the bound trivially and are
    left out of the fit; with fewer than two positive values the slope is
    undefined.
    """
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(excess_sup, dtype=float)
    pos = e > 0
    if pos.sum() < 2:
        raise SlopeUndefined(f"only {int(pos.sum())} run(s) with nonzero excess; bound vacuously satisfied")
    slope, intercept = np.polyfit(np.log(d[pos]), np.log(e[pos]), 1)
    return float(slope), float(intercept), [float(x) for x in d[~pos]]


def run_delta_continuation(grid, material_factory, aniso, phi0, solver, deltas, workers=None):
    """One regularized run per delta from the same unscaled initial datum.

    ``material_factory`` must be picklable (e.g. ``functools.partial`` of a
    preset) when ``workers > 1``. Results are ordered by delta.
    """
    deltas = [float(x) for x in deltas]
    if any(not 0 < x < 1 for x in deltas) or any(a <= b for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing in (0, 1)")
    if aniso.constants is None:
        certify_constants(aniso)
    if workers is None:
        workers = int(os.environ.get("ANIDEG_THREADS", "1"))
    jobs = [(grid, material_factory, aniso, phi0, solver, x) for x in deltas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_continuation_run, jobs))
    else:
        results = [_continuation_run(j) for j in jobs]
    trajs = [r[0] for r in results]
    finals = [r[1] for r in results]
    sup = [max(r.excess_L2 for r in t.accepted) for t in trajs]
    cauchy = [float(np.sqrt(grid.inner(a - b, a - b))) for a, b in zip(finals, finals[1:])]
    if all(s == 0 for s in sup):
        return ScalingStudyResult(deltas, sup, float("nan"), float("nan"), True, list(deltas), cauchy, trajs)
    slope, intercept, zero = fit_excess_slope(deltas, sup)
    return ScalingStudyResult(deltas, sup, slope, intercept, False, zero, cauchy, trajs)
