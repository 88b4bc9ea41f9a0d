"""Property suites on built-in fixtures, run by ``anideg-ch verify``.

Each suite returns a list of :class:`VerifyRow`; a fixture that raises a
library error becomes a failed row carrying the error class name.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy import integrate

from anideg.anisotropy import AnisotropySpec, agrad_lipschitz, certify_constants, eval_A, eval_Agrad
from anideg.errors import AnidegError
from anideg.estimates import (
    check_energy_law,
    check_energy_monotone,
    check_entropy_estimate,
    check_lipschitz_composition,
    check_mass_conservation,
    check_snapshots_excess,
    check_snapshots_h2,
    check_weak_residual,
    h2_chain,
    smooth_test_fields,
)
from anideg.grid import TorusGrid
from anideg.material import (
    RegularizedMaterial,
    check_excess_bound,
    double_well,
    identity_bpsi_residual,
    log_quench,
    mobility_lipschitz,
    regularize_initial,
)
from anideg.stepper import SimState, SolverConfig, Trajectory, advance

SUITES = ("anisotropy", "material", "grid", "estimates")


@dataclass
class VerifyRow:
    suite: str
    name: str
    value: float
    tol: float
    passed: bool
    error: str = ""

    def line(self, width=40):
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.error}" if self.error else ""
        return f"{self.suite:<10} {self.name:<{width}} {self.value:>12.4e} {self.tol:>10.1e}  {status}{extra}"


def _row(suite, name, value, tol):
    value = float(value)
    return VerifyRow(suite, name, value, tol, bool(np.isfinite(value) and value <= tol))


def _guard(suite, name, fn, rows):
    try:
        rows.extend(fn())
    except AnidegError as exc:
        rows.append(VerifyRow(suite, name, float("nan"), float("nan"), False, f"{type(exc).__name__}: {exc}"))


# anisotropy


def anisotropy_fixtures(inject_indefinite=False):
    fx = {
        "isotropic_2d": AnisotropySpec.isotropic(2),
        "quadratic_2d": AnisotropySpec.quadratic([[2.0, 0.5], [0.5, 1.0]]),
        "ellipsoid_sum_2d": AnisotropySpec.ellipsoid_sum(
            [np.diag([1.0, 0.25]), [[0.5, 0.2], [0.2, 0.8]]]
        ),
        "ellipsoid_sum_3d": AnisotropySpec.ellipsoid_sum([np.diag([1.0, 2.0, 0.5]), np.eye(3)]),
    }
    if inject_indefinite:
        fx["quadratic_indefinite"] = AnisotropySpec.quadratic([[1.0, 0.0], [0.0, -1.0]])
    return fx


def fd_gradient_error(spec, p, step=1e-6):
    """max relative error of A' against central differences of A."""
    d = spec.dim
    g = eval_Agrad(spec, p)
    fd = np.empty_like(p)
    for i in range(d):
        e = np.zeros((d, 1))
        e[i] = step
        fd[i] = (eval_A(spec, p + e) - eval_A(spec, p - e)) / (2 * step)
    return float(np.max(np.linalg.norm(g - fd, axis=0) / np.linalg.norm(g, axis=0)))


def _anisotropy_case(name, spec, n=100_000, seed=0):
    rng = np.random.default_rng(seed)
    c = certify_constants(spec, 20000, seed)
    p = rng.standard_normal((spec.dim, n)) * np.exp(rng.uniform(-3, 3, n))
    A = eval_A(spec, p)
    euler = np.max(np.abs(np.sum(eval_Agrad(spec, p) * p, axis=0) - 2 * A) / (2 * A))
    t = np.exp(rng.uniform(-2, 2, n))
    homog = np.max(np.abs(eval_A(spec, t * p) - t * t * A) / (t * t * A))
    q = rng.standard_normal((spec.dim, 2000))
    fd = fd_gradient_error(spec, q)
    u, v = rng.standard_normal((2, spec.dim, n))
    w = rng.standard_normal((spec.dim, n))
    v[:, n // 2 :] = u[:, n // 2 :] + 1e-3 * w[:, n // 2 :] / np.linalg.norm(w[:, n // 2 :], axis=0)
    dq = u - v
    # fresh pairs may undercut the sampled cA by the sampling tolerance
    quot = np.sum((eval_Agrad(spec, u) - eval_Agrad(spec, v)) * dq, axis=0) / np.sum(dq * dq, axis=0)
    mono_defect = max(c.cA - quot.min(), 0.0) / c.cA
    lip = np.linalg.norm(eval_Agrad(spec, u) - eval_Agrad(spec, v), axis=0) - agrad_lipschitz(spec) * np.linalg.norm(dq, axis=0)
    return [
        _row("anisotropy", f"{name}: euler identity", euler, 1e-12),
        _row("anisotropy", f"{name}: 2-homogeneity", homog, 1e-12),
        _row("anisotropy", f"{name}: A' vs finite differences", fd, 1e-6),
        _row("anisotropy", f"{name}: monotonicity defect (rel. to cA)", mono_defect, 1e-6),
        _row("anisotropy", f"{name}: A' Lipschitz defect", max(lip.max(), 0.0), 1e-10),
        _row("anisotropy", f"{name}: A0 <= A1", c.A0 - c.A1, 0.0),
    ]


def suite_anisotropy(inject_indefinite=False):
    rows = []
    for name, spec in anisotropy_fixtures(inject_indefinite).items():
        _guard("anisotropy", name, partial(_anisotropy_case, name, spec), rows)
    return rows


# material


def material_fixtures():
    return {
        "log_quench": log_quench(1.0, 2.0),
        "double_well_m1": double_well(1.0),
        "double_well_m2": double_well(2.0),
    }


def phi_quadrature(reg, r):
    """Phi_delta(r) = int_0^r (r - s) / b_delta(s) ds by adaptive quadrature."""
    out = []
    for x in np.atleast_1d(r):
        pts = [p for p in (-reg.cut, reg.cut) if min(0, x) < p < max(0, x)]
        val, _ = integrate.quad(
            lambda s: (x - s) / reg.b(s), 0.0, x, points=pts or None, epsabs=1e-14, epsrel=1e-13, limit=200
        )
        out.append(val)
    return np.array(out)


def _material_case(name, spec):
    rows = []
    r_in = np.linspace(-0.999, 0.999, 2001)
    rows.append(_row("material", f"{name}: b psi'' identity", np.max(identity_bpsi_residual(spec, r_in)), 1e-10))
    L = mobility_lipschitz(spec)
    lips = []
    for delta in (0.2, 0.05, 0.01):
        reg = RegularizedMaterial(spec, delta)
        z = np.linspace(-3, 3, 60001)
        b = reg.b(z)
        tag = f"{name} d={delta:g}"
        rows.append(_row("material", f"{tag}: b_delta >= b_min > 0", reg.b_min - b.min(), 0.0))
        lip = float(np.max(np.abs(np.diff(b) / np.diff(z))))
        lips.append(lip)
        rows.append(_row("material", f"{tag}: Lip(b_delta) <= Lip(b)", lip - L, 1e-9))
        rs = np.array([-2.0, -1.0, -0.9, -0.3, 0.1, 0.5, 0.9, 0.99, 1.5])
        err = np.max(np.abs(reg.Phi(rs) - phi_quadrature(reg, rs)) / np.maximum(1, np.abs(reg.Phi(rs))))
        rows.append(_row("material", f"{tag}: Phi_delta vs quadrature", err, 1e-8))
        hstep = 1e-4
        zz = np.linspace(-2, 2, 401)
        # b_delta has a kink at +-cut, so skip stencils that straddle it
        zz = zz[np.min(np.abs(np.abs(zz)[:, None] - reg.cut), axis=1) > 2 * hstep]
        d2 = (reg.Phi(zz + hstep) - 2 * reg.Phi(zz) + reg.Phi(zz - hstep)) / hstep**2
        rows.append(_row("material", f"{tag}: Phi_delta'' = 1/b_delta", np.max(np.abs(d2 * reg.b(zz) - 1)), 1e-4))
        jumps = []
        for c in (-reg.cut, reg.cut):
            for k in range(3):
                jumps.append(abs(reg.psi(c + 1e-12, k) - reg.psi(c - 1e-12, k)) / (1 + abs(reg.psi(c, k))))
        rows.append(_row("material", f"{tag}: psi_delta C2 gluing", max(jumps), 1e-8))
        rows.append(_row("material", f"{tag}: pointwise excess bound", 0.0 if check_excess_bound(reg, z) else 1.0, 0.0))
    if name == "double_well_m2":
        rows.append(_row("material", f"{name}: Lip(b_delta) delta-independent", max(lips) - min(lips), 1e-12))
    return rows


def suite_material():
    rows = []
    for name, spec in material_fixtures().items():
        _guard("material", name, partial(_material_case, name, spec), rows)
    return rows


# grid


def _grid_case(grid, seed=0):
    tag = f"{grid.dim}d N={grid.N[0]}"
    f, g = smooth_test_fields(grid, 2, seed)
    u = np.stack(smooth_test_fields(grid, grid.dim, seed + 1))
    rows = []
    sbp = abs(grid.inner(grid.grad(f), u) + grid.inner(f, grid.div(u))) / (1 + abs(grid.inner(f, grid.div(u))))
    rows.append(_row("grid", f"{tag}: summation by parts", sbp, 1e-12))
    rows.append(_row("grid", f"{tag}: mean of div", abs(grid.mean(grid.div(u))), 1e-12))
    sym = abs(grid.inner(grid.lap(f), g) - grid.inner(f, grid.lap(g))) / (1 + abs(grid.inner(grid.lap(f), g)))
    rows.append(_row("grid", f"{tag}: lap self-adjoint", sym, 1e-12))
    # (I - lap_h) u = f solved spectrally, checked by applying the stencil
    sol = grid.spectral_solve(1.0 + grid.neg_lap_symbol(), f)
    res = np.max(np.abs(sol - grid.lap(sol) - f)) / np.max(np.abs(f))
    rows.append(_row("grid", f"{tag}: spectral solve residual", res, 1e-12))
    return rows


def _lap_order():
    errs = []
    for n in (32, 64, 128):
        grid = TorusGrid.uniform(2, n, 2 * np.pi)
        x, y = grid.coords()
        f = np.sin(x) * np.cos(2 * y)
        errs.append(np.max(np.abs(grid.lap(f) + 5 * f)))
    slope = np.polyfit(np.log([32, 64, 128]), np.log(errs), 1)[0]
    return [_row("grid", "lap_h convergence order (expect 2)", abs(-slope - 2), 0.1)]


def suite_grid():
    rows = []
    for grid in (TorusGrid.uniform(1, 64, 3.0), TorusGrid((32, 16), (0, -1), (2, 1)), TorusGrid.uniform(3, 8, 1.0)):
        _guard("grid", f"{grid.dim}d", partial(_grid_case, grid), rows)
    _guard("grid", "lap order", _lap_order, rows)
    return rows


# estimates


def _reference_run(aniso, grid, t_final):
    material = RegularizedMaterial(log_quench(1.0, 2.0), 0.05)
    rng = np.random.default_rng(1)
    phi0 = regularize_initial(0.2 + 0.1 * rng.uniform(-1, 1, grid.shape), 0.05)
    state = SimState.from_phi(grid, phi0, material, aniso)
    cfg = SolverConfig(dt_init=1e-6, dt_min=1e-9, dt_max=2e-3, t_final=t_final, snapshot_stride=200, diagnostics_stride=1)
    traj = Trajectory(grid)
    final = advance(state, cfg, traj)
    return traj, final, material


def _estimates_case(name, aniso, grid, t_final):
    certify_constants(aniso, 5000, 0)
    traj, final, material = _reference_run(aniso, grid, t_final)
    reports = [
        check_mass_conservation(traj, strict=False),
        check_energy_law(traj, strict=False),
        check_energy_monotone(traj, strict=False),
        check_entropy_estimate(traj, material, aniso, strict=False),
        check_snapshots_h2(traj, aniso, strict=False),
        check_snapshots_excess(traj, material, strict=False),
    ]
    rows = [VerifyRow("estimates", f"{name}: {r.name}", r.margin, 0.0, r.passed) for r in reports]
    res = check_weak_residual(final.grid, final.phi, final.J, final.w, material, aniso)
    rows.append(_row("estimates", f"{name}: weak residual (aux)", res["aux"], 1e-10))
    if aniso.family == "isotropic":
        worst = 0.0
        for _, phi in traj.snapshots:
            lhs, rhs, _, _ = h2_chain(grid, phi, aniso)
            worst = max(worst, abs(lhs - rhs) / (1 + abs(rhs)))
        rows.append(_row("estimates", f"{name}: H2 equality (isotropic)", worst, 1e-12))
    fields = smooth_test_fields(grid, 100, 11)
    worst_b = worst_a = 0.0
    L_b = mobility_lipschitz(material.base)
    L_a = agrad_lipschitz(aniso)
    for f in fields:
        u = 1.5 * f / np.max(np.abs(f))
        lhs, rhs, _ = check_lipschitz_composition(grid, u, material.b, L_b, strict=False)
        worst_b = max(worst_b, lhs - rhs)
        gu = grid.grad(f)
        lhs, rhs, _ = check_lipschitz_composition(grid, gu, lambda p: eval_Agrad(aniso, p), L_a, strict=False)
        worst_a = max(worst_a, lhs - rhs)
    rows.append(_row("estimates", f"{name}: discrete Lipschitz composition (b_delta)", worst_b, 1e-12))
    rows.append(_row("estimates", f"{name}: discrete Lipschitz composition (A')", worst_a, 1e-12))
    return rows


def suite_estimates():
    rows = []
    cases = [
        ("isotropic 1d", AnisotropySpec.isotropic(1), TorusGrid.uniform(1, 64, 16.0), 2.0),
        (
            "ellipsoid_sum 2d",
            AnisotropySpec.ellipsoid_sum([np.diag([1.0, 0.25]), [[0.5, 0.2], [0.2, 0.8]]]),
            TorusGrid.uniform(2, 16, 8.0),
            0.2,
        ),
    ]
    for name, aniso, grid, t_final in cases:
        _guard("estimates", name, partial(_estimates_case, name, aniso, grid, t_final), rows)
    return rows


def run_suite(name, inject_indefinite=False):
    if name == "all":
        rows = []
        for s in SUITES:
            rows.extend(run_suite(s, inject_indefinite))
        return rows
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    if name == "anisotropy":
        return suite_anisotropy(inject_indefinite)
    return {"material": suite_material, "grid": suite_grid, "estimates": suite_estimates}[name]()
