"""Discrete functionals evaluated along a trajectory and the per-step record."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from anideg.anisotropy import eval_A, eval_Agrad

CSV_COLUMNS = (
    "t",
    "mass",
    "energy",
    "entropy",
    "dissipation_cum",
    "excess_L2",
    "hess_sq_cum",
    "dt",
    "accepted",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    entropy: float
    dissipation_cum: float
    excess_L2: float
    hess_sq_cum: float
    dt: float
    accepted: bool
    # not written to the CSV; needed for the entropy inequality
    psi2_cum: float = 0.0
    step: int = 0

    def csv_row(self):
        vals = astuple(self)[: len(CSV_COLUMNS)]
        return [repr(float(v)) if not isinstance(v, bool) else str(int(v)) for v in vals]

    @classmethod
    def from_csv_row(cls, row):
        kw = {name: float(v) for name, v in zip(CSV_COLUMNS, row)}
        kw["accepted"] = bool(int(float(row[-1])))
        return cls(**kw)


def record_fields():
    return [f.name for f in fields(DiagnosticsRecord)]


def anisotropic_term(grid, phi, aniso):
    """w = -div_h A'(grad_h phi)."""
    return -grid.div(eval_Agrad(aniso, grid.grad(phi)))


def face_mobility(grid, phi, material):
    """b_delta at face-averaged phi, one array per axis."""
    return np.stack([material.b(grid.face_average(phi, j)) for j in range(grid.dim)])


def energy(grid, phi, material, aniso):
    return grid.integrate(eval_A(aniso, grid.grad(phi)) + material.psi(phi))


def entropy(grid, phi, material):
    return grid.integrate(material.Phi(phi))


def dissipation_rate(grid, phi, mu, material):
    """int b_delta(phi) |grad_h mu|^2 with face mobility."""
    g = grid.grad(mu)
    return grid.integrate(np.sum(face_mobility(grid, phi, material) * g * g, axis=0))


def psi2_gradient_term(grid, phi, material):
    """int psi2''(phi) |grad_h phi|^2, psi2'' at face-averaged phi."""
    g = grid.grad(phi)
    total = 0.0
    for j in range(grid.dim):
        total += np.sum(material.base.psi2(grid.face_average(phi, j), 2) * g[j] * g[j])
    return float(total * grid.cell_volume)


def excess_l2(grid, phi):
    e = np.maximum(np.abs(phi) - 1.0, 0.0)
    return float(np.sqrt(grid.inner(e, e)))
