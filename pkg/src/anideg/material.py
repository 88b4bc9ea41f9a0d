"""Potential, degenerate mobility and entropy function, plus their
delta-regularized versions.

Every regularized quantity is built the same way: clamp the argument to
``c = clip(r, -1+delta, 1-delta)`` and continue by a Taylor polynomial in the
excess ``x = r - c``. The mobility is frozen (degree 0), the singular part of
the potential and the entropy function are continued quadratically, so the
second derivative is frozen at the cut-off points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import interpolate
from scipy.special import xlogy

from anideg.errors import InitialDatumOutOfRange, QuadratureFailure

Scalar = Callable[[np.ndarray], np.ndarray]
# (r, order) -> value of the order-th derivative
Derivs = Callable[[np.ndarray, int], np.ndarray]

QUAD_TOL = 1e-10
TABLE_NODES = 10_001


@dataclass(frozen=True)
class MaterialSpec:
    """Potential psi = psi1 + psi2 and mobility b = (1 - r^2)^m B.

    ``psi1`` only needs to be valid on the open interval (-1, 1); it is
    never evaluated outside the regularization window. ``Phi`` is an
    optional closed form for the entropy function on (-1, 1).
    """

    m: float
    B: Scalar
    B_prime: Scalar
    B_lower: float
    B_upper: float
    F: Scalar
    psi1: Derivs
    psi2: Derivs
    preset: str = "custom"
    params: dict = field(default_factory=dict)
    Phi: Derivs | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("degeneracy exponent m must be >= 1")
        if not 0 < self.B_lower <= self.B_upper:
            raise ValueError("need 0 < B_lower <= B_upper")


def _const(c):
    return lambda r: np.full(np.shape(r), float(c))


def log_quench(theta=1.0, theta_c=2.0):
    """Logarithmic (Flory-Huggins type) potential with m = 1, B = 1."""

    def psi1(r, order=0):
        if order == 0:
            return 0.5 * theta * (xlogy(1 + r, 1 + r) + xlogy(1 - r, 1 - r))
        if order == 1:
            return theta * np.arctanh(r)
        return theta / (1 - r * r)

    def psi2(r, order=0):
        if order == 0:
            return 0.5 * theta_c * (1 - r * r)
        if order == 1:
            return -theta_c * np.asarray(r, dtype=float)
        return np.full(np.shape(r), -float(theta_c))

    return MaterialSpec(
        m=1.0,
        B=_const(1.0),
        B_prime=_const(0.0),
        B_lower=1.0,
        B_upper=1.0,
        F=_const(theta),
        psi1=psi1,
        psi2=psi2,
        preset="log_quench",
        params={"theta": theta, "theta_c": theta_c},
        Phi=_phi_closed_form(1),
    )


def double_well(m=1.0):
    """Smooth quartic double well, psi1 = 0, with mobility (1 - r^2)^m."""

    def psi1(r, order=0):
        return np.zeros(np.shape(r))

    def psi2(r, order=0):
        r = np.asarray(r, dtype=float)
        if order == 0:
            return 0.25 * (1 - r * r) ** 2
        if order == 1:
            return r * r * r - r
        return 3 * r * r - 1

    return MaterialSpec(
        m=float(m),
        B=_const(1.0),
        B_prime=_const(0.0),
        B_lower=1.0,
        B_upper=1.0,
        F=_const(0.0),
        psi1=psi1,
        psi2=psi2,
        preset="double_well",
        params={"m": float(m)},
        Phi=_phi_closed_form(m),
    )


def _phi_closed_form(m):
    """Closed-form entropy function for B = 1 and m in {1, 2}."""
    if m == 1:

        def Phi(r, order=0):
            if order == 0:
                return 0.5 * (xlogy(1 + r, 1 + r) + xlogy(1 - r, 1 - r))
            if order == 1:
                return np.arctanh(r)
            return 1 / (1 - r * r)

        return Phi
    if m == 2:

        def Phi(r, order=0):
            r = np.asarray(r, dtype=float)
            s = 1 - r * r
            if order == 0:
                return 0.5 * r * np.arctanh(r)
            if order == 1:
                return 0.5 * np.arctanh(r) + 0.5 * r / s
            return 1 / (s * s)

        return Phi
    return None


def eval_b(spec: MaterialSpec, r):
    r = np.asarray(r, dtype=float)
    inside = np.abs(r) <= 1
    rc = np.clip(r, -1, 1)
    out = np.where(inside, (1 - rc * rc) ** spec.m * spec.B(rc), 0.0)
    return out if out.ndim else float(out)


def eval_b_prime(spec: MaterialSpec, r):
    """b' on [-1, 1] (one-sided at the endpoints)."""
    r = np.clip(np.asarray(r, dtype=float), -1, 1)
    s = 1 - r * r
    m = spec.m
    out = -2 * m * r * s ** (m - 1) * spec.B(r) + s**m * spec.B_prime(r)
    return out if np.ndim(out) else float(out)


def mobility_lipschitz(spec: MaterialSpec, n=200_001):
    """sup |b'| over [-1, 1], sampled on a uniform grid."""
    r = np.linspace(-1, 1, n)
    return float(np.max(np.abs(eval_b_prime(spec, r))))


def identity_bpsi_residual(spec: MaterialSpec, r):
    """|b psi'' - (F B + b psi2'')| on (-1, 1)."""
    r = np.asarray(r, dtype=float)
    b = eval_b(spec, r)
    lhs = b * (spec.psi1(r, 2) + spec.psi2(r, 2))
    rhs = spec.F(r) * spec.B(r) + b * spec.psi2(r, 2)
    return np.abs(lhs - rhs)


# Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
_XGK = np.array([
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245, 0.405845151377397166906606412076961,
    0.586087235467691130294144845693013, 0.741531185599394439863864773280788,
    0.864864423359769072789712788640926, 0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
])


def _adaptive_gk(f, a, b, tol=QUAD_TOL, max_depth=30):
    """Integrals of f over each [a_i, b_i] by vectorized adaptive GK15.

    Intervals whose Gauss/Kronrod discrepancy exceeds ``tol`` are bisected
    until they converge; raises QuadratureFailure after ``max_depth`` rounds.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros(a.shape)
    owner = np.arange(a.size)
    budget = np.full(a.size, tol)
    for _ in range(max_depth):
        c = 0.5 * (a + b)
        r = 0.5 * (b - a)
        vals = f(c[:, None] + r[:, None] * _XGK[None, :])
        kron = r * (vals @ _WGK)
        gauss = r * (vals[:, 1::2] @ _WG)
        err = np.abs(kron - gauss)
        ok = err <= budget
        np.add.at(out, owner[ok], kron[ok])
        if ok.all():
            return out
        bad = ~ok
        a, b, owner, budget = a[bad], b[bad], owner[bad], budget[bad]
        c = 0.5 * (a + b)
        a, b = np.concatenate([a, c]), np.concatenate([c, b])
        owner = np.concatenate([owner, owner])
        budget = np.concatenate([budget, budget]) / 2
    raise QuadratureFailure("adaptive quadrature did not reach tolerance")


class RegularizedMaterial:
    """delta-regularization of a MaterialSpec; immutable after construction."""

    def __init__(self, base: MaterialSpec, delta: float):
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        self.base = base
        self.delta = float(delta)
        self.cut = 1.0 - self.delta
        self.b_min = min(eval_b(base, -self.cut), eval_b(base, self.cut))
        self.c_delta = 1.0 / self.b_min
        self._phi = base.Phi if base.Phi is not None else self._build_phi_table()

    def __repr__(self):
        return f"RegularizedMaterial({self.base.preset}, delta={self.delta})"

    def _clamp(self, r):
        r = np.asarray(r, dtype=float)
        c = np.clip(r, -self.cut, self.cut)
        return c, r - c

    def _build_phi_table(self):
        base = self.base
        nodes = np.linspace(-self.cut, self.cut, TABLE_NODES)
        mid = TABLE_NODES // 2
        g1 = np.zeros(TABLE_NODES)
        g2 = np.zeros(TABLE_NODES)

        def inv_b(t):
            return 1.0 / eval_b(base, t)

        def t_inv_b(t):
            return t / eval_b(base, t)

        # cumulative integrals outward from the node at r = 0
        w1 = _adaptive_gk(inv_b, nodes[:-1], nodes[1:])
        w2 = _adaptive_gk(t_inv_b, nodes[:-1], nodes[1:])
        g1[mid + 1 :] = np.cumsum(w1[mid:])
        g2[mid + 1 :] = np.cumsum(w2[mid:])
        g1[:mid] = -np.cumsum(w1[:mid][::-1])[::-1]
        g2[:mid] = -np.cumsum(w2[:mid][::-1])[::-1]
        # Phi(r) = int_0^r (r - t)/b(t) dt = r G1(r) - G2(r)
        phi = nodes * g1 - g2
        d2 = inv_b(nodes)
        spline0 = interpolate.CubicHermiteSpline(nodes, phi, g1)
        spline1 = interpolate.CubicHermiteSpline(nodes, g1, d2)

        def Phi(r, order=0):
            if order == 0:
                return spline0(r)
            if order == 1:
                return spline1(r)
            return inv_b(r)

        return Phi

    # mobility
    def b(self, r):
        c, _ = self._clamp(r)
        out = eval_b(self.base, c)
        return out

    def b_prime(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(np.abs(r) < self.cut, eval_b_prime(self.base, np.clip(r, -self.cut, self.cut)), 0.0)
        return out if out.ndim else float(out)

    # potential
    def psi1(self, r, order=0):
        c, x = self._clamp(r)
        f = self.base.psi1
        if order == 0:
            out = f(c, 0) + f(c, 1) * x + 0.5 * f(c, 2) * x * x
        elif order == 1:
            out = f(c, 1) + f(c, 2) * x
        else:
            out = f(c, 2) + 0.0 * x
        return out if np.ndim(out) else float(out)

    def psi(self, r, order=0):
        out = self.psi1(r, order) + self.base.psi2(np.asarray(r, dtype=float), order)
        return out if np.ndim(out) else float(out)

    # entropy
    def Phi(self, r, order=0):
        c, x = self._clamp(r)
        f = self._phi
        if order == 0:
            out = f(c, 0) + f(c, 1) * x + 0.5 * f(c, 2) * x * x
        elif order == 1:
            out = f(c, 1) + f(c, 2) * x
        else:
            out = f(c, 2) + 0.0 * x
        return out if np.ndim(out) else float(out)

    def excess_constant(self):
        """2^(m+1) delta^m B^*, the factor in the pointwise excess bound."""
        m = self.base.m
        return 2.0 ** (m + 1) * self.delta**m * self.base.B_upper


# module-level evaluators mirroring the operation names


def eval_b_delta(reg: RegularizedMaterial, r):
    return reg.b(r)


def eval_b_delta_prime(reg: RegularizedMaterial, r):
    return reg.b_prime(r)


def eval_psi_delta(reg: RegularizedMaterial, r, order=0):
    return reg.psi(r, order)


def eval_Phi_delta(reg: RegularizedMaterial, r, order=0):
    return reg.Phi(r, order)


def check_excess_bound(reg: RegularizedMaterial, z) -> bool:
    z = np.asarray(z, dtype=float)
    lhs = np.maximum(np.abs(z) - 1, 0.0) ** 2
    return bool(np.all(lhs <= reg.excess_constant() * reg.Phi(z) + 1e-12))


def regularize_initial(phi0, delta):
    phi0 = np.asarray(phi0, dtype=float)
    if np.max(np.abs(phi0), initial=0.0) > 1 + 1e-12:
        raise InitialDatumOutOfRange(f"max |phi0| = {np.max(np.abs(phi0)):.6g} exceeds 1")
    return (1 - delta) * phi0
