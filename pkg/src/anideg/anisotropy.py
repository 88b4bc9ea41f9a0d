"""Two-homogeneous anisotropy densities ``A`` and their gradients.

Three families are provided:

* ``isotropic``      A(p) = |p|^2 / 2
* ``quadratic``      A(p) = p.Mp / 2 with M symmetric
* ``ellipsoid_sum``  A(p) = gamma(p)^2 / 2, gamma(p) = sum_l sqrt(p.G_l p)

All evaluators accept either a single d-vector or an array of shape
``(d, ...)`` (a vector field on a grid) and broadcast over trailing axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize

from anideg.errors import DimensionMismatch, NotPositive, NotStronglyMonotone

FAMILIES = ("isotropic", "quadratic", "ellipsoid_sum")


class Constants(NamedTuple):
    A0: float
    A1: float
    A2: float
    cA: float


@dataclass
class AnisotropySpec:
    family: str
    dim: int
    matrices: tuple[np.ndarray, ...] = ()
    constants: Constants | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown anisotropy family {self.family!r}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        mats = tuple(np.array(m, dtype=float).reshape(self.dim, self.dim) for m in self.matrices)
        for m in mats:
            if not np.allclose(m, m.T, rtol=0, atol=1e-14 * max(1.0, np.abs(m).max())):
                raise ValueError("anisotropy matrices must be symmetric")
        if self.family == "quadratic" and len(mats) != 1:
            raise ValueError("quadratic family takes exactly one matrix")
        if self.family == "ellipsoid_sum" and len(mats) < 1:
            raise ValueError("ellipsoid_sum family needs at least one matrix")
        if self.family == "isotropic":
            mats = ()
        self.matrices = mats

    @classmethod
    def isotropic(cls, dim):
        return cls("isotropic", dim)

    @classmethod
    def quadratic(cls, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls("quadratic", M.shape[0], (M,))

    @classmethod
    def ellipsoid_sum(cls, Gs):
        Gs = [np.atleast_2d(np.asarray(G, dtype=float)) for G in Gs]
        return cls("ellipsoid_sum", Gs[0].shape[0], tuple(Gs))


def _as_field(spec, p):
    p = np.asarray(p, dtype=float)
    if p.ndim == 0 or p.shape[0] != spec.dim:
        raise DimensionMismatch(
            f"expected leading dimension {spec.dim}, got shape {p.shape}"
        )
    return p


def _quad(G, p):
    # p.G p for p of shape (d, ...)
    return np.einsum("i...,ij,j...->...", p, G, p)


def _matvec(G, p):
    return np.einsum("ij,j...->i...", G, p)


def _gammas(spec, p):
    # sqrt(p.G_l p) per ellipsoid, clipped at zero against roundoff
    return [np.sqrt(np.maximum(_quad(G, p), 0.0)) for G in spec.matrices]


def eval_A(spec: AnisotropySpec, p) -> np.ndarray | float:
    p = _as_field(spec, p)
    if spec.family == "isotropic":
        out = 0.5 * np.sum(p * p, axis=0)
    elif spec.family == "quadratic":
        out = 0.5 * _quad(spec.matrices[0], p)
    else:
        gamma = sum(_gammas(spec, p))
        out = 0.5 * gamma * gamma
    return out if np.ndim(out) else float(out)


def eval_Agrad(spec: AnisotropySpec, p) -> np.ndarray:
    p = _as_field(spec, p)
    if spec.family == "isotropic":
        return p.copy()
    if spec.family == "quadratic":
        return _matvec(spec.matrices[0], p)
    gl = _gammas(spec, p)
    gamma = sum(gl)
    out = np.zeros_like(p)
    for G, g in zip(spec.matrices, gl):
        # G p / g_l is bounded by sqrt(lambda_max(G)); A'(0) := 0
        safe = np.where(g > 0, g, 1.0)
        out = out + np.where(g > 0, _matvec(G, p) / safe, 0.0)
    return gamma * out


def agrad_lipschitz(spec: AnisotropySpec) -> float:
    """Upper bound for the Lipschitz constant of ``A'`` on all of R^d.

    For the ellipsoid-sum family the Hessian of A = gamma^2/2 is
    grad(gamma) grad(gamma)^T + gamma * Hess(gamma); both pieces are bounded
    on the unit sphere via the extreme eigenvalues of each G_l, and A' is
    one-homogeneous, so the sphere bound is global.
    """
    if spec.family == "isotropic":
        return 1.0
    if spec.family == "quadratic":
        return float(np.linalg.norm(spec.matrices[0], 2))
    lmax = np.array([np.linalg.eigvalsh(G)[-1] for G in spec.matrices])
    lmin = np.array([np.linalg.eigvalsh(G)[0] for G in spec.matrices])
    if np.any(lmin <= 0):
        raise NotPositive("ellipsoid matrices must be positive definite")
    s = np.sqrt(lmax).sum()
    return float(s * s + s * np.sum(lmax / np.sqrt(lmin)))


def hessian_A(spec: AnisotropySpec, p) -> np.ndarray:
    """Hessian of A at p != 0 (shape (d, d, ...)); constant for the quadratic families."""
    p = np.asarray(p, dtype=float)
    d = spec.dim
    if spec.family == "isotropic":
        return np.broadcast_to(np.eye(d).reshape((d, d) + (1,) * (p.ndim - 1)), (d, d) + p.shape[1:])
    if spec.family == "quadratic":
        M = spec.matrices[0]
        return np.broadcast_to(M.reshape((d, d) + (1,) * (p.ndim - 1)), (d, d) + p.shape[1:])
    gam = np.zeros(p.shape[1:])
    dgam = np.zeros(p.shape)
    hgam = np.zeros((d, d) + p.shape[1:])
    for G in spec.matrices:
        Gp = _matvec(G, p)
        s = np.sqrt(np.sum(p * Gp, axis=0))
        gam = gam + s
        dgam = dgam + Gp / s
        hgam = hgam + G.reshape((d, d) + (1,) * (p.ndim - 1)) / s - Gp[:, None] * Gp[None, :] / s**3
    return dgam[:, None] * dgam[None, :] + gam * hgam


def _min_hessian_eig(spec, P, n_starts=8):
    """Smallest Hessian eigenvalue of A on the sphere, refined from the best of P."""
    H = np.moveaxis(hessian_A(spec, P), (0, 1), (-2, -1))
    lam = np.linalg.eigvalsh(H)[..., 0]
    best = float(lam.min())
    if spec.family != "ellipsoid_sum":
        return best

    def f(x):
        return float(np.linalg.eigvalsh(hessian_A(spec, x[:, None])[..., 0])[0])

    for i in np.argsort(lam)[:n_starts]:
        res = optimize.minimize(f, P[:, i], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best


def certify_constants(spec: AnisotropySpec, n_samples: int = 20000, seed: int = 0) -> Constants:
    """Empirical structural constants by seeded sampling; stored on ``spec``.

    Half of the monotonicity pairs are independent Gaussian draws, half are
    close pairs ``(p, p + 1e-3 v)`` so that the infimum of the quotient (the
    smallest eigenvalue of the Hessian of A) is resolved. ``cA`` is then
    lowered, if needed, to the smallest Hessian eigenvalue found by a local
    search started from the sampled directions.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    rng = np.random.default_rng(seed)
    d = spec.dim

    p = rng.standard_normal((d, n_samples))
    q = rng.standard_normal((d, n_samples))
    v = rng.standard_normal((d, n_samples))
    v /= np.linalg.norm(v, axis=0)
    p_near = rng.standard_normal((d, n_samples))
    p_near /= np.linalg.norm(p_near, axis=0)
    q_near = p_near + 1e-3 * v
    P = np.concatenate([p, p_near], axis=1)
    Q = np.concatenate([q, q_near], axis=1)
    diff = P - Q
    mono = np.sum((eval_Agrad(spec, P) - eval_Agrad(spec, Q)) * diff, axis=0) / np.sum(diff * diff, axis=0)
    if not np.all(np.isfinite(mono)) or mono.min() <= 0:
        raise NotStronglyMonotone(
            f"{spec.family}: sampled monotonicity quotient min {np.nanmin(mono):.3e} <= 0"
        )

    u = rng.standard_normal((d, n_samples))
    u /= np.linalg.norm(u, axis=0)
    a = eval_A(spec, u)
    if not np.all(np.isfinite(a)) or a.min() <= 0:
        raise NotPositive(f"{spec.family}: A(p) <= 0 for a sampled p != 0")
    g = np.linalg.norm(eval_Agrad(spec, u), axis=0)

    cA = min(float(mono.min()), _min_hessian_eig(spec, p_near))
    if cA <= 0:
        raise NotStronglyMonotone(f"{spec.family}: Hessian eigenvalue {cA:.3e} <= 0 on the unit sphere")
    consts = Constants(float(a.min()), float(a.max()), float(g.max()), cA)
    spec.constants = consts
    return consts
