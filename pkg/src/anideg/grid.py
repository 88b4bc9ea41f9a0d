"""Uniform periodic grids and their difference operators.

Scalar fields are plain arrays of shape ``grid.shape``; vector fields carry
a leading axis of length ``d``. The gradient uses forward quotients and the
divergence backward quotients, so the pair is exactly adjoint under the
midpoint quadrature ``sum(f * g) * cell_volume``.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from anideg.errors import SingularMode

MAGIC = b"ADCH1"


@dataclass(frozen=True)
class TorusGrid:
    N: tuple[int, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        N = tuple(int(n) for n in self.N)
        lower = tuple(float(a) for a in self.lower)
        upper = tuple(float(b) for b in self.upper)
        if not 1 <= len(N) <= 3 or len(lower) != len(N) or len(upper) != len(N):
            raise ValueError("grid needs 1 to 3 axes with matching extents")
        for n in N:
            if n < 8 or n & (n - 1):
                raise ValueError(f"points per axis must be a power of two >= 8, got {n}")
        for a, b in zip(lower, upper):
            if not a < b:
                raise ValueError("each axis needs lower < upper")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def uniform(cls, d, n, length=1.0):
        return cls((n,) * d, (0.0,) * d, (float(length),) * d)

    @property
    def dim(self):
        return len(self.N)

    @property
    def shape(self):
        return self.N

    @property
    def size(self):
        return int(np.prod(self.N))

    @cached_property
    def h(self):
        return tuple((b - a) / n for a, b, n in zip(self.lower, self.upper, self.N))

    @cached_property
    def cell_volume(self):
        return float(np.prod(self.h))

    @cached_property
    def volume(self):
        return float(np.prod([b - a for a, b in zip(self.lower, self.upper)]))

    def coords(self):
        axes = [a + hh * np.arange(n) for a, hh, n in zip(self.lower, self.h, self.N)]
        return np.meshgrid(*axes, indexing="ij")

    # difference quotients

    def dq_forward(self, f, axis):
        return (np.roll(f, -1, axis=axis) - f) / self.h[axis]

    def dq_backward(self, f, axis):
        return (f - np.roll(f, 1, axis=axis)) / self.h[axis]

    def grad(self, f):
        return np.stack([self.dq_forward(f, j) for j in range(self.dim)])

    def div(self, v):
        return sum(self.dq_backward(v[j], j) for j in range(self.dim))

    def lap(self, f):
        return sum(self.dq_backward(self.dq_forward(f, j), j) for j in range(self.dim))

    def face_average(self, f, axis):
        """Arithmetic mean of the two nodes bounding the forward face."""
        return 0.5 * (f + np.roll(f, -1, axis=axis))

    # quadrature

    def integrate(self, f):
        return float(np.sum(f) * self.cell_volume)

    def inner(self, f, g):
        return float(np.sum(f * g) * self.cell_volume)

    def mean(self, f):
        return float(np.mean(f))

    def norms(self, f):
        """(L2, Linf, H1 seminorm) of a scalar field."""
        l2 = np.sqrt(self.inner(f, f))
        linf = float(np.max(np.abs(f)))
        g = self.grad(f)
        h1 = np.sqrt(self.inner(g, g))
        return l2, linf, h1

    def hessian_frobenius_sq(self, f):
        """sum_{i,j} || d_j^+ d_i^+ f ||^2 with mixed forward quotients."""
        total = 0.0
        for i in range(self.dim):
            di = self.dq_forward(f, i)
            for j in range(self.dim):
                dij = self.dq_forward(di, j)
                total += np.sum(dij * dij)
        return float(total * self.cell_volume)

    # Fourier side

    def wavenumbers(self):
        """Integer mode indices on the rfftn layout, one array per axis."""
        ks = [np.fft.fftfreq(n, 1.0 / n) for n in self.N[:-1]]
        ks.append(np.fft.rfftfreq(self.N[-1], 1.0 / self.N[-1]))
        return np.meshgrid(*ks, indexing="ij")

    def neg_lap_symbol(self):
        """Symbol of -lap_h: sum_j 4/h_j^2 sin^2(pi k_j / N_j)."""
        return self._neg_lap_symbol

    @cached_property
    def _neg_lap_symbol(self):
        lam = 0.0
        for k, n, hh in zip(self.wavenumbers(), self.N, self.h):
            lam = lam + 4.0 / hh**2 * np.sin(np.pi * k / n) ** 2
        return lam

    def spectral_solve(self, multiplier, rhs, zero_mode=0.0):
        """Solve multiplier(k) u_hat(k) = rhs_hat(k) on the rfftn layout.

        Modes with a zero multiplier must carry a negligible right-hand side;
        they are set to ``zero_mode`` (only meaningful for k = 0).
        """
        rhs_hat = np.fft.rfftn(rhs)
        multiplier = np.broadcast_to(np.asarray(multiplier, dtype=float), rhs_hat.shape)
        zero = multiplier == 0
        if np.any(zero):
            scale = max(np.max(np.abs(rhs_hat)), np.finfo(float).tiny)
            if np.any(np.abs(rhs_hat[zero]) > 1e-12 * scale):
                raise SingularMode("zero multiplier meets a nonzero right-hand-side mode")
        u_hat = np.where(zero, 0.0, rhs_hat / np.where(zero, 1.0, multiplier))
        u = np.fft.irfftn(u_hat, s=self.N, axes=range(self.dim))
        if np.any(zero) and zero_mode:
            u = u + zero_mode
        return u


def write_snapshot(path, grid: TorusGrid, t, values):
    """Binary snapshot: magic, u32 d, u32 N_i, f64 (a_i, b_i), f64 t, values.

    Written to a temporary file in the same directory and renamed.
    """
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.shape != grid.shape:
        raise ValueError("field shape does not match grid")
    header = MAGIC + struct.pack("<I", grid.dim)
    header += struct.pack(f"<{grid.dim}I", *grid.N)
    for a, b in zip(grid.lower, grid.upper):
        header += struct.pack("<2d", a, b)
    header += struct.pack("<d", float(t))
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(header)
        fh.write(values.tobytes(order="C"))
    os.replace(tmp, path)


def read_snapshot(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:5] != MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    off = 5
    (d,) = struct.unpack_from("<I", data, off)
    off += 4
    N = struct.unpack_from(f"<{d}I", data, off)
    off += 4 * d
    ext = struct.unpack_from(f"<{2 * d}d", data, off)
    off += 16 * d
    (t,) = struct.unpack_from("<d", data, off)
    off += 8
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(N).astype(float)
    grid = TorusGrid(tuple(N), ext[0::2], ext[1::2])
    return grid, t, values
