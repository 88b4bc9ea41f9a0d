import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anideg.errors import SingularMode
from anideg.grid import MAGIC, TorusGrid, read_snapshot, write_snapshot

grids = st.sampled_from(
    [
        TorusGrid.uniform(1, 16, 3.0),
        TorusGrid((8, 16), (0.0, -1.0), (2.0, 1.0)),
        TorusGrid((8, 8, 16), (0.0, 0.0, 0.0), (1.0, 2.0, 3.0)),
    ]
)


def dense(op, grid):
    """Matrix of a linear scalar operator, one column per unit field."""
    n = grid.size
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(op(e.reshape(grid.shape)).ravel())
    return np.array(cols).T


class TestConstruction:
    @pytest.mark.parametrize("n", [4, 12, 100])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            TorusGrid.uniform(1, n)

    def test_rejects_bad_extent(self):
        with pytest.raises(ValueError):
            TorusGrid((8,), (1.0,), (1.0,))
        with pytest.raises(ValueError):
            TorusGrid((8,) * 4, (0.0,) * 4, (1.0,) * 4)

    def test_geometry(self):
        g = TorusGrid((8, 16), (0.0, -1.0), (2.0, 1.0))
        assert g.h == (0.25, 0.125)
        assert g.cell_volume == pytest.approx(1 / 32)
        assert g.volume == pytest.approx(4.0)
        x, y = g.coords()
        assert x[1, 0] == 0.25 and y[0, 0] == -1.0

    def test_integrate_constant(self):
        g = TorusGrid.uniform(2, 8, 3.0)
        assert g.integrate(np.ones(g.shape)) == pytest.approx(9.0)


class TestOperators:
    @given(grids, st.integers(0, 10**6))
    def test_summation_by_parts(self, grid, seed):
        rng = np.random.default_rng(seed)
        f = rng.standard_normal(grid.shape)
        u = rng.standard_normal((grid.dim,) + grid.shape)
        lhs = grid.inner(grid.grad(f), u)
        rhs = -grid.inner(f, grid.div(u))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    @given(grids, st.integers(0, 10**6))
    def test_lap_is_div_grad(self, grid, seed):
        f = np.random.default_rng(seed).standard_normal(grid.shape)
        np.testing.assert_allclose(grid.lap(f), grid.div(grid.grad(f)), atol=1e-10)

    @given(grids, st.integers(0, 10**6))
    def test_div_has_zero_mean(self, grid, seed):
        u = np.random.default_rng(seed).standard_normal((grid.dim,) + grid.shape)
        assert abs(grid.mean(grid.div(u))) <= 1e-12 * np.max(np.abs(u)) / min(grid.h)

    def test_forward_quotient_by_hand(self):
        g = TorusGrid.uniform(1, 8, 8.0)
        f = np.arange(8.0) ** 2
        np.testing.assert_allclose(g.dq_forward(f, 0), [1, 3, 5, 7, 9, 11, 13, -49])
        np.testing.assert_allclose(g.dq_backward(f, 0), [-49, 1, 3, 5, 7, 9, 11, 13])

    def test_symbol_matches_dense_spectrum(self):
        g = TorusGrid((8, 16), (0.0, 0.0), (1.0, 3.0))
        L = dense(g.lap, g)
        eig = np.sort(np.linalg.eigvalsh(-(L + L.T) / 2))
        k0 = np.fft.fftfreq(8, 1 / 8)[:, None]
        k1 = np.fft.fftfreq(16, 1 / 16)[None, :]
        lam = 4 / g.h[0] ** 2 * np.sin(np.pi * k0 / 8) ** 2 + 4 / g.h[1] ** 2 * np.sin(np.pi * k1 / 16) ** 2
        np.testing.assert_allclose(eig, np.sort(lam.ravel()), atol=1e-9)

    def test_symbol_layout(self):
        g = TorusGrid((8, 16), (0.0, 0.0), (1.0, 3.0))
        x, y = g.coords()
        f = np.cos(2 * np.pi * 3 * x) * np.cos(2 * np.pi * 5 * y / 3)
        lam = g.neg_lap_symbol()[3, 5]
        np.testing.assert_allclose(-g.lap(f), lam * f, atol=1e-9)

    def test_second_order_consistency(self):
        errs = []
        for n in (16, 32, 64):
            g = TorusGrid.uniform(2, n, 2 * np.pi)
            x, y = g.coords()
            f = np.sin(x + 2 * y)
            errs.append(np.max(np.abs(g.lap(f) + 5 * f)))
        order = np.log2(np.array(errs[:-1]) / errs[1:])
        np.testing.assert_allclose(order, 2.0, atol=0.05)

    def test_hessian_of_quadratic_1d(self):
        g = TorusGrid.uniform(1, 16, 16.0)
        f = np.cos(2 * np.pi * np.arange(16) / 16)
        d2 = g.dq_forward(g.dq_forward(f, 0), 0)
        assert g.hessian_frobenius_sq(f) == pytest.approx(np.sum(d2**2))

    def test_norms(self):
        g = TorusGrid.uniform(1, 8, 2.0)
        l2, linf, h1 = g.norms(np.full(8, 3.0))
        assert (l2, linf, h1) == (pytest.approx(3 * np.sqrt(2)), 3.0, 0.0)


class TestSpectralSolve:
    @given(st.integers(0, 10**6), st.floats(0.1, 10.0))
    def test_helmholtz_against_dense_solve(self, seed, alpha):
        g = TorusGrid((8, 16), (0.0, 0.0), (1.0, 2.0))
        f = np.random.default_rng(seed).standard_normal(g.shape)
        A = alpha * np.eye(g.size) - dense(g.lap, g)
        expect = np.linalg.solve(A, f.ravel()).reshape(g.shape)
        got = g.spectral_solve(alpha + g.neg_lap_symbol(), f)
        np.testing.assert_allclose(got, expect, atol=1e-10)

    def test_poisson_zero_mean(self):
        g = TorusGrid.uniform(1, 32, 1.0)
        f = np.random.default_rng(0).standard_normal(g.shape)
        f -= f.mean()
        u = g.spectral_solve(g.neg_lap_symbol(), f, zero_mode=0.0)
        np.testing.assert_allclose(-g.lap(u), f, atol=1e-10)
        assert abs(u.mean()) < 1e-14

    def test_singular_mode(self):
        g = TorusGrid.uniform(1, 32, 1.0)
        with pytest.raises(SingularMode):
            g.spectral_solve(g.neg_lap_symbol(), np.ones(g.shape))


class TestSnapshots:
    @given(grids, st.integers(0, 10**6), st.floats(0, 1e3))
    def test_round_trip(self, tmp_path_factory, grid, seed, t):
        path = tmp_path_factory.mktemp("snap") / "s.adch"
        v = np.random.default_rng(seed).standard_normal(grid.shape)
        write_snapshot(path, grid, t, v)
        g2, t2, v2 = read_snapshot(path)
        assert g2 == grid and t2 == t
        np.testing.assert_array_equal(v2, v)

    def test_byte_layout(self, tmp_path):
        g = TorusGrid((8, 16), (0.0, -1.0), (2.0, 1.0))
        v = np.arange(128.0).reshape(8, 16)
        write_snapshot(tmp_path / "s", g, 1.5, v)
        data = (tmp_path / "s").read_bytes()
        head = MAGIC + struct.pack("<3I", 2, 8, 16) + struct.pack("<4d", 0.0, 2.0, -1.0, 1.0) + struct.pack("<d", 1.5)
        assert data[: len(head)] == head
        assert data[len(head) :] == v.astype("<f8").tobytes()
        assert [p.name for p in tmp_path.iterdir()] == ["s"]

    def test_shape_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            write_snapshot(tmp_path / "s", TorusGrid.uniform(1, 8), 0.0, np.zeros(16))
