"""Stencil and indexing tests: exactness on low-degree polynomials, a
brute-force stencil oracle on a small random field, and flatten/unflatten
round trips against the closed-form index formula."""
import numpy as np
import pytest

from qrtomo import grids


def make_grid(nx=9, R=1.0):
    return grids.Grid2D(R=R, Nx=nx)


# ------------------------------------------------------------ grid basics
def test_spacing_and_nodes():
    g = make_grid(5, R=2.0)
    assert g.hx == 1.0
    assert np.allclose(g.nodes, [-2, -1, 0, 1, 2])
    tg = grids.TimeGrid(T=2.0, NT=201)
    assert abs(tg.ht - 0.01) < 1e-15
    assert tg.nodes[0] == 0.0 and tg.nodes[-1] == 2.0


def test_grid_validation():
    with pytest.raises(ValueError):
        grids.Grid2D(R=1.0, Nx=2)
    with pytest.raises(ValueError):
        grids.Grid2D(R=-1.0, Nx=5)
    with pytest.raises(ValueError):
        grids.TimeGrid(T=1.0, NT=2)


def test_boundary_partition_unique_and_complete():
    g = make_grid(7)
    i, j = g.boundary_ij()
    assert i.size == g.n_boundary == 4 * 7 - 4
    pairs = set(zip(i.tolist(), j.tolist()))
    assert len(pairs) == g.n_boundary
    want = {(a, b) for a in range(7) for b in range(7)
            if a in (0, 6) or b in (0, 6)}
    assert pairs == want
    # sides own corners per convention: x-sides all j, y-sides interior i
    s = g.boundary_sides()
    assert np.all(i[s["left"]] == 0) and j[s["left"]].size == 7
    assert np.all(j[s["bottom"]] == 0) and np.all((i[s["bottom"]] > 0)
                                                  & (i[s["bottom"]] < 6))


# ------------------------------------------------------------ stencils
def test_laplacian_exact_on_quadratic():
    g = make_grid(9)
    X, Y = g.mesh()
    lap = grids.laplacian_stencil(g, X ** 2 + Y ** 2)
    assert np.max(np.abs(lap - 4.0)) < 1e-12
    assert np.max(np.abs(grids.laplacian_stencil(g, np.ones_like(X)))) == 0.0


def test_laplacian_exact_on_cubics():
    g = make_grid(11)
    X, Y = g.mesh()
    lap = grids.laplacian_stencil(g, X ** 3 + Y ** 3 - X * Y)
    want = 6.0 * (X + Y)[1:-1, 1:-1]
    assert np.max(np.abs(lap - want)) < 1e-11


def test_laplacian_brute_force_oracle():
    g = make_grid(5)
    rng = np.random.default_rng(3)
    f = rng.standard_normal((5, 5))
    lap = grids.laplacian_stencil(g, f)
    for i in range(1, 4):
        for j in range(1, 4):
            direct = (f[i + 1, j] + f[i - 1, j] + f[i, j + 1] + f[i, j - 1]
                      - 4 * f[i, j]) / g.hx ** 2
            assert lap[i - 1, j - 1] == direct


def test_gradient_exact_on_linears_and_xy():
    g = make_grid(5)
    X, Y = g.mesh()
    dx, dy = grids.gradient_stencil(g, 2 * X + Y)
    assert np.max(np.abs(dx - 2.0)) < 1e-14
    assert np.max(np.abs(dy - 1.0)) < 1e-14
    dx, dy = grids.gradient_stencil(g, X * Y)
    assert np.max(np.abs(dx - Y[1:-1, 1:-1])) < 1e-14
    assert np.max(np.abs(dy - X[1:-1, 1:-1])) < 1e-14
    dz = grids.gradient_stencil(g, np.zeros((5, 5)))
    assert len(dz) == 2 and np.all(dz[0] == 0)


def test_normal_derivative_linear_field():
    g = make_grid(9)
    X, _ = g.mesh()
    nd = grids.normal_derivative(g, X)
    s = g.boundary_sides()
    assert np.max(np.abs(nd[s["left"]] + 1.0)) < 1e-13   # -d/dx(x) = -1
    assert np.max(np.abs(nd[s["right"]] - 1.0)) < 1e-13
    assert np.max(np.abs(nd[s["bottom"]])) < 1e-13
    assert np.max(np.abs(nd[s["top"]])) < 1e-13


def test_normal_derivative_exact_on_quadratic():
    g = make_grid(9)  # R = 1
    X, Y = g.mesh()
    nd = grids.normal_derivative(g, X ** 2)
    s = g.boundary_sides()
    # -d/dx(x^2) at x = -1 is +2
    assert np.max(np.abs(nd[s["left"]] - 2.0)) < 1e-12
    assert np.max(np.abs(nd[s["right"]] - 2.0)) < 1e-12
    assert np.max(np.abs(nd[s["bottom"]])) < 1e-12
    nd = grids.normal_derivative(g, np.full((9, 9), 7.0))
    assert np.max(np.abs(nd)) < 1e-13


def test_normal_derivative_1d():
    g = grids.Grid1D(R=1.0, Nx=9)
    f = g.nodes ** 2
    nd = grids.normal_derivative(g, f)
    assert np.allclose(nd, [2.0, 2.0], atol=1e-12)
    lap = grids.laplacian_stencil(g, f)
    assert np.max(np.abs(lap - 2.0)) < 1e-12
    (dx,) = grids.gradient_stencil(g, f)
    assert np.max(np.abs(dx - 2 * g.nodes[1:-1])) < 1e-12
    assert np.allclose(g.boundary_values(f), [1.0, 1.0])


# ------------------------------------------------------------ flat indexing
def test_flatten_formula_values():
    fm = grids.FlatIndexMap(Nx=81, N=35)
    assert fm.flatten(1, 1, 1) == 1
    assert fm.flatten(2, 1, 1) == 35 * 81 + 1 == 2836
    assert fm.flatten(81, 81, 35) == fm.size == 35 * 81 ** 2


def test_flatten_round_trip():
    fm = grids.FlatIndexMap(Nx=4, N=3)
    seen = set()
    for i in range(1, 5):
        for j in range(1, 5):
            for m in range(1, 4):
                k = fm.flatten(i, j, m)
                assert fm.unflatten(k) == (i, j, m)
                seen.add(k)
    assert seen == set(range(1, fm.size + 1))


def test_flatten_matches_c_order_ravel():
    fm = grids.FlatIndexMap(Nx=5, N=4)
    arr = np.arange(fm.size).reshape(5, 5, 4)
    for (i, j, m) in [(1, 1, 1), (3, 2, 4), (5, 5, 4), (2, 5, 1)]:
        assert arr[i - 1, j - 1, m - 1] == fm.flatten(i, j, m) - 1


def test_flatten_validation():
    fm = grids.FlatIndexMap(Nx=4, N=3)
    for bad in [(0, 1, 1), (5, 1, 1), (1, 1, 4), (1, 0, 2)]:
        with pytest.raises(ValueError):
            fm.flatten(*bad)
    with pytest.raises(ValueError):
        fm.unflatten(0)
    with pytest.raises(ValueError):
        fm.unflatten(fm.size + 1)


def test_field_csv_round_trip(tmp_path):
    g = make_grid(4)
    X, Y = g.mesh()
    f = X + 10 * Y
    path = tmp_path / "field.csv"
    grids.field_to_csv(path, g, f)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (16, 3)
    assert np.allclose(data[:, 2], f.ravel())
    assert np.allclose(data[0, :2], [-1.0, -1.0])
