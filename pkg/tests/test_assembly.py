"""Tests for the discrete least-squares system assembly."""

import numpy as np
import pytest
import scipy.sparse as sp

from qrtomo import assembly
from qrtomo.forward import MediumCoefficients
from qrtomo.grids import Grid1D, Grid2D
from qrtomo.spectral import CouplingField, SpectralBoundaryData
from qrtomo.time_basis import MassMatrices


def random_system(rng, nx, n, one_d=False, problem="dirichlet_bc",
                  epsilon=1e-3, weighting="five_one"):
    if one_d:
        grid = Grid1D(R=1.0, Nx=nx)
        shape = (nx,)
    else:
        grid = Grid2D(R=1.0, Nx=nx)
        shape = (nx, nx)
    med = MediumCoefficients(
        a_principal=1.0 + rng.uniform(0, 1, shape),
        damping=rng.uniform(-1, 1, shape),
        drift=tuple(rng.uniform(-1, 1, shape)
                    for _ in range(1 if one_d else 2)),
        potential=rng.uniform(-1, 1, shape),
    )
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, n))
    mass = MassMatrices(A=A, B=B, psi0=rng.standard_normal(n))
    coup = CouplingField(A=A, B=B, a_principal=med.a_principal,
                         damping=med.damping)
    data = SpectralBoundaryData(
        problem_kind=problem,
        values=rng.standard_normal((n, grid.n_boundary)))
    sysm = assembly.assemble(grid, med, mass, coup, data, epsilon=epsilon,
                             problem_kind=problem, weighting=weighting)
    return grid, med, mass, data, sysm


def direct_functional(grid, med, mass, data, eps, problem, u,
                      weights=None):
    """Independent loop-based evaluation of the discrete functional."""
    nx, hx, n = grid.Nx, grid.hx, mass.A.shape[0]
    if weights is None:
        w_i, w_b, w_r = hx ** 2, hx, hx ** 2      # displayed functional
    else:
        w_i, w_b, w_r = weights
    J = 0.0
    for i in range(1, nx - 1):
        for j in range(1, nx - 1):
            s = med.a_principal[i, j] * mass.A + med.damping[i, j] * mass.B
            for m in range(n):
                lap = (u[i + 1, j, m] + u[i - 1, j, m] + u[i, j + 1, m]
                       + u[i, j - 1, m] - 4 * u[i, j, m]) / hx ** 2
                gx = (u[i + 1, j, m] - u[i - 1, j, m]) / (2 * hx)
                gy = (u[i, j + 1, m] - u[i, j - 1, m]) / (2 * hx)
                val = (lap + med.drift[0][i, j] * gx
                       + med.drift[1][i, j] * gy
                       + med.potential[i, j] * u[i, j, m]
                       - sum(s[m, q] * u[i, j, q] for q in range(n)))
                J += w_i * val ** 2
    bi, bj = grid.boundary_ij()
    for k in range(bi.size):
        i, j = bi[k], bj[k]
        for m in range(n):
            if i == 0:
                dn = (3 * u[0, j, m] - 4 * u[1, j, m] + u[2, j, m]) / (2 * hx)
            elif i == nx - 1:
                dn = (3 * u[-1, j, m] - 4 * u[-2, j, m]
                      + u[-3, j, m]) / (2 * hx)
            elif j == 0:
                dn = (3 * u[i, 0, m] - 4 * u[i, 1, m] + u[i, 2, m]) / (2 * hx)
            else:
                dn = (3 * u[i, -1, m] - 4 * u[i, -2, m]
                      + u[i, -3, m]) / (2 * hx)
            if problem == "dirichlet_bc":
                J += w_b * ((dn - data.values[m, k]) ** 2 + u[i, j, m] ** 2)
            else:
                J += w_b * (dn ** 2 + (u[i, j, m] - data.values[m, k]) ** 2)
    reg = w_r * np.sum(u ** 2)
    for i in range(1, nx - 1):
        for j in range(1, nx - 1):
            for m in range(n):
                gx = (u[i + 1, j, m] - u[i - 1, j, m]) / (2 * hx)
                gy = (u[i, j + 1, m] - u[i, j - 1, m]) / (2 * hx)
                lap = (u[i + 1, j, m] + u[i - 1, j, m] + u[i, j + 1, m]
                       + u[i, j - 1, m] - 4 * u[i, j, m]) / hx ** 2
                reg += w_r * (gx ** 2 + gy ** 2 + lap ** 2)
    return J + eps * reg


@pytest.mark.parametrize("nx", [3, 5, 7])
@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("problem", ["dirichlet_bc", "neumann_bc"])
@pytest.mark.parametrize("weighting", ["five_one", "lineup"])
def test_functional_identity(nx, n, problem, weighting):
    rng = np.random.default_rng(11 * nx + n)
    grid, med, mass, data, sysm = random_system(rng, nx, n, problem=problem,
                                                weighting=weighting)
    u = rng.standard_normal((nx, nx, n))
    if weighting == "five_one":
        weights = None                           # hx^2, hx, hx^2
    else:
        weights = (grid.hx ** 4, 1.0, 1.0)       # line-up matrix scales
    direct = direct_functional(grid, med, mass, data, 1e-3, problem, u,
                               weights=weights)
    mine = sysm.functional_value(u.ravel())
    assert abs(direct - mine) <= 1e-10 * abs(direct)


def test_hand_oracle_single_row():
    # 3x3 grid, N=1, plain Laplacian: the single PDE row is
    # hx * [stencil/hx^2, center -4/hx^2 - s11].
    grid = Grid2D(R=1.0, Nx=3)
    z = np.zeros((3, 3))
    med = MediumCoefficients(a_principal=np.ones((3, 3)), damping=z,
                             drift=(z, z), potential=z)
    s11 = 2.5
    mass = MassMatrices(A=np.array([[s11]]), B=np.array([[0.0]]),
                        psi0=np.array([1.0]))
    coup = CouplingField(A=mass.A, B=mass.B, a_principal=med.a_principal,
                         damping=med.damping)
    data = SpectralBoundaryData(problem_kind="dirichlet_bc",
                                values=np.zeros((1, grid.n_boundary)))
    sysm = assembly.assemble(grid, med, mass, coup, data, 1e-12,
                             "dirichlet_bc", weighting="five_one")
    row = sysm.explicit_blocks()["L"].toarray()[0]
    hx = grid.hx
    expect = np.zeros(9)
    expect[[1, 3, 5, 7]] = hx / hx ** 2
    expect[4] = hx * (-4.0 / hx ** 2 - s11)
    assert np.abs(row - expect).max() == 0.0


@pytest.mark.parametrize("problem", ["dirichlet_bc", "neumann_bc"])
def test_functional_at_zero_is_data_norm(problem):
    rng = np.random.default_rng(3)
    _, _, _, _, sysm = random_system(rng, 5, 2, problem=problem)
    expected = np.sum(sysm.data ** 2)
    assert sysm.functional_value(np.zeros(sysm.n_unknowns)) == expected


def test_normal_operator_symmetry():
    rng = np.random.default_rng(4)
    _, _, _, _, sysm = random_system(rng, 6, 3)
    for _ in range(20):
        v = rng.standard_normal(sysm.n_unknowns)
        w = rng.standard_normal(sysm.n_unknowns)
        lhs = w @ sysm.normal_apply(v)
        rhs = v @ sysm.normal_apply(w)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs))


def test_normal_operator_positive_definite():
    rng = np.random.default_rng(5)
    grid, _, _, _, sysm = random_system(rng, 6, 2)
    for _ in range(10):
        v = rng.standard_normal(sysm.n_unknowns)
        assert v @ sysm.normal_apply(v) >= sysm.epsilon * grid.hx ** 2 * (v @ v)


def test_dense_oracle_small():
    # matrix-free application equals the explicitly formed normal matrix
    rng = np.random.default_rng(6)
    _, _, _, _, sysm = random_system(rng, 3, 1)
    M = assembly.explicit_normal_matrix(sysm).toarray()
    assert np.abs(M - M.T).max() == 0.0
    for _ in range(5):
        v = rng.standard_normal(sysm.n_unknowns)
        exact = M @ v
        free = sysm.normal_apply(v)
        assert np.abs(free - exact).max() <= 1e-12 * np.abs(exact).max()


@pytest.mark.parametrize("one_d", [False, True])
@pytest.mark.parametrize("problem", ["dirichlet_bc", "neumann_bc"])
def test_matrix_free_matches_explicit(one_d, problem):
    rng = np.random.default_rng(7)
    _, _, _, _, sysm = random_system(rng, 6, 2, one_d=one_d, problem=problem)
    M = assembly.explicit_normal_matrix(sysm)
    v = rng.standard_normal(sysm.n_unknowns)
    exact = M @ v
    free = sysm.normal_apply(v)
    assert np.abs(free - exact).max() <= 1e-12 * np.abs(exact).max()
    # diagonal for the preconditioner
    d_exact = M.diagonal()
    d_mine = sysm.normal_diagonal()
    assert np.abs(d_mine - d_exact).max() <= 1e-12 * np.abs(d_exact).max()
    # right-hand side against the explicit adjoint of the data block
    blocks = sysm.explicit_blocks()
    carrier = "N" if problem == "dirichlet_bc" else "D"
    b_exact = blocks[carrier].T @ sysm.data.ravel()
    b_mine = sysm.normal_rhs()
    assert np.abs(b_mine - b_exact).max() <= 1e-12 * np.abs(b_exact).max()


def test_gradient_check():
    # M u - b equals half the finite-difference gradient of J.
    rng = np.random.default_rng(8)
    _, _, _, _, sysm = random_system(rng, 5, 2)
    v = rng.standard_normal(sysm.n_unknowns)
    g_exact = sysm.normal_apply(v) - sysm.normal_rhs()
    h = 1e-6
    g_fd = np.empty_like(v)
    for idx in range(v.size):
        vp = v.copy()
        vp[idx] += h
        vm = v.copy()
        vm[idx] -= h
        g_fd[idx] = (sysm.functional_value(vp)
                     - sysm.functional_value(vm)) / (4 * h)
    rel = np.abs(g_exact - g_fd).max() / np.abs(g_exact).max()
    assert rel <= 1e-5


def test_sparsity_counts():
    rng = np.random.default_rng(9)
    nx, n = 7, 3
    _, _, _, _, sysm = random_system(rng, nx, n)
    L = sysm.explicit_blocks()["L"]
    assert L.shape[0] == (nx - 2) ** 2 * n
    assert np.diff(L.indptr).max() <= 5 + n


def test_unknown_count_full_scale():
    rng = np.random.default_rng(10)
    _, _, _, _, sysm = random_system(rng, 81, 35)
    assert sysm.n_unknowns == 229635


def test_assemble_validation():
    rng = np.random.default_rng(12)
    grid, med, mass, data, _ = random_system(rng, 5, 2)
    coup = CouplingField(A=mass.A, B=mass.B, a_principal=med.a_principal,
                         damping=med.damping)
    with pytest.raises(ValueError):
        assembly.assemble(grid, med, mass, coup, data, 0.0, "dirichlet_bc")
    with pytest.raises(ValueError):
        assembly.assemble(grid, med, mass, coup, data, 1e-3, "mixed_bc")
    bad = SpectralBoundaryData(problem_kind="dirichlet_bc",
                               values=np.zeros((2, 3)))
    with pytest.raises(ValueError):
        assembly.assemble(grid, med, mass, coup, bad, 1e-3, "dirichlet_bc")
    with pytest.raises(ValueError):
        assembly.assemble(grid, med, mass, coup, data, 1e-3, "dirichlet_bc",
                          weighting="quadrature")


def test_debug_export_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    _, _, _, _, sysm = random_system(rng, 4, 1)
    path = tmp_path / "blocks.txt"
    sysm.blocks_to_text(path)
    blocks = sysm.explicit_blocks()
    seen = {name: sp.lil_matrix(mat.shape) for name, mat in blocks.items()}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            name, r, c, v = line.split()
            seen[name][int(r), int(c)] = float(v)
    for name, mat in blocks.items():
        assert np.abs(seen[name].toarray() - mat.toarray()).max() <= 1e-15
