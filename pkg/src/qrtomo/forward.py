"""Implicit finite-difference solver for the damped hyperbolic problem

    a_principal * u_tt + damping * u_t = Lu,   Lu = Laplace(u) + drift.grad(u) + potential*u

on (-R, R)^d x [0, T] with u(.,0) = p, u_t(.,0) = 0 and homogeneous
Dirichlet or Neumann boundary conditions, plus Cauchy-trace extraction and
multiplicative measurement noise.

Time stepping is the three-level scheme with the elliptic part averaged
over levels k+1 and k-1,

    a (u+ - 2u0 + u-)/ht^2 + damping (u+ - u-)/(2 ht) = (L_h u+ + L_h u-)/2 + F,

which is unconditionally solvable and O(ht^2 + hx^2) consistent; a fully
implicit right side at level k+1 alone would drop the temporal order to
one.  Start-up uses the Taylor step u^1 = p + (ht^2/2) a^{-1} (L_h p + F(0)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .grids import Grid1D, Grid2D, TimeGrid, normal_derivative

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
# Cauchy-data kinds: which BC generated the field, hence what is measured.
# dirichlet_bc -> measure the normal derivative; neumann_bc -> measure u.
PROBLEM_KINDS = ("dirichlet_bc", "neumann_bc")


@dataclass(frozen=True)
class MediumCoefficients:
    """Coefficient fields sampled on the grid nodes.

    a_principal multiplies u_tt and must be >= 1 everywhere; damping
    multiplies u_t; drift is a tuple of d component fields; potential is the
    zeroth-order coefficient of L.
    """

    a_principal: np.ndarray
    damping: np.ndarray
    drift: tuple
    potential: np.ndarray

    def __post_init__(self):
        if np.min(self.a_principal) < 1.0 - 1e-12:
            raise ValueError("a_principal must be >= 1 everywhere")


def constant_medium(grid, a=1.0, damping=0.0, drift=None, potential=0.0):
    shape = (grid.Nx,) if isinstance(grid, Grid1D) else (grid.Nx, grid.Nx)
    d = 1 if isinstance(grid, Grid1D) else 2
    if drift is None:
        drift = (0.0,) * d
    return MediumCoefficients(
        a_principal=np.full(shape, float(a)),
        damping=np.full(shape, float(damping)),
        drift=tuple(np.full(shape, float(b)) for b in drift),
        potential=np.full(shape, float(potential)),
    )


@dataclass(frozen=True)
class WaveField:
    """values[k] is the field at time node k; bc records the imposed condition."""

    grid: object
    tgrid: TimeGrid
    values: np.ndarray
    bc: str


@dataclass(frozen=True)
class CauchyData:
    """Lateral boundary measurements, trace[b, k] = value at boundary node b,
    time node k.  problem_kind dirichlet_bc stores the normal derivative of
    u; neumann_bc stores u itself."""

    problem_kind: str
    trace: np.ndarray
    grid: object
    tgrid: TimeGrid
    noise_level: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.problem_kind not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.problem_kind!r}")
        if self.trace.shape != (self.grid.n_boundary, self.tgrid.NT):
            raise ValueError("trace shape does not match grid/time grid")


# ------------------------------------------------------------------ operator

def lh_matrix(grid, medium: MediumCoefficients) -> sp.csr_matrix:
    """Sparse L_h with the 5-point/central interior stencil; boundary rows zero."""
    if isinstance(grid, Grid1D):
        return _lh_matrix_1d(grid, medium)
    nx, hx = grid.Nx, grid.hx
    ii, jj = np.meshgrid(np.arange(1, nx - 1), np.arange(1, nx - 1),
                         indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    center = ii * nx + jj
    b1 = medium.drift[0][ii, jj]
    b2 = medium.drift[1][ii, jj]
    c = medium.potential[ii, jj]
    inv_h2, inv_2h = 1.0 / hx ** 2, 1.0 / (2.0 * hx)
    rows = np.concatenate([center] * 5)
    cols = np.concatenate([center, center + nx, center - nx,
                           center + 1, center - 1])
    data = np.concatenate([
        -4.0 * inv_h2 + c,
        inv_h2 + b1 * inv_2h, inv_h2 - b1 * inv_2h,   # x neighbours
        inv_h2 + b2 * inv_2h, inv_h2 - b2 * inv_2h,   # y neighbours
    ])
    n = nx * nx
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def _lh_matrix_1d(grid, medium):
    nx, hx = grid.Nx, grid.hx
    ii = np.arange(1, nx - 1)
    b1 = medium.drift[0][ii]
    c = medium.potential[ii]
    inv_h2, inv_2h = 1.0 / hx ** 2, 1.0 / (2.0 * hx)
    rows = np.concatenate([ii] * 3)
    cols = np.concatenate([ii, ii + 1, ii - 1])
    data = np.concatenate([-2.0 * inv_h2 + c,
                           inv_h2 + b1 * inv_2h, inv_h2 - b1 * inv_2h])
    return sp.csr_matrix((data, (rows, cols)), shape=(nx, nx))


def _boundary_flat_indices(grid):
    if isinstance(grid, Grid1D):
        return np.array([0, grid.Nx - 1])
    i, j = grid.boundary_ij()
    return i * grid.Nx + j


def _bc_rows(grid, bc):
    """Boundary equations as a sparse block: identity rows (Dirichlet) or
    one-sided outward-derivative rows (Neumann), one per owned boundary node."""
    nb = _boundary_flat_indices(grid)
    n = grid.Nx if isinstance(grid, Grid1D) else grid.Nx ** 2
    if bc == DIRICHLET:
        return sp.csr_matrix((np.ones(nb.size), (nb, nb)), shape=(n, n))
    if isinstance(grid, Grid1D):
        inv_2h = 1.0 / (2.0 * grid.hx)
        rows = [0, 0, 0, grid.Nx - 1, grid.Nx - 1, grid.Nx - 1]
        cols = [0, 1, 2, grid.Nx - 1, grid.Nx - 2, grid.Nx - 3]
        data = np.array([3.0, -4.0, 1.0, 3.0, -4.0, 1.0]) * inv_2h
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    nx = grid.Nx
    inv_2h = 1.0 / (2.0 * grid.hx)
    i, j = grid.boundary_ij()
    sides = grid.boundary_sides()
    rows, cols, data = [], [], []
    step = {"left": nx, "right": -nx, "bottom": 1, "top": -1}
    for side, sl in sides.items():
        ib, jb = i[sl], j[sl]
        base = ib * nx + jb
        for offset, coef in ((0, 3.0), (1, -4.0), (2, 1.0)):
            rows.append(base)
            cols.append(base + offset * step[side])
            data.append(np.full(base.size, coef * inv_2h))
    return sp.csr_matrix((np.concatenate(data),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


# ------------------------------------------------------------------ solver

def solve_forward(medium, p, grid, tgrid, bc, forcing=None) -> WaveField:
    """March the three-level scheme from u = p, u_t = 0.

    forcing, if given, is a callable of the mesh coordinates and scalar time
    returning a field (used by manufactured-solution tests); it enters the
    equation as an additive right-hand side.
    """
    if bc not in (DIRICHLET, NEUMANN):
        raise ValueError(f"unknown boundary condition {bc!r}")
    p = np.asarray(p, dtype=float)
    bvals = grid.boundary_values(p)
    if np.max(np.abs(bvals)) > 1e-12:
        raise ValueError("initial source must vanish on the boundary")

    one_d = isinstance(grid, Grid1D)
    n = grid.Nx if one_d else grid.Nx ** 2
    shape = p.shape
    nb_idx = _boundary_flat_indices(grid)
    interior = np.ones(n, dtype=bool)
    interior[nb_idx] = False

    ht = tgrid.ht
    af = medium.a_principal.ravel()
    df = medium.damping.ravel()
    lh = lh_matrix(grid, medium)

    # step matrix: interior scheme rows + boundary condition rows
    diag = np.where(interior, af / ht ** 2 + df / (2.0 * ht), 0.0)
    m_step = sp.diags(diag) - 0.5 * lh + _bc_rows(grid, bc)
    try:
        lu = splu(m_step.tocsc())
    except RuntimeError as exc:
        raise RuntimeError(f"singular step matrix: {exc}") from exc

    if forcing is None:
        force = lambda t: 0.0
    else:
        coords = (grid.nodes,) if one_d else grid.mesh()
        force = lambda t: np.asarray(forcing(*coords, t), dtype=float).ravel()

    out = np.empty((tgrid.NT,) + shape)
    u_prev = p.ravel().copy()
    out[0] = p

    # Taylor start-up; boundary values completed from the imposed condition
    u1 = u_prev + 0.5 * ht ** 2 * (lh @ u_prev + np.where(interior, force(0.0), 0.0)) / af
    u1 = _enforce_bc(grid, bc, u1, nb_idx)
    out[1] = u1.reshape(shape)
    u_cur = u1

    coef_prev = af / ht ** 2 - df / (2.0 * ht)
    for k in range(1, tgrid.NT - 1):
        rhs = np.zeros(n)
        rhs[interior] = (2.0 * af / ht ** 2 * u_cur - coef_prev * u_prev
                         + 0.5 * (lh @ u_prev))[interior]
        if forcing is not None:
            rhs[interior] += force(tgrid.nodes[k])[interior]
        u_next = lu.solve(rhs)
        if bc == DIRICHLET:
            u_next[nb_idx] = 0.0   # pin exactly, not just to solver accuracy
        out[k + 1] = u_next.reshape(shape)
        u_prev, u_cur = u_cur, u_next
    return WaveField(grid=grid, tgrid=tgrid, values=out, bc=bc)


def _enforce_bc(grid, bc, u_flat, nb_idx):
    u = u_flat.copy()
    if bc == DIRICHLET:
        u[nb_idx] = 0.0
        return u
    if isinstance(grid, Grid1D):
        u[0] = (4.0 * u[1] - u[2]) / 3.0
        u[-1] = (4.0 * u[-2] - u[-3]) / 3.0
        return u
    nx = grid.Nx
    f = u.reshape(nx, nx)
    # bottom/top first (read interior only), then the corner-owning x-sides
    f[1:-1, 0] = (4.0 * f[1:-1, 1] - f[1:-1, 2]) / 3.0
    f[1:-1, -1] = (4.0 * f[1:-1, -2] - f[1:-1, -3]) / 3.0
    f[0, :] = (4.0 * f[1, :] - f[2, :]) / 3.0
    f[-1, :] = (4.0 * f[-2, :] - f[-3, :]) / 3.0
    return f.ravel()


# ------------------------------------------------------------------ traces

def extract_cauchy(field: WaveField) -> CauchyData:
    """Boundary measurement matching the field's boundary condition:
    normal derivative for a Dirichlet field, boundary values for Neumann."""
    grid, tgrid = field.grid, field.tgrid
    nbv = grid.n_boundary
    trace = np.empty((nbv, tgrid.NT))
    if field.bc == DIRICHLET:
        for k in range(tgrid.NT):
            trace[:, k] = normal_derivative(grid, field.values[k])
        kind = "dirichlet_bc"
    else:
        for k in range(tgrid.NT):
            trace[:, k] = grid.boundary_values(field.values[k])
        kind = "neumann_bc"
    return CauchyData(problem_kind=kind, trace=trace, grid=grid, tgrid=tgrid)


def add_noise(data: CauchyData, delta: float, seed: int) -> CauchyData:
    """Multiplicative uniform noise f -> f * (1 + delta * U[-1, 1]),
    i.i.d. per (boundary node, time node), from a seeded generator."""
    if delta < 0:
        raise ValueError("noise level must be >= 0")
    if delta == 0.0:
        return replace(data, noise_level=0.0, seed=seed)
    rng = np.random.default_rng(seed)
    rand = rng.uniform(-1.0, 1.0, size=data.trace.shape)
    return replace(data, trace=data.trace * (1.0 + delta * rand),
                   noise_level=delta, seed=seed)


# ------------------------------------------------------------------ export

def cauchy_to_json(data: CauchyData) -> str:
    grid = data.grid
    meta = {
        "problem_kind": data.problem_kind,
        "noise_level": data.noise_level,
        "seed": data.seed,
        "grid": {"dim": 1 if isinstance(grid, Grid1D) else 2,
                 "R": grid.R, "Nx": grid.Nx},
        "time": {"T": data.tgrid.T, "NT": data.tgrid.NT},
        "trace": data.trace.tolist(),
    }
    return json.dumps(meta)


def cauchy_from_json(text: str) -> CauchyData:
    meta = json.loads(text)
    g = meta["grid"]
    grid = Grid1D(R=g["R"], Nx=g["Nx"]) if g["dim"] == 1 else Grid2D(R=g["R"], Nx=g["Nx"])
    return CauchyData(
        problem_kind=meta["problem_kind"],
        trace=np.asarray(meta["trace"], dtype=float),
        grid=grid,
        tgrid=TimeGrid(T=meta["time"]["T"], NT=meta["time"]["NT"]),
        noise_level=meta["noise_level"],
        seed=meta["seed"],
    )
