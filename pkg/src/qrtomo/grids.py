"""Uniform tensor grids on (-R, R)^d (d = 1, 2) and [0, T], the
finite-difference stencils used throughout (5-point Laplacian, central
gradient, second-order one-sided boundary normal derivative), and the
flattened indexing of mode fields.

Boundary convention: the two x-sides (left i=1, right i=Nx in 1-based
terms) own all of their nodes including corners; the two y-sides (bottom,
top) own only interior i.  Every boundary node is owned exactly once and
boundary vectors are ordered (left, right, bottom, top), ascending along
each side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid2D:
    """Uniform (Nx x Nx) grid on the square (-R, R)^2."""

    R: float
    Nx: int

    def __post_init__(self):
        if self.Nx < 3:
            raise ValueError("Nx must be >= 3")
        if self.R <= 0:
            raise ValueError("R must be positive")

    @property
    def hx(self) -> float:
        return 2.0 * self.R / (self.Nx - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.R, self.R, self.Nx)

    def mesh(self):
        """Coordinate arrays X, Y of shape (Nx, Nx), first axis = x index."""
        return np.meshgrid(self.nodes, self.nodes, indexing="ij")

    @property
    def n_boundary(self) -> int:
        return 4 * self.Nx - 4

    def boundary_ij(self):
        """(i, j) integer arrays of the owned boundary nodes, in order."""
        n = self.Nx
        full = np.arange(n)
        inner = np.arange(1, n - 1)
        i = np.concatenate([np.zeros(n, int), np.full(n, n - 1),
                            inner, inner])
        j = np.concatenate([full, full,
                            np.zeros(n - 2, int), np.full(n - 2, n - 1)])
        return i, j

    def boundary_sides(self):
        """Slices of the boundary vector per side: left, right, bottom, top."""
        n = self.Nx
        return {"left": slice(0, n), "right": slice(n, 2 * n),
                "bottom": slice(2 * n, 3 * n - 2),
                "top": slice(3 * n - 2, 4 * n - 4)}

    def boundary_values(self, field: np.ndarray) -> np.ndarray:
        i, j = self.boundary_ij()
        return field[i, j]

    def boundary_coords(self):
        i, j = self.boundary_ij()
        return self.nodes[i], self.nodes[j]


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on the interval (-R, R)."""

    R: float
    Nx: int

    def __post_init__(self):
        if self.Nx < 3:
            raise ValueError("Nx must be >= 3")
        if self.R <= 0:
            raise ValueError("R must be positive")

    @property
    def hx(self) -> float:
        return 2.0 * self.R / (self.Nx - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.R, self.R, self.Nx)

    @property
    def n_boundary(self) -> int:
        return 2

    def boundary_values(self, field: np.ndarray) -> np.ndarray:
        return np.array([field[0], field[-1]])


@dataclass(frozen=True)
class TimeGrid:
    T: float
    NT: int

    def __post_init__(self):
        if self.NT < 3:
            raise ValueError("NT must be >= 3")
        if self.T <= 0:
            raise ValueError("T must be positive")

    @property
    def ht(self) -> float:
        return self.T / (self.NT - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.NT)


# ------------------------------------------------------------------ stencils

def laplacian_stencil(grid, field: np.ndarray) -> np.ndarray:
    """5-point (3-point in 1D) Laplacian on interior nodes."""
    h2 = grid.hx ** 2
    if field.ndim == 1:
        return (field[2:] - 2.0 * field[1:-1] + field[:-2]) / h2
    c = field[1:-1, 1:-1]
    return (field[2:, 1:-1] + field[:-2, 1:-1]
            + field[1:-1, 2:] + field[1:-1, :-2] - 4.0 * c) / h2


def gradient_stencil(grid, field: np.ndarray):
    """Central differences on interior nodes; returns (du/dx,) or (du/dx, du/dy)."""
    two_h = 2.0 * grid.hx
    if field.ndim == 1:
        return ((field[2:] - field[:-2]) / two_h,)
    dx = (field[2:, 1:-1] - field[:-2, 1:-1]) / two_h
    dy = (field[1:-1, 2:] - field[1:-1, :-2]) / two_h
    return dx, dy


def normal_derivative(grid, field: np.ndarray) -> np.ndarray:
    """Outward normal derivative on the boundary via 3-point one-sided
    differences (exact on quadratics), ordered per boundary convention."""
    two_h = 2.0 * grid.hx
    if field.ndim == 1:
        left = (3.0 * field[0] - 4.0 * field[1] + field[2]) / two_h
        right = (3.0 * field[-1] - 4.0 * field[-2] + field[-3]) / two_h
        return np.array([left, right])
    out = np.empty(grid.n_boundary)
    s = grid.boundary_sides()
    out[s["left"]] = (3.0 * field[0, :] - 4.0 * field[1, :] + field[2, :]) / two_h
    out[s["right"]] = (3.0 * field[-1, :] - 4.0 * field[-2, :] + field[-3, :]) / two_h
    out[s["bottom"]] = (3.0 * field[1:-1, 0] - 4.0 * field[1:-1, 1]
                        + field[1:-1, 2]) / two_h
    out[s["top"]] = (3.0 * field[1:-1, -1] - 4.0 * field[1:-1, -2]
                     + field[1:-1, -3]) / two_h
    return out


# ------------------------------------------------------------------ indexing

@dataclass(frozen=True)
class FlatIndexMap:
    """1-based flattening of mode fields u_m(x_i, y_j):

        flat = (i - 1) * N * Nx + (j - 1) * N + m,   1 <= i, j <= Nx, 1 <= m <= N.

    Equivalently, flat - 1 ravels an (Nx, Nx, N) array in C order, which is
    how the solver modules store mode fields.
    """

    Nx: int
    N: int

    @property
    def size(self) -> int:
        return self.N * self.Nx ** 2

    def flatten(self, i: int, j: int, m: int) -> int:
        if not (1 <= i <= self.Nx and 1 <= j <= self.Nx and 1 <= m <= self.N):
            raise ValueError(f"index ({i},{j},{m}) out of range")
        return (i - 1) * self.N * self.Nx + (j - 1) * self.N + m

    def unflatten(self, flat: int):
        if not (1 <= flat <= self.size):
            raise ValueError(f"flat index {flat} out of range")
        q, m0 = divmod(flat - 1, self.N)
        i0, j0 = divmod(q, self.Nx)
        return i0 + 1, j0 + 1, m0 + 1


def field_to_csv(path, grid, field: np.ndarray, header="x,y,value"):
    """Write a nodal field as coordinate/value rows in row-major node order."""
    if field.ndim == 1:
        cols = np.column_stack([grid.nodes, field])
        np.savetxt(path, cols, delimiter=",", header=header.replace("y,", ""),
                   comments="")
        return
    X, Y = grid.mesh()
    cols = np.column_stack([X.ravel(), Y.ravel(), field.ravel()])
    np.savetxt(path, cols, delimiter=",", header=header, comments="")
