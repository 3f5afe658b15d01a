"""Reduction of time-dependent boundary data to mode space, and the
spatially varying mode-coupling coefficients.

Expanding the wave field in the orthonormal time basis turns the evolution
problem into a coupled elliptic system for the mode fields u_n(x): the
time-derivative terms become the matrix field

    s_mn(x) = a_principal(x) * A_mn + damping(x) * B_mn,

and the measured trace f(x, t) becomes per-mode boundary data
f_m(x) = integral f(x, t) psi_m(t) dt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import CauchyData, MediumCoefficients
from .time_basis import MassMatrices, TimeBasis, project_time_series


@dataclass(frozen=True)
class SpectralBoundaryData:
    """values[m, b] = mode-m data at boundary node b (canonical boundary
    order of the grid)."""

    problem_kind: str
    values: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CouplingField:
    """Factored storage of s_mn(x): keeping (A, B, a_principal, damping)
    instead of the expanded N x N matrix per node (1225 numbers per node at
    N = 35)."""

    A: np.ndarray
    B: np.ndarray
    a_principal: np.ndarray
    damping: np.ndarray

    def node_matrix(self, *index) -> np.ndarray:
        """The full s matrix at one grid node."""
        return self.a_principal[index] * self.A + self.damping[index] * self.B


def spectral_boundary(data: CauchyData, basis: TimeBasis) -> SpectralBoundaryData:
    """Project each boundary node's time trace onto the basis."""
    if abs(data.tgrid.T - basis.T) > 1e-12 * max(1.0, basis.T):
        raise ValueError(
            f"time interval mismatch: data T={data.tgrid.T}, basis T={basis.T}")
    coeffs = project_time_series(data.trace, basis)  # (n_boundary, N)
    return SpectralBoundaryData(problem_kind=data.problem_kind,
                                values=coeffs.T.copy())


def coupling_field(medium: MediumCoefficients, mass: MassMatrices,
                   grid) -> CouplingField:
    if medium.a_principal.shape != medium.damping.shape:
        raise ValueError("coefficient field shapes differ")
    expected = (grid.Nx,) * (1 if medium.a_principal.ndim == 1 else 2)
    if medium.a_principal.shape != expected:
        raise ValueError("coefficient fields do not match the grid")
    return CouplingField(A=mass.A, B=mass.B,
                         a_principal=medium.a_principal,
                         damping=medium.damping)


def spectral_to_csv(path, data: SpectralBoundaryData):
    """Rows (boundary-node index, mode index, value), both indices 1-based."""
    n, nb = data.values.shape
    b_idx, m_idx = np.meshgrid(np.arange(1, nb + 1), np.arange(1, n + 1),
                               indexing="ij")
    cols = np.column_stack([b_idx.ravel(), m_idx.ravel(),
                            data.values.T.ravel()])
    np.savetxt(path, cols, delimiter=",", header="boundary_node,mode,value",
               comments="", fmt=("%d", "%d", "%.17g"))
