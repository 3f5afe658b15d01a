"""Preconditioned conjugate-gradient solver for the normal equations.

The normal operator is symmetric positive definite for any positive
regularization weight, so its unique solution is found by conjugate
gradients with a Jacobi (diagonal) preconditioner; the diagonal is available
exactly from the block sparsity.  Convergence is declared on the true
relative residual ||M u - b|| / ||b||.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    wall_time: float
    converged: bool
    residual_history: list = field(default_factory=list, repr=False)

    def to_json(self) -> str:
        return json.dumps({
            "iterations": self.iterations,
            "relative_residual": self.relative_residual,
            "wall_time": self.wall_time,
            "converged": self.converged,
        })


def solve(normal_operator, normal_rhs, tol: float = 1e-10,
          max_iter: int = 20000, diagonal=None, preconditioner=None):
    """Minimize the quadratic by CG on M u = b.

    normal_operator: callable flat-vector -> flat-vector (SPD).
    diagonal: exact diag(M) for the Jacobi preconditioner (identity if None).
    preconditioner: callable r -> approx M^-1 r; overrides diagonal.
    Returns (u, SolveReport).
    """
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    b = np.asarray(normal_rhs, dtype=float)
    if preconditioner is not None:
        apply_pre = preconditioner
    elif diagonal is None:
        apply_pre = lambda r: r
    else:
        diagonal = np.asarray(diagonal, dtype=float)
        if np.any(diagonal <= 0):
            raise ValueError("preconditioner diagonal must be positive")
        inv_diag = 1.0 / diagonal
        apply_pre = lambda r: inv_diag * r

    t0 = time.perf_counter()
    norm_b = np.linalg.norm(b)
    x = np.zeros_like(b)
    if norm_b == 0.0:
        return x, SolveReport(iterations=0, relative_residual=0.0,
                              wall_time=time.perf_counter() - t0,
                              converged=True, residual_history=[0.0])

    r = b.copy()
    z = apply_pre(r)
    p = z.copy()
    rz = float(r @ z)
    history = [np.sqrt(rz)]
    converged = False
    rel = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        q = normal_operator(p)
        if not np.all(np.isfinite(q)):
            raise RuntimeError(
                "non-finite values in operator application (assembly defect)")
        pq = float(p @ q)
        if pq <= 0.0:
            raise RuntimeError(
                "conjugate-gradient breakdown: non-positive curvature")
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        rel = np.linalg.norm(r) / norm_b
        z = apply_pre(r)
        rz_new = float(r @ z)
        history.append(np.sqrt(max(rz_new, 0.0)))
        if rel <= tol:
            converged = True
            break
        beta = rz_new / rz
        p = z + beta * p
        rz = rz_new

    return x, SolveReport(iterations=it, relative_residual=float(rel),
                          wall_time=time.perf_counter() - t0,
                          converged=converged, residual_history=history)


def block_jacobi_preconditioner(system):
    """Inverse of the exact per-node N x N diagonal blocks, applied batched.

    The plain diagonal stalls on these normal equations once the basis
    coupling dominates the high modes; the node blocks absorb the mode
    coupling exactly and leave CG only the spatial part."""
    blocks = system.normal_block_diagonal()
    inv_blocks = np.linalg.inv(blocks)
    n = blocks.shape[-1]

    def apply_pre(r):
        return np.einsum('pij,pj->pi', inv_blocks, r.reshape(-1, n)).ravel()

    return apply_pre


def solve_system(system, tol: float = 1e-10, max_iter: int = 20000,
                 preconditioner: str = "block"):
    """Convenience wrapper: solve an assembled QrmSystem's normal equations.

    preconditioner: "block" (per-node blocks, default), "jacobi" (diagonal),
    or "none".
    """
    kw = {}
    if preconditioner == "block":
        kw["preconditioner"] = block_jacobi_preconditioner(system)
    elif preconditioner == "jacobi":
        kw["diagonal"] = system.normal_diagonal()
    elif preconditioner != "none":
        raise ValueError(f"unknown preconditioner {preconditioner!r}")
    return solve(system.normal_apply, system.normal_rhs(), tol=tol,
                 max_iter=max_iter, **kw)
