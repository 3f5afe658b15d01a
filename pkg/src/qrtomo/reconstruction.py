"""Recovered-source assembly, error metrics, basis-cutoff study and the
noise-convergence sweep.

The minimizer of the discrete functional is a stack of mode fields
u_1 ... u_N; the recovered initial state is the finite sum
p_comp(x) = sum_n u_n(x) psi_n(0).  Metrics follow the reporting style of
the reference experiments: per-inclusion relative extreme-value errors on
analytic masks, plus global relative L2 and discrete H1 errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import gradient_stencil
from .time_basis import build_basis, eval_basis, project_time_series


@dataclass
class Reconstruction:
    """Mode fields (..., N) and the assembled source field p_comp."""

    modes: np.ndarray
    p_comp: np.ndarray


@dataclass(frozen=True)
class Inclusion:
    """Labeled support mask with the true source value on it."""

    name: str
    mask: np.ndarray
    value: float


def reconstruct_source(u_min: np.ndarray, flat, psi0: np.ndarray
                       ) -> Reconstruction:
    """Assemble p_comp = sum_n u_n psi_n(0) from the flattened minimizer."""
    u_min = np.asarray(u_min, dtype=float)
    n = psi0.size
    nx = flat.Nx
    if flat.N != n:
        raise ValueError("psi0 length does not match the index map")
    if u_min.size == nx * nx * n:
        modes = u_min.reshape(nx, nx, n)
    elif u_min.size == nx * n:
        modes = u_min.reshape(nx, n)
    else:
        raise ValueError(
            f"flattened vector of length {u_min.size} does not match "
            f"Nx={nx}, N={n}")
    return Reconstruction(modes=modes, p_comp=modes @ psi0)


def metrics(p_comp: np.ndarray, p_true: np.ndarray, grid,
            inclusions=()) -> dict:
    """Error record: per-inclusion relative extreme-value errors plus global
    relative L2 / discrete H1 errors."""
    if p_comp.shape != p_true.shape:
        raise ValueError("computed and true fields live on different grids")
    record = {"inclusions": {}}
    for inc in inclusions:
        if inc.mask.shape != p_true.shape:
            raise ValueError(f"mask {inc.name!r} has wrong shape")
        if not inc.mask.any():
            raise ValueError(f"mask {inc.name!r} selects no grid node")
        vals = p_comp[inc.mask]
        computed = float(vals.min() if inc.value < 0 else vals.max())
        record["inclusions"][inc.name] = {
            "computed": computed,
            "true": inc.value,
            "rel_error": abs(computed - inc.value) / abs(inc.value),
        }
    diff = p_comp - p_true
    norm_true = np.linalg.norm(p_true)
    record["rel_L2"] = float(np.linalg.norm(diff) / norm_true)

    def h1_sq(field):
        total = np.sum(field ** 2)
        for g in gradient_stencil(grid, field):
            total += np.sum(g ** 2)
        return total

    record["rel_H1"] = float(np.sqrt(h1_sq(diff) / h1_sq(p_true)))
    record["max_value"] = float(p_comp.max())
    record["min_value"] = float(p_comp.min())
    return record


def cutoff_study(true_field, basis_kind: str, N_list, cap: int = 35) -> list:
    """Sup-norm truncation error of the time expansion at t=0 for each N.

    true_field: a WaveField from the forward solver (the reference
    transient); the expansions reuse one projection at max(N_list), valid
    because the basis families are nested in N.
    """
    N_list = list(N_list)
    if not N_list:
        raise ValueError("N_list must be nonempty")
    if any(n < 1 for n in N_list):
        raise ValueError("mode counts must be >= 1")
    if max(N_list) > cap:
        raise ValueError(f"mode count {max(N_list)} exceeds the cap {cap}")
    n_max = max(N_list)
    basis = build_basis(basis_kind, n_max, true_field.tgrid.T,
                        quad_order=2 * n_max + 20)
    samples = np.moveaxis(true_field.values, 0, -1)   # (..., NT)
    coeffs = project_time_series(samples, basis)
    psi0 = eval_basis(basis, 0.0)
    u0 = true_field.values[0]
    table = []
    for n in N_list:
        partial = coeffs[..., :n] @ psi0[:n]
        table.append({"n_modes": int(n),
                      "sup_error": float(np.abs(u0 - partial).max())})
    return table


def convergence_sweep(example: str, problem_kind: str, delta_list, epsilon,
                      seeds, runner=None, trend_factor: float = 5.0,
                      **runner_kwargs) -> dict:
    """Seed-averaged relative H1 error against noise level.

    runner(example, problem_kind, delta, seed, epsilon, **kwargs) must return
    a metric record containing "rel_H1"; by default the full experiment
    pipeline is used.  The delta=0 entry reports the regularization floor and
    is excluded from the error/delta ratio spread.  If the spread of
    (error/delta) across positive deltas exceeds trend_factor, the sweep
    raises: the Lipschitz-like stability trend failed.
    """
    delta_list = list(delta_list)
    seeds = list(seeds)
    if not delta_list or not seeds:
        raise ValueError("delta_list and seeds must be nonempty")
    if any(d < 0 for d in delta_list):
        raise ValueError("noise levels must be nonnegative")
    if any(b <= a for a, b in zip(delta_list, delta_list[1:])):
        raise ValueError("noise levels must be strictly ascending")
    if runner is None:
        from .experiments import sweep_entry as runner  # noqa: PLC0415

    rows = []
    for delta in delta_list:
        errs = []
        for seed in seeds:
            rec = runner(example, problem_kind, delta, seed, epsilon,
                         **runner_kwargs)
            errs.append(rec["rel_H1"])
        err = float(np.mean(errs))
        rows.append({"delta": float(delta), "rel_H1": err,
                     "ratio": err / delta if delta > 0 else None})
    ratios = [row["ratio"] for row in rows if row["ratio"] is not None]
    spread = max(ratios) / min(ratios) if ratios else None
    result = {"rows": rows, "ratio_spread": spread}
    if trend_factor is not None and spread is not None \
            and spread > trend_factor:
        raise RuntimeError(
            f"error/delta ratio spread {spread:.3g} exceeds the configured "
            f"factor {trend_factor:g}")
    return result
