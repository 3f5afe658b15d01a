"""Command-line entry point for the reconstruction experiment suite.

Subcommands: forward (synthetic Cauchy data), reconstruct (full pipeline),
sweep (noise-convergence study), cutoff (basis truncation figure) and
compare1d (basis comparison on the 1D tests).  A JSON config file supplies
defaults; explicit flags override file values.  Every bundle carries
resolved_config.json for provenance.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import (ExperimentConfig, config_1d, load_config,
                          run_1d_comparison, run_cutoff_figure, run_example,
                          _dump_json, _make_grid, medium_preset,
                          source_preset)
from .forward import add_noise, cauchy_to_json, extract_cauchy, solve_forward
from .grids import TimeGrid

PROBLEM_FLAGS = {1: "dirichlet_bc", 2: "neumann_bc"}


def _common_flags(sub):
    sub.add_argument("--config", metavar="PATH",
                     help="JSON config file; flags override its values")
    sub.add_argument("--delta", type=float, default=None,
                     help="relative noise level (e.g. 0.1 for 10%%)")
    sub.add_argument("--seed", type=int, default=None, help="noise RNG seed")
    sub.add_argument("--nx", type=int, default=None,
                     help="spatial nodes per axis")
    sub.add_argument("--modes", type=int, default=None,
                     help="time-basis truncation N")
    sub.add_argument("--epsilon", type=float, default=None,
                     help="regularization weight")
    sub.add_argument("--problem", type=int, choices=(1, 2), default=None,
                     help="1: Dirichlet data measured; 2: Neumann")
    sub.add_argument("--refine-data", action="store_true", default=None,
                     help="generate data on a 2x-refined grid "
                          "(inverse-crime guard)")
    sub.add_argument("--source", default=None,
                     help="source preset (example1..example4 / test1..test3)")
    sub.add_argument("--out", metavar="DIR", default=None,
                     help="output bundle directory")


def _resolve_config(args, one_d=False):
    overrides = {
        "delta": args.delta,
        "seed": args.seed,
        "Nx": args.nx,
        "n_modes": args.modes,
        "epsilon": args.epsilon,
        "refine_data": args.refine_data,
        "source_id": args.source,
    }
    if args.problem is not None:
        overrides["problem_kind"] = PROBLEM_FLAGS[args.problem]
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config:
        return load_config(args.config, **overrides)
    if one_d:
        return config_1d(**overrides)
    return ExperimentConfig(**overrides)


def _cmd_forward(args):
    """Synthetic lateral Cauchy data only: forward solve, trace, noise."""
    config = _resolve_config(args)
    grid = _make_grid(config)
    tgrid = TimeGrid(T=config.T, NT=config.NT)
    medium = medium_preset(config.medium, grid)
    p_true, _ = source_preset(config.source_id, grid, config.square_size)
    bc = "dirichlet" if config.problem_kind == "dirichlet_bc" else "neumann"
    field = solve_forward(medium, p_true, grid, tgrid, bc=bc)
    data = add_noise(extract_cauchy(field), config.delta, config.seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "cauchy.json").write_text(cauchy_to_json(data) + "\n")
    _dump_json(out / "resolved_config.json", config.resolved())
    print(f"wrote Cauchy data ({data.trace.shape[0]} boundary nodes x "
          f"{data.trace.shape[1]} time nodes) to {out}")
    return 0


def _cmd_reconstruct(args):
    config = _resolve_config(args)
    bundle = run_example(config, out_dir=args.out)
    m = bundle["metrics"]
    print(f"rel_L2={m['rel_L2']:.4f} rel_H1={m['rel_H1']:.4f} "
          f"max={m['max_value']:.4f} min={m['min_value']:.4f}")
    for name, rec in m["inclusions"].items():
        print(f"  {name}: computed {rec['computed']:.5f} vs true "
              f"{rec['true']:g} (rel err {rec['rel_error']:.4f})")
    if args.out:
        print(f"bundle written to {args.out}")
    return 0


def _cmd_sweep(args):
    from .reconstruction import convergence_sweep
    config = _resolve_config(args)
    deltas = [float(s) for s in args.deltas.split(",")]
    seeds = list(range(args.seeds))
    result = convergence_sweep(
        config.source_id, config.problem_kind, deltas, config.epsilon,
        seeds=seeds, trend_factor=args.trend_factor,
        Nx=config.Nx, NT=config.NT, n_modes=config.n_modes,
        weighting=config.weighting, tol=config.tol,
        max_iter=config.max_iter, refine_data=config.refine_data)
    for row in result["rows"]:
        ratio = "-" if row["ratio"] is None else f"{row['ratio']:.4f}"
        print(f"delta={row['delta']:<7g} rel_H1={row['rel_H1']:.4f} "
              f"e/delta={ratio}")
    if result["ratio_spread"] is not None:
        print(f"ratio spread {result['ratio_spread']:.3f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(out / "sweep.json",
                   {"config": config.resolved(), "seeds": seeds,
                    "rows": result["rows"],
                    "ratio_spread": result["ratio_spread"]})
        _dump_json(out / "resolved_config.json", config.resolved())
    return 0


def _cmd_cutoff(args):
    config = _resolve_config(args)
    if args.source is None and not args.config:
        config = replace(config, source_id="example2")
    result = run_cutoff_figure(config, out_dir=args.out)
    for row in result["table"]:
        print(f"N={row['n_modes']:<3d} sup truncation error "
              f"{row['sup_error']:.6e}")
    return 0


def _cmd_compare1d(args):
    config = _resolve_config(args, one_d=True)
    source = config.source_id if args.source or args.config else \
        f"test{args.test}"
    out = run_1d_comparison(
        int(source[-1]), config.delta, config.seed,
        n_modes=config.n_modes, out_dir=args.out, Nx=config.Nx,
        NT=config.NT, epsilon=config.epsilon, tol=config.tol,
        max_iter=config.max_iter, refine_data=config.refine_data)
    for kind in ("klibanov", "trigonometric"):
        m = out[kind]["metrics"]
        print(f"{kind:<14s} rel_L2={m['rel_L2']:.4f} "
              f"rel_H1={m['rel_H1']:.4f}")
    ratio = (out["trigonometric"]["metrics"]["rel_L2"]
             / out["klibanov"]["metrics"]["rel_L2"])
    print(f"trig/klibanov error ratio {ratio:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrtomo",
        description="Initial-source reconstruction in a reflecting cavity "
                    "from lateral Cauchy data.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("forward", help="emit synthetic Cauchy data")
    _common_flags(p)
    p.set_defaults(func=_cmd_forward)

    p = subs.add_parser("reconstruct", help="run the full pipeline")
    _common_flags(p)
    p.set_defaults(func=_cmd_reconstruct)

    p = subs.add_parser("sweep", help="noise-convergence study")
    _common_flags(p)
    p.add_argument("--deltas", default="0,0.025,0.05,0.1,0.2",
                   help="comma-separated noise levels")
    p.add_argument("--seeds", type=int, default=3,
                   help="seeds averaged per noise level")
    p.add_argument("--trend-factor", type=float, default=5.0,
                   help="maximum allowed spread of error/delta ratios")
    p.set_defaults(func=_cmd_sweep)

    p = subs.add_parser("cutoff", help="basis truncation-error figure")
    _common_flags(p)
    p.set_defaults(func=_cmd_cutoff)

    p = subs.add_parser("compare1d", help="1D basis comparison")
    _common_flags(p)
    p.add_argument("--test", type=int, choices=(1, 2, 3), default=1,
                   help="1D source preset")
    p.set_defaults(func=_cmd_compare1d)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface stage names, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
