"""Command-line renderer: maps a result-bundle directory onto figure specs.

Bundle kinds: "examples" (true/computed source heatmaps plus their
difference), "cutoff" (one truncation-error heatmap per mode count),
"compare1d" (overlay of the 1D reconstructions from both time bases) and
"sweep" (log-log error-vs-noise line).
"""

import argparse
import re
import sys
from pathlib import Path

from .figures import FigureSpec, render
from .io import read_json

BUNDLE_KINDS = ("examples", "cutoff", "compare1d", "sweep")


def _bundle_title(bundle: Path) -> str:
    config = bundle / "resolved_config.json"
    if not config.is_file():
        return ""
    cfg = read_json(config)
    problem = {"dirichlet_bc": "setup 1", "neumann_bc": "setup 2"}.get(
        cfg.get("problem_kind"), "")
    return f"{cfg.get('source_id', '')} {problem}, " \
           f"noise {100 * cfg.get('delta', 0):g}%".strip()


def spec_for_bundle(kind: str, bundle: Path, out: Path) -> FigureSpec:
    """Build the figure spec for one bundle directory."""
    if kind == "examples":
        fields = bundle / "fields"
        return FigureSpec(
            kind="heatmap",
            inputs={"true source": fields / "p_true.csv",
                    "computed source": fields / "p_comp.csv"},
            options={"difference": True},
            title=_bundle_title(bundle),
            out=str(out / "examples.png"))
    if kind == "cutoff":
        paths = sorted((bundle / "fields").glob("trunc_err_N*.csv"),
                       key=lambda p: int(re.search(r"\d+", p.stem).group()))
        if not paths:
            raise FileNotFoundError(
                f"{bundle}: no trunc_err_N*.csv field files")
        inputs = {f"N = {re.search(r'[0-9]+', p.stem).group()}": p
                  for p in paths}
        return FigureSpec(kind="heatmap", inputs=inputs,
                          title="truncation error of the time expansion",
                          out=str(out / "cutoff.png"))
    if kind == "compare1d":
        return FigureSpec(
            kind="line",
            inputs={"true": bundle / "klibanov" / "fields" / "p_true.csv",
                    "klibanov": bundle / "klibanov" / "fields" / "p_comp.csv",
                    "trigonometric": (bundle / "trigonometric" / "fields"
                                      / "p_comp.csv")},
            title="1D reconstruction by time basis",
            out=str(out / "compare1d.png"))
    if kind == "sweep":
        return FigureSpec(kind="sweep",
                          inputs={"sweep": bundle / "sweep.json"},
                          title="error against noise level",
                          out=str(out / "sweep.png"))
    raise ValueError(f"unknown bundle kind {kind!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qrtomo-plots",
        description="Render reconstruction result bundles into figures.")
    subs = parser.add_subparsers(dest="command", required=True)
    p = subs.add_parser("render", help="render one bundle directory")
    p.add_argument("--bundle", required=True, metavar="DIR",
                   help="result bundle directory")
    p.add_argument("--kind", required=True, choices=BUNDLE_KINDS)
    p.add_argument("--out", required=True, metavar="DIR",
                   help="directory for the rendered image")
    args = parser.parse_args(argv)
    try:
        spec = spec_for_bundle(args.kind, Path(args.bundle), Path(args.out))
        path = render(spec)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
