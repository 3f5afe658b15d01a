"""Figure rendering from validated inputs.

Three figure kinds: "heatmap" (a row of 2D panels on one shared color
scale), "line" (1D overlays of true and computed sources) and "sweep"
(log-log error against noise level with a fitted slope annotation).
Inputs are read and validated before the output file is touched, and the
image is written atomically (temp file + rename), so a failing render
never leaves a partial file behind.
"""

import os
import tempfile
from dataclasses import dataclass, field

import matplotlib.pyplot as plt
import numpy as np

from .io import Field, read_field_csv, read_json

KINDS = ("heatmap", "line", "sweep")
DPI = 110


@dataclass
class FigureSpec:
    """What to draw: input paths keyed by panel/series label, in order."""

    kind: str
    inputs: dict
    out: str
    title: str = ""
    vmin: float | None = None
    vmax: float | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("figure needs at least one input")


def render(spec: FigureSpec) -> str:
    """Render the figure and return the output path."""
    if spec.kind == "heatmap":
        fig = _heatmap_figure(spec)
    elif spec.kind == "line":
        fig = _line_figure(spec)
    else:
        fig = _sweep_figure(spec)
    try:
        _atomic_savefig(fig, spec.out)
    finally:
        plt.close(fig)
    return spec.out


def _atomic_savefig(fig, out):
    out_dir = os.path.dirname(os.path.abspath(out))
    os.makedirs(out_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(suffix=".png", dir=out_dir)
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=DPI, format="png")
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_fields(spec, want_1d):
    fields = {}
    for label, path in spec.inputs.items():
        fld = read_field_csv(path)
        if fld.one_d != want_1d:
            kind = "1D" if fld.one_d else "2D"
            raise ValueError(f"{path}: {kind} field not usable in a "
                             f"{spec.kind} figure")
        fields[label] = fld
    return fields


def _heatmap_figure(spec):
    fields = _load_fields(spec, want_1d=False)
    if spec.options.get("difference"):
        if len(fields) != 2:
            raise ValueError("difference panel needs exactly two fields")
        (_, fa), (_, fb) = fields.items()
        if fa.values.shape != fb.values.shape:
            raise ValueError("difference panel needs fields on one grid")
        fields["difference"] = Field(fa.x, fa.y,
                                     np.abs(fa.values - fb.values))
    vals = [f.values for f in fields.values()]
    vmin = spec.vmin if spec.vmin is not None else min(v.min() for v in vals)
    vmax = spec.vmax if spec.vmax is not None else max(v.max() for v in vals)
    if vmin == vmax:
        vmax = vmin + 1.0
    n = len(fields)
    fig, axes = plt.subplots(1, n, figsize=(3.4 * n + 0.9, 3.2),
                             squeeze=False)
    last = None
    for ax, (label, fld) in zip(axes[0], fields.items()):
        # values[i, j] indexes (x_i, y_j); show x horizontally
        extent = (fld.x[0], fld.x[-1], fld.y[0], fld.y[-1])
        last = ax.imshow(fld.values.T, origin="lower", extent=extent,
                         vmin=vmin, vmax=vmax, cmap="viridis",
                         interpolation="nearest")
        ax.set_title(label, fontsize=10)
        ax.set_xlabel("x")
    axes[0][0].set_ylabel("y")
    fig.colorbar(last, ax=axes[0], fraction=0.046, pad=0.02)
    if spec.title:
        fig.suptitle(spec.title)
    return fig


def _line_figure(spec):
    fields = _load_fields(spec, want_1d=True)
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    for label, fld in fields.items():
        style = {"linestyle": "--", "linewidth": 2.0} if label == "true" \
            else {"linewidth": 1.4}
        ax.plot(fld.x, fld.values, label=label, **style)
    ax.set_xlabel("x")
    ax.set_ylabel("source value")
    ax.legend(fontsize=9)
    ax.grid(True, alpha=0.3)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return fig


def _sweep_figure(spec):
    table = read_json(spec.inputs["sweep"])
    rows = [r for r in table["rows"] if r["delta"] > 0]
    if not rows:
        raise ValueError("sweep table has no positive noise levels")
    deltas = np.array([r["delta"] for r in rows])
    errs = np.array([r["rel_H1"] for r in rows])
    if (errs <= 0).any():
        raise ValueError("sweep errors must be positive for a log-log plot")
    slope = np.polyfit(np.log(deltas), np.log(errs), 1)[0]

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.loglog(deltas, errs, "o-", label="relative H1 error")
    floor = [r["rel_H1"] for r in table["rows"] if r["delta"] == 0]
    if floor:
        ax.axhline(floor[0], color="gray", linestyle=":",
                   label="noiseless floor")
    ax.set_xlabel("noise level")
    ax.set_ylabel("error")
    ax.annotate(f"slope = {slope:.2f}", xy=(0.05, 0.9),
                xycoords="axes fraction", fontsize=10)
    ax.legend(fontsize=9, loc="lower right")
    ax.grid(True, which="both", alpha=0.3)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return fig
