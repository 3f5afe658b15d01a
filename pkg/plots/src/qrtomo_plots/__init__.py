"""Rendering of reconstruction result bundles into figures.

Consumes only the documented bundle files (fields/*.csv, metrics.json,
sweep.json, cutoff.json, comparison.json); never imports the solver
package.
"""

import matplotlib

matplotlib.use("Agg")

from .figures import FigureSpec, render  # noqa: E402,F401
from .io import read_field_csv, read_json  # noqa: E402,F401
