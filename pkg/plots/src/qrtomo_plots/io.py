"""Readers for the result-bundle contracts: nodal field CSVs and JSON tables.

Field CSVs carry a header line ("x,y,value" for 2D, "x,value" for 1D) and
one row per grid node in row-major node order.  2D fields must describe a
complete tensor grid; anything ragged or empty is rejected before any
figure file is opened.
"""

import json
from pathlib import Path

import numpy as np


class Field:
    """A nodal field restored from CSV: 1D (x, values) or 2D (x, y, values)
    with values[i, j] at (x[i], y[j])."""

    def __init__(self, x, y, values):
        self.x = x
        self.y = y
        self.values = values

    @property
    def one_d(self):
        return self.y is None


def read_field_csv(path) -> Field:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if header not in ("x,y,value", "x,value"):
            raise ValueError(f"{path}: unrecognized field header {header!r}")
        try:
            rows = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ValueError(f"{path}: ragged field rows ({exc})") from exc
    if rows.size == 0:
        raise ValueError(f"{path}: empty field")
    if header == "x,value":
        if rows.shape[1] != 2:
            raise ValueError(f"{path}: expected 2 columns, got {rows.shape[1]}")
        return Field(rows[:, 0], None, rows[:, 1])
    if rows.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns, got {rows.shape[1]}")
    x = np.unique(rows[:, 0])
    y = np.unique(rows[:, 1])
    if len(rows) != x.size * y.size:
        raise ValueError(
            f"{path}: {len(rows)} rows do not fill a {x.size}x{y.size} grid")
    # row-major node order: x varies slowest
    values = rows[:, 2].reshape(x.size, y.size)
    expect_x = np.repeat(x, y.size)
    expect_y = np.tile(y, x.size)
    if not (np.array_equal(rows[:, 0], expect_x)
            and np.array_equal(rows[:, 1], expect_y)):
        raise ValueError(f"{path}: rows are not in row-major grid order")
    return Field(x, y, values)


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
