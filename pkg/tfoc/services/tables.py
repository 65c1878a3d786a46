"""
CSV grids for signals, symbols and kernels.

Layout: a header row ``N,h``, one row with their values, then the samples
row-major with one grid row per line. Entries are complex literals such
as ``1.5-2e-05j``.
"""

import csv
import logging

import numpy as np

from tfoc.core.errors import ValidationError
from tfoc.models import OperatorMatrix, PhaseSpaceGrid, Signal, Symbol2D

logger = logging.getLogger(__name__)


def format_complex(value):
    value = complex(value)
    return f"{value.real:.17g}{value.imag:+.17g}j"


def _parse(token, path):
    try:
        return complex(token.strip().replace(" ", ""))
    except ValueError:
        raise ValidationError(f"{path}: cannot parse entry {token!r}")


def load_table(path):
    """Return (grid, array) from a CSV grid file."""
    with open(path, newline="") as handle:
        rows = [row for row in csv.reader(handle) if row and any(cell.strip() for cell in row)]
    if len(rows) < 3 or [c.strip() for c in rows[0][:2]] != ["N", "h"]:
        raise ValidationError(f"{path}: expected a 'N,h' header row")
    try:
        n = int(rows[1][0])
        h = float(rows[1][1])
    except (ValueError, IndexError):
        raise ValidationError(f"{path}: malformed N,h row")
    grid = PhaseSpaceGrid(n)
    if abs(h - grid.spacing) > 1e-9 * grid.spacing:
        raise ValidationError(f"{path}: h={h!r} does not match sqrt(2*pi/N)={grid.spacing!r}")
    data = rows[2:]
    if len(data) != n:
        raise ValidationError(f"{path}: expected {n} data rows, got {len(data)}")
    widths = {len(row) for row in data}
    if len(widths) != 1:
        raise ValidationError(f"{path}: ragged rows")
    values = np.array([[_parse(cell, path) for cell in row] for row in data], dtype=complex)
    if values.shape[1] == 1:
        values = values[:, 0]
    return grid, values


def save_table(path, values, grid: PhaseSpaceGrid):
    values = np.asarray(values)
    rows = values[:, None] if values.ndim == 1 else values
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["N", "h"])
        writer.writerow([grid.n_points, repr(grid.spacing)])
        for row in rows:
            writer.writerow([format_complex(v) for v in row])
    logger.info(f"Wrote {values.shape} table to {path}")


def load_signal(path) -> Signal:
    grid, values = load_table(path)
    if values.ndim != 1:
        raise ValidationError(f"{path}: a signal needs one column")
    return Signal(values, grid)


def load_symbol(path) -> Symbol2D:
    grid, values = load_table(path)
    if values.ndim != 2:
        raise ValidationError(f"{path}: a symbol needs N columns")
    return Symbol2D(values, grid)


def load_kernel(path) -> OperatorMatrix:
    grid, values = load_table(path)
    if values.ndim != 2:
        raise ValidationError(f"{path}: a kernel needs N columns")
    return OperatorMatrix(values, grid)
