"""
Array containers shared by the numerical services.

Every container is bound to a PhaseSpaceGrid; constructors validate shapes so
that downstream code can rely on them.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from tfoc.core.errors import ConfigurationError, ValidationError

MIN_POINTS = 8


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Periodic 1-D grid with the matched frequency grid.

    Both axes use the spacing h = sqrt(2*pi/N), so h * h * N = 2*pi and the DFT
    reproduces the continuous unitary Fourier convention on the same node set.
    """
    n_points: int
    spacing: float = field(init=False)

    def __post_init__(self):
        n = self.n_points
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            raise ConfigurationError(f"Grid size must be an integer, got {n!r}")
        if n < MIN_POINTS or n % 2:
            raise ConfigurationError(f"Grid size must be even and >= {MIN_POINTS}, got {n}")
        object.__setattr__(self, 'n_points', int(n))
        object.__setattr__(self, 'spacing', math.sqrt(2 * math.pi / n))

    @property
    def spacing_x(self):
        return self.spacing

    @property
    def spacing_xi(self):
        return self.spacing

    @property
    def length(self):
        return self.n_points * self.spacing

    @property
    def indices(self):
        """Centered node indices -N/2 ... N/2-1."""
        half = self.n_points // 2
        return np.arange(-half, half)

    @property
    def x_nodes(self):
        return self.indices * self.spacing

    @property
    def xi_nodes(self):
        return self.indices * self.spacing

    def node_index(self, value, tol=1e-9):
        """Centered index of a node value; off-grid values are rejected."""
        k = int(round(value / self.spacing))
        if abs(value - k * self.spacing) > tol * max(1.0, abs(value)):
            raise ValidationError(f"Offset {value!r} is not a grid node (h={self.spacing:.6g})")
        half = self.n_points // 2
        return (k + half) % self.n_points - half

    def reduce(self, values):
        """Map coordinates into the centered period [-L/2, L/2)."""
        length = self.length
        return np.mod(np.asarray(values) + length / 2, length) - length / 2

    def same_as(self, other):
        return isinstance(other, PhaseSpaceGrid) and other.n_points == self.n_points


def _as_array(values, shape, dtype, label):
    arr = np.asarray(values, dtype=dtype)
    if arr.shape != shape:
        raise ValidationError(f"{label} must have shape {shape}, got {arr.shape}")
    return arr


def check_same_grid(*items):
    """All containers must share one grid."""
    grid = items[0].grid
    for item in items[1:]:
        if not grid.same_as(item.grid):
            raise ValidationError(
                f"Grid mismatch: N={grid.n_points} vs N={item.grid.n_points}")
    return grid


@dataclass(frozen=True, eq=False)
class Signal:
    values: np.ndarray
    grid: PhaseSpaceGrid

    def __post_init__(self):
        n = self.grid.n_points
        object.__setattr__(self, 'values', _as_array(self.values, (n,), complex, "Signal"))

    def with_values(self, values):
        return Signal(values, self.grid)


@dataclass(frozen=True, eq=False)
class TFArray:
    """Complex table on the N x N (x, xi) lattice: an STFT or a 2-D symbol."""
    values: np.ndarray
    grid: PhaseSpaceGrid

    def __post_init__(self):
        n = self.grid.n_points
        object.__setattr__(self, 'values', _as_array(self.values, (n, n), complex, "TFArray"))


@dataclass(frozen=True, eq=False)
class Symbol2D:
    """Symbol a(x_j, xi_k) sampled on the grid."""
    values: np.ndarray
    grid: PhaseSpaceGrid

    def __post_init__(self):
        n = self.grid.n_points
        object.__setattr__(self, 'values', _as_array(self.values, (n, n), complex, "Symbol2D"))

    def with_values(self, values):
        return Symbol2D(values, self.grid)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Kernel samples K(x_j, y_l); the operator acts by f -> h * K @ f."""
    entries: np.ndarray
    grid: PhaseSpaceGrid
    convention: str = "kernel"

    def __post_init__(self):
        n = self.grid.n_points
        entries = _as_array(self.entries, (n, n), complex, "OperatorMatrix")
        if not np.all(np.isfinite(entries)):
            raise ValidationError("OperatorMatrix has non-finite entries")
        if self.convention != "kernel":
            raise ValidationError(f"Unsupported operator convention {self.convention!r}")
        object.__setattr__(self, 'entries', entries)

    @property
    def scaled(self):
        """The matrix h * K acting on plain coefficient vectors."""
        return self.grid.spacing * self.entries


@dataclass(frozen=True, eq=False)
class Amplitude3D:
    """Amplitude a(x_j, y_l, zeta_k) sampled on the grid."""
    values: np.ndarray
    grid: PhaseSpaceGrid

    def __post_init__(self):
        n = self.grid.n_points
        object.__setattr__(self, 'values', _as_array(self.values, (n, n, n), complex, "Amplitude3D"))
