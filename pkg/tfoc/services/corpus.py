"""
Seeded corpora of signals, symbols and amplitudes.

Analytic specs (SignalSpec, SymbolSpec, AmplitudeSpec) sample the same
continuum function on every grid and are used for refinement sweeps. The
random band-limited generators depend on N and serve fixed-grid checks.
"""

from dataclasses import dataclass
import logging

import numpy as np

from config import Config
from tfoc.core.errors import ValidationError
from tfoc.models import PhaseSpaceGrid, Signal, Symbol2D
from tfoc.services.fio import AmplitudeSpec
from tfoc.services.grid import l2_norm, unitary_ifft

logger = logging.getLogger(__name__)


def _rng(seed):
    return np.random.default_rng(Config.SEED if seed is None else seed)


@dataclass(frozen=True)
class SignalSpec:
    """exp(-(x - c)^2 / (2 w^2) + i k x)."""
    width: float = 1.0
    center: float = 0.0
    modulation: float = 0.0

    def evaluate(self, x):
        return np.exp(-(x - self.center) ** 2 / (2 * self.width ** 2) + 1j * self.modulation * x)

    def sample(self, grid: PhaseSpaceGrid) -> Signal:
        return Signal(self.evaluate(grid.x_nodes), grid)

    def to_dict(self):
        return {"width": self.width, "center": self.center, "modulation": self.modulation}


@dataclass(frozen=True)
class SymbolSpec:
    """Sum of Gaussian phase-space packets a(x, xi)."""
    packets: tuple

    def evaluate(self, x, xi):
        total = 0.0
        for x0, xi0, width, k, m, amp in self.packets:
            envelope = np.exp(-(x - x0) ** 2 / (2 * width ** 2) - (xi - xi0) ** 2 / (2 * width ** 2))
            total = total + amp * envelope * np.exp(1j * (k * x + m * xi))
        return total

    def sample(self, grid: PhaseSpaceGrid) -> Symbol2D:
        return Symbol2D(self.evaluate(grid.x_nodes[:, None], grid.xi_nodes[None, :]), grid)

    def to_dict(self):
        keys = ("x0", "xi0", "width", "k", "m", "amplitude")
        return {"packets": [dict(zip(keys, map(float, p))) for p in self.packets]}


def gaussian_signal(grid, width=1.0, center=0.0, modulation=0.0, normalize=True) -> Signal:
    f = SignalSpec(width, center, modulation).sample(grid)
    return f.with_values(f.values / l2_norm(f)) if normalize else f


def bandlimited_signal(grid: PhaseSpaceGrid, rng, band=None) -> Signal:
    """Random coefficients on the middle half of the frequency grid."""
    n = grid.n_points
    band = n // 4 if band is None else int(band)
    coeffs = np.zeros(n, dtype=complex)
    active = np.abs(grid.indices) < band
    coeffs[active] = rng.standard_normal(active.sum()) + 1j * rng.standard_normal(active.sum())
    f = Signal(unitary_ifft(coeffs), grid)
    return f.with_values(f.values / l2_norm(f))


def two_bump_signal(grid: PhaseSpaceGrid, rng) -> Signal:
    centers = rng.uniform(-2.5, 2.5, size=2)
    widths = rng.uniform(0.5, 1.0, size=2)
    values = sum(SignalSpec(w, c, rng.uniform(-1.0, 1.0)).evaluate(grid.x_nodes)
                 for w, c in zip(widths, centers))
    f = Signal(values, grid)
    return f.with_values(f.values / l2_norm(f))


def random_signal_specs(size, seed=None):
    """Gaussian packets with widths in [0.6, 1.4], centers in [-2, 2] and modulations in [-2, 2]."""
    rng = _rng(seed)
    return [(f"gauss-{i:02d}", SignalSpec(float(rng.uniform(0.6, 1.4)), float(rng.uniform(-2.0, 2.0)),
                                          float(rng.uniform(-2.0, 2.0))))
            for i in range(int(size))]


def standard_corpus(grid: PhaseSpaceGrid, seed=None):
    """20 Gaussians, 20 band-limited signals and 5 two-bump signals."""
    rng = _rng(seed)
    corpus = []
    for name, spec in random_signal_specs(20, rng.integers(2 ** 31)):
        f = spec.sample(grid)
        corpus.append((name, f.with_values(f.values / l2_norm(f))))
    corpus.extend((f"band-{i:02d}", bandlimited_signal(grid, rng)) for i in range(20))
    corpus.extend((f"bump-{i:02d}", two_bump_signal(grid, rng)) for i in range(5))
    return corpus


def bandlimited_symbol(grid: PhaseSpaceGrid, rng, band=None) -> Symbol2D:
    """Random symbol band-limited to the middle half in both variables."""
    n = grid.n_points
    band = n // 4 if band is None else int(band)
    active = np.abs(grid.indices) < band
    mask = np.outer(active, active)
    coeffs = np.zeros((n, n), dtype=complex)
    coeffs[mask] = rng.standard_normal(mask.sum()) + 1j * rng.standard_normal(mask.sum())
    return Symbol2D(unitary_ifft(coeffs), grid)


def random_symbol_specs(size, seed=None, packets=3):
    """Sums of localized packets: centers in [-2, 2]^2, widths in [0.7, 1.3]."""
    if int(size) < 1:
        raise ValidationError("Corpus size must be positive")
    rng = _rng(seed)
    specs = []
    for i in range(int(size)):
        parts = tuple(
            (float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)), float(rng.uniform(0.7, 1.3)),
             float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), float(rng.uniform(0.5, 1.5)))
            for _ in range(packets))
        specs.append((f"sym-{i:02d}", SymbolSpec(parts)))
    return specs


def symbol_corpus(grid, size=10, seed=None):
    return [(name, spec.sample(grid)) for name, spec in random_symbol_specs(size, seed)]


def random_amplitude_specs(size, seed=None):
    """Analytic amplitudes with widths in [0.8, 1.2] and centers in [-1, 1]^3."""
    rng = _rng(seed)
    return [(f"amp-{i:02d}", AmplitudeSpec(width=float(rng.uniform(0.8, 1.2)),
                                           spread=float(rng.uniform(0.8, 1.2)),
                                           center=tuple(float(c) for c in rng.uniform(-1, 1, size=3)),
                                           modulation=float(rng.uniform(-1, 1))))
            for i in range(int(size))]
