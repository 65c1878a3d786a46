"""
Weighted modulation-space norms.

The mixed norm integrates the translation variable first (exponent p) and
the frequency variable last (exponent q). Infinite exponents are exact maxima.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from config import Config
from tfoc.core.concurrency import parallel_map
from tfoc.core.errors import ValidationError
from tfoc.models import PhaseSpaceGrid, Signal
from tfoc.services.grid import unitary_fft
from tfoc.services.stft import Window2D, gaussian_window, stft, stft_2d_blocks
from tfoc.services.weights import Weight, constant_weight

logger = logging.getLogger(__name__)

MEASURES = ("quadrature", "counting")


def parse_exponent(value):
    """Accept numbers, 'inf' or '4/3'; returns a float in [1, inf]."""
    try:
        if isinstance(value, str):
            text = value.strip().lower()
            if text in ("inf", "infinity", "oo"):
                value = math.inf
            elif "/" in text:
                num, den = text.split("/", 1)
                value = float(num) / float(den)
            else:
                value = float(text)
        value = float(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ValidationError(f"Cannot parse exponent {value!r}")
    if not (value >= 1.0):
        raise ValidationError(f"Exponent must lie in [1, inf], got {value!r}")
    return value


def format_exponent(value):
    if math.isinf(value):
        return "inf"
    if abs(value - 4.0 / 3.0) < 1e-12:
        return "4/3"
    return f"{value:g}"


def conjugate_exponent(p):
    """p' with 1/p + 1/p' = 1."""
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class MixedNormSpec:
    p: float
    q: float
    omega: Weight = field(default_factory=lambda: constant_weight(2))
    measure: str = "quadrature"

    def __post_init__(self):
        object.__setattr__(self, 'p', parse_exponent(self.p))
        object.__setattr__(self, 'q', parse_exponent(self.q))
        if self.measure not in MEASURES:
            raise ValidationError(f"Unknown measure {self.measure!r}")

    def label(self):
        return f"M^({format_exponent(self.p)},{format_exponent(self.q)})[{self.omega.descriptor}]"

    def to_dict(self):
        return {
            "p": format_exponent(self.p),
            "q": format_exponent(self.q),
            "weight": self.omega.descriptor,
            "measure": self.measure,
        }


def _lebesgue(values, p, axes, cell):
    """(cell * sum |v|^p)^(1/p) over ``axes``; the maximum when p is infinite."""
    if math.isinf(p):
        return np.max(values, axis=axes)
    return (cell * np.sum(values ** p, axis=axes)) ** (1.0 / p)


def mixed_norm(table, p, q, spacing=1.0, inner_axes=1):
    """Mixed L^{p,q} norm of a nonnegative table.

    The first ``inner_axes`` axes are integrated with exponent p, the rest
    with q. Each axis carries the quadrature weight ``spacing``.
    """
    table = np.abs(np.asarray(table))
    inner = tuple(range(inner_axes))
    outer_dims = table.ndim - inner_axes
    partial = _lebesgue(table, p, inner, spacing ** inner_axes)
    return float(_lebesgue(partial, q, tuple(range(outer_dims)), spacing ** outer_dims))


def _cell(grid, spec):
    return grid.spacing if spec.measure == "quadrature" else 1.0


def mod_norm(f: Signal, chi, spec: MixedNormSpec) -> float:
    if spec.omega.arity != 2:
        raise ValidationError(f"mod_norm needs an arity-2 weight, got {spec.omega.arity}")
    grid = f.grid
    table = np.abs(stft(f, chi).values)
    if not spec.omega.is_constant:
        table = table * spec.omega(grid.x_nodes[:, None], grid.xi_nodes[None, :])
    return mixed_norm(table, spec.p, spec.q, _cell(grid, spec))


def _table_2d(a, grid):
    values = getattr(a, "values", None)
    if values is None:
        values = getattr(a, "entries", a)
    values = np.asarray(values, dtype=complex)
    n = grid.n_points
    if values.shape != (n, n):
        raise ValidationError(f"2-D input must have shape {(n, n)}, got {values.shape}")
    return values


class _MixedAccumulator:
    """Running inner norm over the translation block index."""

    def __init__(self, spec, cell, shape):
        self.spec = spec
        self.cell = cell
        self.total = np.zeros(shape)

    def add(self, weighted):
        if math.isinf(self.spec.p):
            np.maximum(self.total, np.max(weighted, axis=0), out=self.total)
        else:
            self.total += self.cell ** 2 * np.sum(weighted ** self.spec.p, axis=0)

    def result(self):
        inner = self.total if math.isinf(self.spec.p) else self.total ** (1.0 / self.spec.p)
        return float(_lebesgue(inner, self.spec.q, (0, 1), self.cell ** 2))


def mod_norms_2d(a, window: Window2D, specs):
    """Several mixed norms of the 2-D STFT of ``a`` from a single pass over its blocks."""
    grid = window.grid
    values = _table_2d(a, grid)
    for spec in specs:
        if spec.omega.arity != 4:
            raise ValidationError(f"mod_norm_2d needs arity-4 weights, got {spec.omega.arity}")
    n = grid.n_points
    x2 = grid.x_nodes[:, None, None]
    xi1 = grid.xi_nodes[None, :, None]
    xi2 = grid.xi_nodes[None, None, :]
    accumulators = [_MixedAccumulator(spec, _cell(grid, spec), (n, n)) for spec in specs]
    for j1, block in stft_2d_blocks(values, window):
        magnitude = np.abs(block)
        x1 = grid.x_nodes[j1]
        for spec, acc in zip(specs, accumulators):
            if spec.omega.is_constant:
                acc.add(magnitude)
            else:
                acc.add(magnitude * spec.omega(x1, x2, xi1, xi2))
    return [acc.result() for acc in accumulators]


def mod_norm_2d(a, window: Window2D, spec: MixedNormSpec) -> float:
    """Modulation norm on the 2-D phase space with a general 2-D window."""
    return mod_norms_2d(a, window, [spec])[0]


@dataclass(frozen=True, eq=False)
class LatticeCover:
    centers: np.ndarray
    bump: Signal
    radius: float

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=int)
        object.__setattr__(self, 'centers', centers)
        total = sum(np.roll(self.bump.values, int(c)) for c in centers)
        if not np.allclose(total, 1.0, rtol=0.0, atol=1e-12):
            raise ValidationError("Lattice cover is not a partition of unity")

    @property
    def grid(self):
        return self.bump.grid

    def pieces(self, f: Signal):
        """f_alpha = f * bump(. - x_alpha), one row per center."""
        return np.stack([f.values * np.roll(self.bump.values, int(c)) for c in self.centers])


def default_cover(grid: PhaseSpaceGrid, step=4) -> LatticeCover:
    """Hat bumps of radius step*h centred every ``step`` nodes."""
    if grid.n_points % step:
        raise ValidationError(f"Grid size {grid.n_points} is not divisible by the cover step {step}")
    hat = np.clip(1.0 - np.abs(grid.indices) / step, 0.0, None)
    centers = np.arange(0, grid.n_points, step)
    return LatticeCover(centers, Signal(hat, grid), step * grid.spacing)


def lattice_norm(f: Signal, cover: LatticeCover, spec: MixedNormSpec) -> float:
    """||F||_{L^q} with F(xi) = (sum_alpha |F(f_alpha)(xi) omega(x_alpha, xi)|^p)^(1/p)."""
    grid = f.grid
    if not grid.same_as(cover.grid):
        raise ValidationError("Cover and signal live on different grids")
    if spec.omega.arity != 2:
        raise ValidationError("lattice_norm needs an arity-2 weight")
    spectra = np.abs(unitary_fft(cover.pieces(f), axes=1))
    if not spec.omega.is_constant:
        index = (cover.centers + grid.n_points // 2) % grid.n_points
        spectra = spectra * spec.omega(grid.x_nodes[index][:, None], grid.xi_nodes[None, :])
    envelope = _lebesgue(spectra, spec.p, 0, 1.0)
    return float(_lebesgue(envelope, spec.q, 0, _cell(grid, spec)))


@dataclass
class RatioReport:
    ratios: list
    min_ratio: float
    max_ratio: float
    passed: bool = True

    @property
    def spread(self):
        """max_ratio / min_ratio."""
        if self.min_ratio <= 0.0:
            return math.inf
        return self.max_ratio / self.min_ratio

    def to_dict(self):
        return {
            "ratios": self.ratios,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "spread": self.spread,
            "pass": self.passed,
        }


def _signals(corpus):
    signals = [item[1] if isinstance(item, tuple) else item for item in corpus]
    if not signals:
        raise ValidationError("Corpus is empty")
    return signals


def window_independence_report(corpus, chi1, chi2, spec: MixedNormSpec, max_spread=None,
                               workers=None) -> RatioReport:
    """Ratios mod_norm(f, chi1) / mod_norm(f, chi2) over a corpus; pass iff max/min < max_spread."""
    signals = _signals(corpus)

    def ratio(f):
        return mod_norm(f, chi1, spec) / mod_norm(f, chi2, spec)

    ratios = parallel_map(ratio, signals, workers)
    report = RatioReport(ratios, min(ratios), max(ratios))
    cap = Config.WINDOW_SPREAD_CAP if max_spread is None else float(max_spread)
    report.passed = bool(report.spread < cap)
    return report


def lattice_equivalence_report(corpus, cover: LatticeCover, chi, spec: MixedNormSpec, cap=None,
                               workers=None) -> RatioReport:
    """Ratios lattice_norm / mod_norm; pass iff every ratio lies in [1/cap, cap]."""
    signals = _signals(corpus)

    def ratio(f):
        return lattice_norm(f, cover, spec) / mod_norm(f, chi, spec)

    ratios = parallel_map(ratio, signals, workers)
    report = RatioReport(ratios, min(ratios), max(ratios))
    cap = Config.EQUIVALENCE_CAP if cap is None else float(cap)
    report.passed = bool(1.0 / cap <= report.min_ratio and report.max_ratio <= cap)
    return report


def weight_domination(omega2: Weight, omega1: Weight, grid: PhaseSpaceGrid) -> float:
    """Smallest C with omega2 <= C omega1 on the grid nodes."""
    x, xi = grid.x_nodes[:, None], grid.xi_nodes[None, :]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ratio = omega2(x, xi) / omega1(x, xi)
    if not np.all(np.isfinite(ratio)):
        return math.inf
    return float(np.max(ratio))


@dataclass
class EmbeddingReport(RatioReport):
    weight_constant: float = 1.0

    def to_dict(self):
        data = super().to_dict()
        data["weight_constant"] = self.weight_constant
        return data


def embedding_report(corpus, chi, spec1: MixedNormSpec, spec2: MixedNormSpec, cap=None,
                     workers=None) -> EmbeddingReport:
    """max over the corpus of mod_norm(f, spec2) / mod_norm(f, spec1) on one grid."""
    if spec1.p > spec2.p or spec1.q > spec2.q:
        raise ValidationError("Embedding needs p1 <= p2 and q1 <= q2")
    signals = _signals(corpus)
    cap = Config.MODERATE_CAP if cap is None else float(cap)
    constant = weight_domination(spec2.omega, spec1.omega, signals[0].grid)
    if not constant <= cap:
        raise ValidationError(
            f"omega2 <= C omega1 fails: C = {constant:.4g} exceeds cap {cap:.4g}")

    def ratio(f):
        return mod_norm(f, chi, spec2) / mod_norm(f, chi, spec1)

    ratios = parallel_map(ratio, signals, workers)
    max_ratio = max(ratios)
    return EmbeddingReport(ratios, min(ratios), max_ratio, bool(np.isfinite(max_ratio)), constant)


@dataclass
class RefinementReport:
    """Per-grid maxima of an embedding ratio and the factors between consecutive grids."""
    max_ratio_by_N: dict
    factors: list
    factor: float
    passed: bool

    def to_dict(self):
        return {
            "max_ratio_by_N": {str(n): v for n, v in self.max_ratio_by_N.items()},
            "factors": self.factors,
            "drift_factor": self.factor,
            "pass": self.passed,
        }


def embedding_refinement_report(corpora, spec1: MixedNormSpec, spec2: MixedNormSpec, window=None,
                                factor=None, workers=None) -> RefinementReport:
    """Embedding ratios across grid refinement.

    ``corpora`` maps N to a corpus sampled on that grid. Passes iff every
    per-grid maximum is finite and consecutive maxima differ by less than
    ``factor``.
    """
    if not corpora:
        raise ValidationError("Refinement needs at least one grid")
    window = window or gaussian_window
    factor = Config.DRIFT_FACTOR if factor is None else float(factor)
    maxima = {}
    for n in sorted(corpora):
        signals = _signals(corpora[n])
        maxima[n] = embedding_report(signals, window(signals[0].grid), spec1, spec2, workers=workers).max_ratio
    values = list(maxima.values())
    factors = []
    for a, b in zip(values, values[1:]):
        factors.append(max(a, b) / min(a, b) if min(a, b) > 0 else math.inf)
    passed = all(math.isfinite(v) for v in values) and all(f < factor for f in factors)
    if not passed:
        logger.warning(f"Embedding {spec1.label()} -> {spec2.label()} unstable under refinement: {factors}")
    return RefinementReport(maxima, factors, factor, bool(passed))
