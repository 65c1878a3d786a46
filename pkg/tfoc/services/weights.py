"""
Moderate weights and the empirical checks of the weight conditions.

A Weight is an evaluator over ``arity`` phase-space coordinates plus the
descriptor that appears in reports. Evaluators take broadcastable arrays, so
compositions such as ``kernel_weight_transform`` stay exact.
"""

from dataclasses import dataclass, field
import logging
import re
from typing import Callable

import numpy as np
from scipy.stats import qmc

from config import Config
from tfoc.core.concurrency import chunk_slices, parallel_map
from tfoc.core.errors import ConfigurationError, ValidationError

logger = logging.getLogger(__name__)

SAMPLE_CHUNK = 65536


@dataclass(frozen=True)
class Weight:
    evaluator: Callable = field(repr=False, compare=False)
    descriptor: str
    arity: int

    def __call__(self, *coords):
        if len(coords) != self.arity:
            raise ValidationError(
                f"Weight {self.descriptor} expects {self.arity} coordinates, got {len(coords)}")
        arrays = [np.asarray(c, dtype=float) for c in coords]
        shape = np.broadcast_shapes(*[a.shape for a in arrays])
        return np.broadcast_to(np.asarray(self.evaluator(*arrays), dtype=float), shape)

    def at(self, points):
        """Evaluate on an (M, arity) array of sample points."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.arity:
            raise ValidationError(f"Sample array must have shape (M, {self.arity})")
        return self(*points.T)

    @property
    def is_constant(self):
        return self.descriptor == "one"

    def restrict(self, slots, arity):
        """Weight of ``arity`` coordinates that reads only ``slots``."""
        slots = tuple(int(s) for s in slots)
        if len(slots) != self.arity:
            raise ConfigurationError(
                f"{self.descriptor} needs {self.arity} slots, got {len(slots)}")
        if any(s < 0 or s >= arity for s in slots):
            raise ConfigurationError(f"Slots {slots} out of range for arity {arity}")
        base = self

        def evaluator(*coords):
            return base(*[coords[s] for s in slots])

        return Weight(evaluator, f"{self.descriptor}@{','.join(map(str, slots))}", arity)

    def reflect(self, slots):
        """omega(..., -z_s, ...) for every s in ``slots``."""
        slots = set(int(s) for s in slots)
        base = self

        def evaluator(*coords):
            return base(*[-c if i in slots else c for i, c in enumerate(coords)])

        return Weight(evaluator, f"reflect({self.descriptor};{','.join(map(str, sorted(slots)))})",
                      self.arity)

    def swap_halves(self):
        """omega(b, a) for (a, b) the two halves of the arguments."""
        if self.arity % 2:
            raise ValidationError("swap_halves needs an even arity")
        half = self.arity // 2
        base = self

        def evaluator(*coords):
            return base(*coords[half:], *coords[:half])

        return Weight(evaluator, f"swap({self.descriptor})", self.arity)

    def __mul__(self, other):
        if not isinstance(other, Weight) or other.arity != self.arity:
            raise ValidationError("Weights can only be multiplied at equal arity")
        left, right = self, other

        def evaluator(*coords):
            return left(*coords) * right(*coords)

        return Weight(evaluator, f"{self.descriptor}*{other.descriptor}", self.arity)


def _norm_squared(coords):
    return sum(np.asarray(c, dtype=float) ** 2 for c in coords)


def constant_weight(arity=2, value=1.0):
    value = float(value)
    if value <= 0:
        raise ValidationError("Weights must be positive")
    descriptor = "one" if value == 1.0 else f"constant({value:g})"
    return Weight(lambda *coords: np.full(np.broadcast_shapes(*[np.shape(c) for c in coords]), value),
                  descriptor, arity)


def bracket_power(s, arity=2):
    """<z>^s = (1 + |z|^2)^(s/2)."""
    s = float(s)
    if s == 0:
        return constant_weight(arity)
    return Weight(lambda *coords: (1.0 + _norm_squared(coords)) ** (s / 2.0),
                  f"bracket_power({s:g})", arity)


def exp_power(r, arity=2):
    """exp(r |z|); not polynomially moderate for r > 0."""
    r = float(r)
    return Weight(lambda *coords: np.exp(r * np.sqrt(_norm_squared(coords))),
                  f"exp_power({r:g})", arity)


_DESCRIPTOR = re.compile(
    r"^\s*(?P<name>one|bracket_power|exp_power)\s*(\(\s*(?P<arg>[-+0-9.eE]+)\s*\))?"
    r"\s*(@\s*(?P<slots>\d+(\s*,\s*\d+)*))?\s*$")


def parse_weight(descriptor, arity):
    """Build a Weight from ``one``, ``bracket_power(s)`` or ``exp_power(r)``.

    A suffix ``@i,j`` evaluates the family on those slots only, e.g.
    ``bracket_power(1)@2,3`` of arity 4 is <(z_2, z_3)>.
    """
    if isinstance(descriptor, Weight):
        if descriptor.arity != arity:
            raise ConfigurationError(
                f"Weight {descriptor.descriptor} has arity {descriptor.arity}, expected {arity}")
        return descriptor
    match = _DESCRIPTOR.match(str(descriptor))
    if not match:
        raise ConfigurationError(f"Unknown weight descriptor {descriptor!r}")
    name, arg, slots = match.group("name"), match.group("arg"), match.group("slots")
    if (name == "one") != (arg is None):
        raise ConfigurationError(f"Malformed weight descriptor {descriptor!r}")
    slot_list = [int(s) for s in slots.split(",")] if slots else None
    inner_arity = len(slot_list) if slot_list else arity
    if name == "one":
        weight = constant_weight(inner_arity)
    elif name == "bracket_power":
        weight = bracket_power(float(arg), inner_arity)
    else:
        weight = exp_power(float(arg), inner_arity)
    if slot_list is None or weight.is_constant:
        return weight if weight.arity == arity else constant_weight(arity)
    return weight.restrict(slot_list, arity)


def kernel_weight_transform(omega: Weight, t) -> Weight:
    """omega_0(x, y, xi, eta) = omega((1-t)x + t y, t xi - (1-t) eta, xi + eta, y - x)."""
    if omega.arity != 4:
        raise ValidationError(f"kernel_weight_transform needs an arity-4 weight, got {omega.arity}")
    t = float(t)
    if omega.is_constant:
        return constant_weight(4)

    def evaluator(x, y, xi, eta):
        return omega((1 - t) * x + t * y, t * xi - (1 - t) * eta, xi + eta, y - x)

    return Weight(evaluator, f"kernel_t({omega.descriptor};t={t:g})", 4)


def _solve_dual(phase, x, y, zeta, iterations=60, tol=1e-13):
    """Solve phase'_y(x, y, eta) = zeta for eta by Newton's method."""
    eta = -np.array(zeta, dtype=float, copy=True)
    for _ in range(iterations):
        residual = phase.grad(x, y, eta)[1] - zeta
        slope = phase.hess(x, y, eta)[..., 1, 2]
        if np.any(np.abs(slope) < 1e-12):
            raise ValidationError("Phase has a vanishing y-eta derivative; cannot invert phase'_y")
        step = residual / slope
        eta = eta - step
        if np.max(np.abs(step), initial=0.0) < tol:
            break
    return eta


def kernel_side_weight(omega: Weight, phase) -> Weight:
    """Weight omega_0 with omega_0(x, y, xi, phase'_y(x, y, eta)) = omega(x, eta, xi - phase'_x, -phase'_eta)."""
    if omega.arity != 4:
        raise ValidationError("kernel_side_weight needs an arity-4 weight")
    if omega.is_constant:
        return constant_weight(4)

    def evaluator(x, y, xi, zeta):
        x0, y0, z0 = np.broadcast_arrays(x, y, zeta)
        eta = _solve_dual(phase, x0, y0, z0)
        grad_x, _, grad_eta = phase.grad(x0, y0, eta)
        return omega(x0, eta, xi - grad_x, -grad_eta)

    return Weight(evaluator, f"kernel_side({omega.descriptor};{phase.descriptor})", 4)


@dataclass
class SupReport:
    """Empirical constant sup(ratio) over a sample set."""
    label: str
    max_ratio: float
    cap: float
    n_samples: int
    passed: bool

    def to_dict(self):
        return {
            "label": self.label,
            "max_ratio": self.max_ratio,
            "cap": self.cap,
            "n_samples": self.n_samples,
            "pass": self.passed,
        }


def grid_pair_samples(grid, arity, stride=1):
    """All node tuples (x, y) in (grid^arity)^2, flattened to (M, 2*arity)."""
    if arity > 2:
        raise ValidationError("Full grid samples are only used for arity <= 2")
    nodes = grid.x_nodes[::stride]
    mesh = np.meshgrid(*([nodes] * (2 * arity)), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def lhs_samples(dim, n_points=None, radius=1.0, seed=None):
    """Latin hypercube points in [-radius, radius)^dim."""
    n_points = int(n_points or Config.LHS_POINTS)
    sampler = qmc.LatinHypercube(d=dim, seed=Config.SEED if seed is None else seed)
    return qmc.scale(sampler.random(n_points), -radius * np.ones(dim), radius * np.ones(dim))


def _sup_scan(ratio_fn, samples, workers=None):
    """max of ratio_fn over chunks of ``samples``; order-independent reduction."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValidationError("Sample set must be a non-empty (M, d) array")

    def scan(chunk):
        ratios = ratio_fn(samples[chunk])
        return float(np.max(ratios))

    maxima = parallel_map(scan, list(chunk_slices(samples.shape[0], SAMPLE_CHUNK)), workers)
    return max(maxima)


def _positive(values, label):
    if np.any(~(values > 0)):
        raise ValidationError(f"{label} is not strictly positive on the sample set")
    return values


def _verdict(label, max_ratio, cap, n_samples):
    cap = Config.MODERATE_CAP if cap is None else float(cap)
    passed = bool(np.isfinite(max_ratio) and max_ratio <= cap)
    if not passed:
        logger.warning(f"{label}: empirical constant {max_ratio:.4g} exceeds cap {cap:.4g}")
    return SupReport(label, float(max_ratio), cap, int(n_samples), passed)


def check_moderate(omega: Weight, v: Weight, nodes, cap=None, workers=None) -> SupReport:
    """C* = max omega(x + y) / (omega(x) v(y)) over sampled (x, y) pairs."""
    if omega.arity != v.arity:
        raise ValidationError(f"Arity mismatch: {omega.arity} vs {v.arity}")
    d = omega.arity
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 2 * d:
        raise ValidationError(f"check_moderate needs (M, {2 * d}) samples")

    def ratio(chunk):
        x, y = chunk[:, :d].T, chunk[:, d:].T
        denominator = _positive(omega(*x), omega.descriptor) * _positive(v(*y), v.descriptor)
        with np.errstate(over="ignore", invalid="ignore"):
            return omega(*(x + y)) / denominator

    max_ratio = _sup_scan(ratio, nodes, workers)
    return _verdict(f"moderate({omega.descriptor}|{v.descriptor})", max_ratio, cap, len(nodes))


def check_phase_weight_compat(omega1: Weight, omega2: Weight, omega: Weight, phase, nodes,
                              cap=None, workers=None) -> SupReport:
    """max of omega2(x, xi) / (omega1(y, -eta) omega(X, xi - phi'_x, eta - phi'_y, -phi'_zeta)).

    ``nodes`` holds (x, y, zeta, xi, eta) rows.
    """
    if omega1.arity != 2 or omega2.arity != 2 or omega.arity != 6:
        raise ValidationError("Compatibility check needs arities (2, 2, 6)")
    if not hasattr(phase, "grad"):
        raise ValidationError("Phase must provide gradients")
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 5:
        raise ValidationError("Compatibility samples must have shape (M, 5)")

    def ratio(chunk):
        x, y, zeta, xi, eta = chunk.T
        grad_x, grad_y, grad_zeta = phase.grad(x, y, zeta)
        right = omega(x, y, zeta, xi - grad_x, eta - grad_y, -grad_zeta)
        denominator = _positive(omega1(y, -eta), omega1.descriptor) * _positive(right, omega.descriptor)
        with np.errstate(over="ignore", invalid="ignore"):
            return omega2(x, xi) / denominator

    max_ratio = _sup_scan(ratio, nodes, workers)
    label = f"compat({omega1.descriptor},{omega2.descriptor},{omega.descriptor};{phase.descriptor})"
    return _verdict(label, max_ratio, cap, len(nodes))


def check_weightcond1(omega0: Weight, omega: Weight, phase, nodes, rtol=1e-8) -> SupReport:
    """Relative deviation of omega0(x, y, xi, phi'_y(x, y, eta)) from omega(x, eta, xi - phi'_x, -phi'_eta).

    ``nodes`` holds (x, y, xi, eta) rows; the report's ``cap`` is ``rtol``.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 4:
        raise ValidationError("weightcond1 samples must have shape (M, 4)")
    x, y, xi, eta = nodes.T
    grad_x, grad_y, grad_eta = phase.grad(x, y, eta)
    left = omega0(x, y, xi, grad_y)
    right = _positive(omega(x, eta, xi - grad_x, -grad_eta), omega.descriptor)
    deviation = float(np.max(np.abs(left - right) / right))
    passed = deviation <= rtol
    if not passed:
        logger.warning(f"weightcond1 deviation {deviation:.3g} above {rtol:g}")
    return SupReport(f"weightcond1({omega0.descriptor},{omega.descriptor})", deviation,
                     float(rtol), len(nodes), passed)


def check_weightcond2(omega0: Weight, omega: Weight, v1: Weight, v2: Weight, nodes5, nodes6,
                      v: Weight = None, cap=None, workers=None):
    """Shift and split conditions linking omega0, omega, v1, v2 and v.

    ``nodes5`` rows are (x, y, xi, eta, zeta) and ``nodes6`` rows are
    (x, eta, xi1, y1, xi2, y2). Returns a dict of SupReports.
    """
    if omega0.arity != 4 or omega.arity != 4 or v1.arity != 1 or v2.arity != 2:
        raise ValidationError("weightcond2 needs arities omega0=4, omega=4, v1=1, v2=2")

    def shift_ratio(chunk):
        x, y, xi, eta, zeta = chunk.T
        denominator = _positive(omega0(x, y, xi, eta), omega0.descriptor) * _positive(v1(zeta), v1.descriptor)
        with np.errstate(over="ignore", invalid="ignore"):
            return omega0(x, y, xi, eta + zeta) / denominator

    def split_ratio(chunk):
        x, eta, xi1, y1, xi2, y2 = chunk.T
        denominator = _positive(omega(x, eta, xi1, y1), omega.descriptor) * _positive(v2(xi2, y2), v2.descriptor)
        with np.errstate(over="ignore", invalid="ignore"):
            return omega(x, eta, xi1 + xi2, y1 + y2) / denominator

    reports = {
        "omega0_shift": _verdict("weightcond2:omega0", _sup_scan(shift_ratio, nodes5, workers),
                                 cap, len(nodes5)),
        "omega_split": _verdict("weightcond2:omega", _sup_scan(split_ratio, nodes6, workers),
                                cap, len(nodes6)),
    }
    if v is not None:
        points = np.asarray(nodes6, dtype=float)
        product = v1(points[:, 4]) * v2(points[:, 2], points[:, 5])
        actual = v(*points.T)
        deviation = float(np.max(np.abs(actual - product) / product))
        reports["v_factorization"] = SupReport("weightcond2:v", deviation, 1e-12, len(points),
                                               deviation <= 1e-12)
    return reports


def factorized_v(v1: Weight, v2: Weight) -> Weight:
    """v(x, y, zeta, xi, eta, z) = v1(eta) v2(xi, z)."""
    def evaluator(x, y, zeta, xi, eta, z):
        return v1(eta) * v2(xi, z)

    return Weight(evaluator, f"v1({v1.descriptor})*v2({v2.descriptor})", 6)


@dataclass
class VvrelReport:
    max_x_deviation: float
    x_independent: bool
    constants: dict
    max_constant: float
    passed: bool

    def to_dict(self):
        return {
            "max_x_deviation": self.max_x_deviation,
            "x_independent": self.x_independent,
            "constants": {f"{t:g}": c for t, c in self.constants.items()},
            "max_constant": self.max_constant,
            "pass": self.passed,
        }


def check_vvrel(v: Weight, nodes, t_values=(0.0, 0.25, 0.5, 0.75, 1.0), cap=None, rtol=1e-12):
    """v(X, xi, eta, z) must not depend on X, and v(t .) <= C v for the sampled t.

    ``nodes`` rows are the six coordinates (X, xi, eta, z).
    """
    if v.arity != 6:
        raise ValidationError("check_vvrel needs an arity-6 weight")
    nodes = np.asarray(nodes, dtype=float)
    base = _positive(v(*nodes.T), v.descriptor)
    moved = nodes.copy()
    moved[:, :3] = 0.0
    x_deviation = float(np.max(np.abs(v(*moved.T) - base) / base))
    constants = {float(t): float(np.max(v(*(t * nodes).T) / base)) for t in t_values}
    max_constant = max(constants.values())
    cap = Config.MODERATE_CAP if cap is None else float(cap)
    x_independent = x_deviation <= rtol
    return VvrelReport(x_deviation, x_independent, constants, max_constant,
                       bool(x_independent and max_constant <= cap))
