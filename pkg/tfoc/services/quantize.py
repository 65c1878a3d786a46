"""
t-quantization of symbols and the exchange formula.

Kernel convention:

    K(x_j, y_l) = (h / 2pi) * sum_k a(u_jl, xi_k) exp(i (x_j - y_l) xi_k)

with z = y - x reduced to [-L/2, L/2) and u = x + t z. The symbol is
evaluated off-grid by trigonometric interpolation in x, which is exact for
symbols band-limited in that variable. a = 1 gives K = I / h.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np

from config import Config
from tfoc.core.concurrency import parallel_map
from tfoc.core.errors import ValidationError
from tfoc.models import OperatorMatrix, Signal, Symbol2D, check_same_grid
from tfoc.services.grid import unitary_fft, unitary_ifft
from tfoc.services.modspace import MixedNormSpec, mod_norms_2d
from tfoc.services.stft import Window2D, gaussian_window_2d
from tfoc.services.weights import Weight, constant_weight, kernel_weight_transform

logger = logging.getLogger(__name__)


def _check_t(t):
    t = float(t)
    if not 0.0 <= t <= 1.0:
        logger.warning(f"Quantization parameter t={t:g} lies outside [0, 1]")
    return t


def kernel_from_symbol(a: Symbol2D, t) -> OperatorMatrix:
    t = _check_t(t)
    grid = a.grid
    n = grid.n_points
    h = grid.spacing
    x = grid.x_nodes
    xi = grid.xi_nodes
    # x-coefficients of the trigonometric interpolant, one column per xi_k
    coeffs = unitary_fft(a.values, axes=0) / math.sqrt(n)
    dual = grid.xi_nodes
    entries = np.empty((n, n), dtype=complex)
    for j in range(n):
        z = grid.reduce(x - x[j])
        u = x[j] + t * z
        interpolated = np.exp(1j * np.outer(u, dual)) @ coeffs
        entries[j] = np.sum(interpolated * np.exp(-1j * np.outer(z, xi)), axis=1)
    return OperatorMatrix(h / (2 * math.pi) * entries, grid)


def apply_operator(T: OperatorMatrix, f: Signal) -> Signal:
    """g(x_j) = h * sum_l K(x_j, y_l) f(y_l)."""
    check_same_grid(T, f)
    return f.with_values(T.scaled @ f.values)


def exchange(a: Symbol2D, s, t) -> Symbol2D:
    """Symbol b with a_s(x, D) = b_t(x, D).

    A plane wave exp(i (x alpha + xi beta)) quantizes to exp(i t alpha beta) times
    a fixed operator, so the forward transform of a is multiplied by
    exp(i (s - t) x* xi*).
    """
    grid = a.grid
    delta = float(s) - float(t)
    if delta == 0.0:
        return a.with_values(a.values.copy())
    dual = grid.xi_nodes
    multiplier = np.exp(1j * delta * np.outer(dual, dual))
    return a.with_values(unitary_ifft(multiplier * unitary_fft(a.values), axes=(0, 1)))


def symbol_window_kernel(window: Window2D, t) -> Window2D:
    """Kernel of the t-quantized window symbol, used as the matching kernel-side window."""
    kernel = kernel_from_symbol(Symbol2D(window.values, window.grid), t)
    return Window2D.from_values(kernel.entries, window.grid)


def coefficient_of_variation(values):
    values = np.asarray(values, dtype=float)
    mean = float(np.mean(values))
    if mean == 0.0:
        return 0.0
    return float(np.std(values) / mean)


@dataclass
class PseudomodReport:
    t: float
    p: float
    weight: str
    kernel_weight: str
    window: str
    ratios: list
    cv: float
    cv_threshold: float
    passed: bool

    def to_dict(self):
        return {
            "t": self.t,
            "p": self.p,
            "weight": self.weight,
            "kernel_weight": self.kernel_weight,
            "window": self.window,
            "ratios": self.ratios,
            "cv": self.cv,
            "cv_threshold": self.cv_threshold,
            "pass": self.passed,
        }


def pseudomod_ratio_experiment(corpus, t, p, omega: Weight = None, window: Window2D = None,
                               kernel_window="matched", cv_threshold=None, workers=None) -> PseudomodReport:
    """Ratios ||K_{t,a}||_{M^p(omega_0)} / ||a||_{M^p(omega)} over a symbol corpus.

    ``kernel_window`` is ``matched`` (the t-quantized symbol window) or
    ``gaussian`` (the plain tensor Gaussian).
    """
    symbols = [item[1] if isinstance(item, tuple) else item for item in corpus]
    if not symbols:
        raise ValidationError("Symbol corpus is empty")
    grid = symbols[0].grid
    omega = omega or constant_weight(4)
    if omega.arity != 4:
        raise ValidationError("pseudomod experiment needs an arity-4 weight")
    t = _check_t(t)
    window = window or gaussian_window_2d(grid)
    if kernel_window == "matched":
        kernel_side = symbol_window_kernel(window, t)
    elif kernel_window == "gaussian":
        kernel_side = window
    else:
        raise ValidationError(f"Unknown kernel window {kernel_window!r}")
    omega0 = kernel_weight_transform(omega, t)
    symbol_spec = MixedNormSpec(p, p, omega)
    kernel_spec = MixedNormSpec(p, p, omega0)

    def ratio(a):
        kernel = kernel_from_symbol(a, t)
        denominator = mod_norms_2d(a, window, [symbol_spec])[0]
        if denominator == 0.0:
            raise ValidationError("Symbol with zero modulation norm in corpus")
        return mod_norms_2d(kernel.entries, kernel_side, [kernel_spec])[0] / denominator

    ratios = parallel_map(ratio, symbols, workers)
    cv = coefficient_of_variation(ratios)
    threshold = Config.CV_THRESHOLD if cv_threshold is None else float(cv_threshold)
    logger.info(f"pseudomod t={t:g} p={symbol_spec.p:g} weight={omega.descriptor}: cv={cv:.3g}")
    return PseudomodReport(t, symbol_spec.p, omega.descriptor, omega0.descriptor, kernel_window,
                           ratios, cv, threshold, cv < threshold)
