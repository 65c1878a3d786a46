"""
Schatten-von Neumann norms of kernel operators.

Singular values are taken of h * K, the matrix of the operator on plain
coefficient vectors, so the 2-norm equals the L2 norm of the kernel.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy.linalg import polar, svdvals
from scipy.stats import unitary_group

from config import Config
from tfoc.core.errors import ValidationError
from tfoc.models import OperatorMatrix
from tfoc.services.modspace import format_exponent, parse_exponent
from tfoc.services.weights import Weight

logger = logging.getLogger(__name__)

STANDARD_EXPONENTS = (1.0, 4.0 / 3.0, 2.0, 4.0, math.inf)


def schatten_sum(sigma, p):
    sigma = np.asarray(sigma, dtype=float)
    if math.isinf(p):
        return float(np.max(sigma, initial=0.0))
    return float(np.sum(sigma ** p) ** (1.0 / p))


@dataclass
class SchattenReport:
    singular_values: np.ndarray
    norms: dict

    def norm(self, p):
        p = parse_exponent(p)
        if p in self.norms:
            return self.norms[p]
        return schatten_sum(self.singular_values, p)

    def to_dict(self):
        return {
            "sigma": [float(s) for s in self.singular_values],
            "norms": {format_exponent(p): value for p, value in self.norms.items()},
        }


def _matrix(T):
    if isinstance(T, OperatorMatrix):
        return T.scaled
    matrix = np.asarray(T, dtype=complex)
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("Operator has non-finite entries")
    return matrix


def schatten_norms(T: OperatorMatrix, exponents=STANDARD_EXPONENTS) -> SchattenReport:
    sigma = svdvals(_matrix(T))
    return SchattenReport(sigma, {parse_exponent(p): schatten_sum(sigma, parse_exponent(p))
                                  for p in exponents})


def pairing_sum(T, U, V, p):
    """(sum_j |(T f_j, g_j)|^p)^(1/p) for f_j, g_j the columns of V and U."""
    matrix = _matrix(T)
    pairings = np.abs(np.einsum('ij,ik,kj->j', np.conj(U), matrix, V))
    return schatten_sum(pairings, parse_exponent(p))


def orthonormal_pairing_lower_bound(T, trials=200, p=1.0, seed=None):
    """Best pairing sum over random orthonormal bases.

    Each trial draws V at random and aligns U with the polar factor of
    T V, which attains the trace norm when p = 1.
    """
    if int(trials) < 1:
        raise ValidationError("trials must be >= 1")
    matrix = _matrix(T)
    n = matrix.shape[0]
    rng = np.random.default_rng(Config.SEED if seed is None else seed)
    best = 0.0
    for _ in range(int(trials)):
        V = unitary_group.rvs(n, random_state=rng)
        U, _ = polar(matrix @ V)
        best = max(best, pairing_sum(matrix, U, V, p))
    return best


@dataclass
class LogConvexityReport:
    p: float
    lhs: float
    rhs: float
    passed: bool

    def to_dict(self):
        return {"p": format_exponent(self.p), "lhs": self.lhs, "rhs": self.rhs, "pass": self.passed}


def interpolated_exponent(p1, p2, theta):
    inverse = (1 - theta) / p1 + theta / p2
    return math.inf if inverse == 0 else 1.0 / inverse


def log_convexity_check(T, p1, p2, theta, p=None, slack=1e-12) -> LogConvexityReport:
    """||T||_p <= ||T||_p1^(1-theta) ||T||_p2^theta with 1/p = (1-theta)/p1 + theta/p2."""
    p1, p2, theta = parse_exponent(p1), parse_exponent(p2), float(theta)
    if not 0.0 <= theta <= 1.0:
        raise ValidationError("theta must lie in [0, 1]")
    expected = interpolated_exponent(p1, p2, theta)
    if p is None:
        p = expected
    else:
        p = parse_exponent(p)
        if not (math.isinf(p) and math.isinf(expected)) and abs(1 / p - 1 / expected) > 1e-12:
            raise ValidationError("Exponents violate 1/p = (1-theta)/p1 + theta/p2")
    sigma = svdvals(_matrix(T))
    lhs = schatten_sum(sigma, p)
    rhs = schatten_sum(sigma, p1) ** (1 - theta) * schatten_sum(sigma, p2) ** theta
    return LogConvexityReport(p, lhs, rhs, lhs <= rhs * (1 + slack) + slack)


def schatten_monotonicity_check(T, slack=1e-12) -> bool:
    report = T if isinstance(T, SchattenReport) else schatten_norms(T)
    values = [report.norms[p] for p in sorted(report.norms)]
    return all(b <= a * (1 + slack) + slack for a, b in zip(values, values[1:]))


def power_iteration_norm(T, max_iterations=5000, tol=1e-15, seed=None):
    """Largest singular value by power iteration on T* T."""
    matrix = _matrix(T)
    rng = np.random.default_rng(Config.SEED if seed is None else seed)
    vector = rng.standard_normal(matrix.shape[1]) + 1j * rng.standard_normal(matrix.shape[1])
    vector /= np.linalg.norm(vector)
    estimate = 0.0
    for _ in range(max_iterations):
        image = matrix.conj().T @ (matrix @ vector)
        size = np.linalg.norm(image)
        if size == 0.0:
            return 0.0
        vector = image / size
        if abs(size - estimate) <= tol * size:
            estimate = size
            break
        estimate = size
    return float(np.linalg.norm(matrix @ vector))


def weighted_operator(T: OperatorMatrix, omega1: Weight, omega2: Weight) -> OperatorMatrix:
    """omega2(x, 0) K omega1(y, 0)^-1, the diagonal surrogate for weighted classes."""
    grid = T.grid
    zero = np.zeros(grid.n_points)
    left = omega2(grid.x_nodes, zero)
    right = omega1(grid.x_nodes, zero)
    return OperatorMatrix(left[:, None] * T.entries / right[None, :], grid)
