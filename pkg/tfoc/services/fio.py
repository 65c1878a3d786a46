"""
Fourier integral operators with rough phases.

Three evaluation paths are provided: the direct kernel sum of the
oscillatory integral (``fio_matrix``), the symbol-to-kernel map
(``kernel_map``) and the phase-space representation through localized
Taylor splits of the phase (``tf_pairing``).
"""

from dataclasses import dataclass, field
import logging
import math
import re
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from config import Config
from tfoc.core.errors import ConfigurationError, ValidationError
from tfoc.models import Amplitude3D, OperatorMatrix, PhaseSpaceGrid, Signal, Symbol2D, check_same_grid
from tfoc.services.grid import parity
from tfoc.services.stft import Window, gaussian_window, stft, stft_3d_blocks
from tfoc.services.weights import Weight

logger = logging.getLogger(__name__)

HESSIAN_BLOCKS = ("full", "x_zeta", "y_zeta", "zeta_zeta")


def _hessian(xx, xy, xz, yy, yz, zz):
    xx, xy, xz, yy, yz, zz = np.broadcast_arrays(xx, xy, xz, yy, yz, zz)
    return np.stack([
        np.stack([xx, xy, xz], axis=-1),
        np.stack([xy, yy, yz], axis=-1),
        np.stack([xz, yz, zz], axis=-1),
    ], axis=-2)


@dataclass(frozen=True)
class PhaseFn:
    """Phase phi(x, y, zeta) given by analytic value, gradient and Hessian."""
    value: Callable = field(repr=False, compare=False)
    grad: Callable = field(repr=False, compare=False)
    hess: Callable = field(repr=False, compare=False)
    descriptor: str

    def shifted(self, c):
        """phi + c."""
        c = float(c)
        value = self.value
        return PhaseFn(lambda x, y, z: value(x, y, z) + c, self.grad, self.hess,
                       f"{self.descriptor}+{c:g}")

    def tilde(self):
        """phi~(x, y, xi) = -phi(x, xi, y)."""
        value, grad, hess = self.value, self.grad, self.hess

        def tilde_grad(x, y, z):
            gx, gy, gz = grad(x, z, y)
            return -gx, -gz, -gy

        def tilde_hess(x, y, z):
            return -hess(x, z, y)[..., [0, 2, 1], :][..., :, [0, 2, 1]]

        return PhaseFn(lambda x, y, z: -value(x, z, y), tilde_grad, tilde_hess,
                       f"tilde({self.descriptor})")

    def self_check(self, n_points=100, step=1e-4, tol=1e-5, radius=3.0, seed=None):
        """Compare grad and hess with central differences of value at random points."""
        rng = np.random.default_rng(Config.SEED if seed is None else seed)
        points = rng.uniform(-radius, radius, size=(n_points, 3))
        eye = np.eye(3) * step

        def value_at(p):
            return np.asarray(self.value(*p.T), dtype=float)

        grad = np.stack(np.broadcast_arrays(*self.grad(*points.T)), axis=-1)
        hess = self.hess(*points.T)
        fd_grad = np.stack([(value_at(points + e) - value_at(points - e)) / (2 * step) for e in eye], axis=-1)
        fd_hess = np.empty((n_points, 3, 3))
        for i in range(3):
            for k in range(3):
                ei, ek = eye[i], eye[k]
                fd_hess[:, i, k] = (value_at(points + ei + ek) - value_at(points + ei - ek)
                                    - value_at(points - ei + ek) + value_at(points - ei - ek)) / (4 * step ** 2)
        grad_error = float(np.max(np.abs(grad - fd_grad)))
        hess_error = float(np.max(np.abs(hess - fd_hess)))
        return {
            "grad_error": grad_error,
            "hess_error": hess_error,
            "real": bool(np.all(np.isreal(self.value(*points.T)))),
            "pass": grad_error < tol and hess_error < tol,
        }


def zero_phase():
    def zero(x, y, z):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(z)))

    return PhaseFn(zero, lambda x, y, z: (zero(x, y, z),) * 3,
                   lambda x, y, z: _hessian(*(zero(x, y, z),) * 6), "zero")


def linear_phase():
    """phi = (x - y) zeta."""
    def value(x, y, z):
        return (x - y) * z

    def grad(x, y, z):
        x, y, z = np.broadcast_arrays(x, y, z)
        return z * 1.0, -z * 1.0, x - y

    def hess(x, y, z):
        zero = np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(z)))
        return _hessian(zero, zero, zero + 1.0, zero, zero - 1.0, zero)

    return PhaseFn(value, grad, hess, "linear")


def linear_plus_sin(epsilon):
    """phi = (x - y) zeta + epsilon sin(y) sin(zeta)."""
    eps = float(epsilon)
    if eps == 0.0:
        base = linear_phase()
        return PhaseFn(base.value, base.grad, base.hess, "linear_plus_sin(epsilon=0)")

    def value(x, y, z):
        return (x - y) * z + eps * np.sin(y) * np.sin(z)

    def grad(x, y, z):
        x, y, z = np.broadcast_arrays(x, y, z)
        return (z * 1.0,
                -z + eps * np.cos(y) * np.sin(z),
                x - y + eps * np.sin(y) * np.cos(z))

    def hess(x, y, z):
        x, y, z = np.broadcast_arrays(x, y, z)
        zero = np.zeros(x.shape)
        ss = eps * np.sin(y) * np.sin(z)
        return _hessian(zero, zero, zero + 1.0, -ss, -1.0 + eps * np.cos(y) * np.cos(z), -ss)

    return PhaseFn(value, grad, hess, f"linear_plus_sin(epsilon={eps:g})")


def quadratic_phase(c=0.1):
    """phi = (x - y) zeta + c (x^2 + y^2 + zeta^2) / 2."""
    c = float(c)

    def value(x, y, z):
        return (x - y) * z + 0.5 * c * (x * x + y * y + z * z)

    def grad(x, y, z):
        x, y, z = np.broadcast_arrays(x, y, z)
        return z + c * x, -z + c * y, x - y + c * z

    def hess(x, y, z):
        zero = np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(z)))
        return _hessian(zero + c, zero, zero + 1.0, zero + c, zero - 1.0, zero + c)

    return PhaseFn(value, grad, hess, f"quadratic(c={c:g})")


_PHASES = {
    "zero": (zero_phase, None),
    "linear": (linear_phase, None),
    "linear_plus_sin": (linear_plus_sin, "epsilon"),
    "quadratic": (quadratic_phase, "c"),
}

_PHASE_DESCRIPTOR = re.compile(r"^\s*(?P<name>[a-z_]+)\s*(\((?P<args>[^)]*)\))?\s*$")


def parse_phase(descriptor) -> PhaseFn:
    """Build a phase from e.g. ``linear_plus_sin(epsilon=0.1)`` or {"name": ..., "epsilon": ...}."""
    if isinstance(descriptor, PhaseFn):
        return descriptor
    if isinstance(descriptor, dict):
        params = dict(descriptor)
        name = params.pop("name", None)
    else:
        match = _PHASE_DESCRIPTOR.match(str(descriptor))
        if not match:
            raise ConfigurationError(f"Unknown phase descriptor {descriptor!r}")
        name, params = match.group("name"), {}
        args = (match.group("args") or "").strip()
        if args:
            for part in args.split(","):
                key, sep, text = part.partition("=")
                if not sep:
                    key, text = None, part
                try:
                    params[key.strip() if key else None] = float(text)
                except ValueError:
                    raise ConfigurationError(f"Malformed phase parameter {part!r}")
    if name not in _PHASES:
        raise ConfigurationError(f"Unknown phase {name!r}")
    factory, param_name = _PHASES[name]
    if param_name is None:
        if params:
            raise ConfigurationError(f"Phase {name!r} takes no parameters")
        return factory()
    values = [v for k, v in params.items() if k in (None, param_name)]
    if len(values) != 1 or len(params) != 1:
        raise ConfigurationError(f"Phase {name!r} needs exactly one parameter {param_name!r}")
    return factory(values[0])


def node_mesh(grid: PhaseSpaceGrid):
    """(x, y, zeta) node arrays of shape (N, N, N)."""
    return np.meshgrid(grid.x_nodes, grid.x_nodes, grid.xi_nodes, indexing="ij")


def fio_matrix(a: Amplitude3D, phase: PhaseFn) -> OperatorMatrix:
    """K(x_j, y_l) = (h / 2pi) sum_k a(x_j, y_l, zeta_k) exp(i phi(x_j, y_l, zeta_k))."""
    grid = a.grid
    x, y, z = node_mesh(grid)
    entries = grid.spacing / (2 * math.pi) * np.sum(a.values * np.exp(1j * phase.value(x, y, z)), axis=2)
    return OperatorMatrix(entries, grid)


def kernel_map(a: Symbol2D, phase: PhaseFn) -> OperatorMatrix:
    """K_{a,phi}(x_j, y_l) = h sum_k a(x_j, zeta_k) exp(i phi(x_j, y_l, zeta_k))."""
    grid = a.grid
    x, y, z = node_mesh(grid)
    entries = grid.spacing * np.sum(a.values[:, None, :] * np.exp(1j * phase.value(x, y, z)), axis=2)
    return OperatorMatrix(entries, grid)


def amplitude_from_symbol(b: Symbol2D) -> Amplitude3D:
    """a(x, y, zeta) = b(x, zeta)."""
    n = b.grid.n_points
    return Amplitude3D(np.broadcast_to(b.values[:, None, :], (n, n, n)), b.grid)


def gauss_legendre(n_points=None):
    """Nodes and weights on [0, 1]."""
    nodes, weights = leggauss(int(n_points or Config.GAUSS_LEGENDRE_POINTS))
    return 0.5 * (nodes + 1.0), 0.5 * weights


@dataclass(frozen=True)
class Cutoff:
    """Smooth product cutoff: 1 for max|X1_i| <= plateau, 0 beyond radius."""
    plateau: float
    radius: float

    def __post_init__(self):
        if not 0.0 <= self.plateau < self.radius:
            raise ValidationError("Cutoff needs 0 <= plateau < radius")

    def profile(self, u):
        u = np.abs(np.asarray(u, dtype=float))
        tau = np.clip((u - self.plateau) / (self.radius - self.plateau), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            rising = np.where(tau < 1.0, np.exp(-1.0 / np.maximum(1.0 - tau, 1e-300)), 0.0)
            falling = np.where(tau > 0.0, np.exp(-1.0 / np.maximum(tau, 1e-300)), 0.0)
        return rising / (rising + falling)

    def __call__(self, displacement):
        displacement = np.asarray(displacement, dtype=float)
        return np.prod(self.profile(displacement), axis=-1)

    @classmethod
    def for_cell(cls, grid, cell_radius):
        h = grid.spacing
        return cls((cell_radius + 0.25) * h, (cell_radius + 1.0) * h)


def _remainder(phase, base, displacement, nodes, weights):
    """int_0^1 (1 - t) <phi''(X + t X1) X1, X1> dt with broadcast base X and displacement X1."""
    total = 0.0
    for t, w in zip(nodes, weights):
        point = [b + t * d for b, d in zip(base, displacement)]
        hess = phase.hess(*point)
        quad = sum(hess[..., i, k] * displacement[i] * displacement[k]
                   for i in range(3) for k in range(3))
        total = total + w * (1.0 - t) * quad
    return total


@dataclass(frozen=True)
class TaylorSplit:
    phase: PhaseFn
    cutoff: Cutoff
    point: tuple
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def _parts(self, displacement):
        displacement = np.asarray(displacement, dtype=float)
        return [displacement[..., i] for i in range(3)]

    def psi1(self, displacement):
        """phi(X) + <phi'(X), X1>."""
        d = self._parts(displacement)
        grad = self.phase.grad(*self.point)
        return self.phase.value(*self.point) + sum(float(g) * di for g, di in zip(grad, d))

    def psi2(self, displacement):
        """psi(X1) * int_0^1 (1 - t) <phi''(X + t X1) X1, X1> dt."""
        d = self._parts(displacement)
        return self.cutoff(displacement) * _remainder(self.phase, self.point, d, self.nodes, self.weights)

    def residual(self, displacement):
        """psi(X1) phi(X + X1) - psi(X1) psi1(X1) - psi2(X1)."""
        d = self._parts(displacement)
        cut = self.cutoff(displacement)
        shifted = self.phase.value(*[p + di for p, di in zip(self.point, d)])
        return cut * shifted - cut * self.psi1(displacement) - self.psi2(displacement)


def taylor_split(phase: PhaseFn, cutoff: Cutoff, point, n_points=None) -> TaylorSplit:
    nodes, weights = gauss_legendre(n_points)
    point = tuple(float(p) for p in point)
    if len(point) != 3:
        raise ValidationError("Expansion point must be (x, y, zeta)")
    return TaylorSplit(phase, cutoff, point, nodes, weights)


@dataclass(frozen=True, eq=False)
class PairingWindows:
    """chi0 on cell offsets -r..r with L1 norm 1, chi on the cube with L2 norm 1."""
    chi0: np.ndarray
    chi: np.ndarray
    radius: int
    grid: PhaseSpaceGrid
    cutoff: Cutoff = None

    def __post_init__(self):
        r, h = int(self.radius), self.grid.spacing
        width = 2 * r + 1
        chi0 = np.asarray(self.chi0, dtype=float)
        chi = np.asarray(self.chi, dtype=float)
        if chi0.shape != (width,) or chi.shape != (width,) * 3:
            raise ValidationError("Pairing windows do not match the cell radius")
        if 2 * r + 1 > self.grid.n_points:
            raise ValidationError("Pairing cell is wider than the grid")
        if abs(h * np.sum(np.abs(chi0)) - 1.0) > 1e-10:
            raise ValidationError("chi0 must have L1 norm 1")
        if abs(math.sqrt(h ** 3 * np.sum(chi ** 2)) - 1.0) > 1e-10:
            raise ValidationError("chi must have L2 norm 1")
        object.__setattr__(self, 'radius', r)
        object.__setattr__(self, 'chi0', chi0)
        object.__setattr__(self, 'chi', chi)
        if self.cutoff is None:
            object.__setattr__(self, 'cutoff', Cutoff.for_cell(self.grid, r))

    @property
    def offsets(self):
        return np.arange(-self.radius, self.radius + 1)

    def chi0_window(self) -> Window:
        values = np.zeros(self.grid.n_points)
        values[self.offsets + self.grid.n_points // 2] = self.chi0
        return Window.from_signal(Signal(values, self.grid))

    def mass(self):
        """Z = h^3 sum chi0(x1) chi0(y1) chi(X1)^2."""
        weight = self.chi0[:, None, None] * self.chi0[None, :, None] * self.chi ** 2
        return self.grid.spacing ** 3 * float(np.sum(weight))

    def normalization(self):
        return 1.0 / (2 * math.pi * self.mass())


def default_pairing_windows(grid: PhaseSpaceGrid, radius=None) -> PairingWindows:
    r = int(Config.CELL_RADIUS if radius is None else radius)
    h = grid.spacing
    offsets = np.arange(-r, r + 1)
    profile = np.cos(math.pi * offsets / (2 * (r + 1))) ** 2
    chi0 = profile / (h * profile.sum())
    cube = profile[:, None, None] * profile[None, :, None] * profile[None, None, :]
    chi = cube / math.sqrt(h ** 3 * np.sum(cube ** 2))
    return PairingWindows(chi0, chi, r, grid)


def tf_pairing(a: Amplitude3D, phase: PhaseFn, f: Signal, g: Signal,
               windows: PairingWindows = None, quadrature_points=None) -> complex:
    """(Op_phi(a) f, g) through the phase-space representation.

    On each cell around a node X the phase is split as psi1 + psi2; the
    localized amplitude times exp(i psi2) is transformed in the (x1, y1)
    offsets and paired with V_chi0 f(y, -eta) conj(V_chi0 g(x, xi)).
    """
    grid = check_same_grid(a, f, g)
    windows = windows or default_pairing_windows(grid)
    if not windows.grid.same_as(grid):
        raise ValidationError("Pairing windows live on a different grid")
    if not (np.any(a.values) and np.any(f.values) and np.any(g.values)):
        return 0j
    n, h = grid.n_points, grid.spacing
    offsets = windows.offsets
    width = offsets.size
    cell = offsets * h
    nodes, weights = gauss_legendre(quadrature_points)

    chi0 = windows.chi0_window()
    vf_reflected = parity(stft(f, chi0).values, axes=1)
    vg = stft(g, chi0).values

    xi = grid.xi_nodes
    y_nodes = grid.x_nodes
    cell_phase = np.exp(-1j * np.outer(cell, xi))
    y_phase = np.exp(-1j * np.outer(y_nodes, xi))
    d1, d2, d3 = np.meshgrid(cell, cell, cell, indexing="ij")
    cut = windows.cutoff(np.stack([d1, d2, d3], axis=-1))
    chi_sq = windows.chi ** 2
    shifted = (np.arange(n)[:, None] + offsets[None, :]) % n
    o1 = np.arange(width)[None, None, :, None, None]
    rows_y = shifted[:, None, None, :, None]
    rows_z = shifted[None, :, None, None, :]
    y, z = np.meshgrid(y_nodes, xi, indexing="ij")

    total = 0j
    for j in range(n):
        x = np.full_like(y, grid.x_nodes[j])
        grad_x, grad_y, grad_z = phase.grad(x, y, z)
        base = [c[..., None, None, None] for c in (x, y, z)]
        linear = (grad_x[..., None, None, None] * d1 + grad_y[..., None, None, None] * d2
                  + grad_z[..., None, None, None] * d3)
        psi2 = cut * _remainder(phase, base, (d1, d2, d3), nodes, weights)
        local = a.values[shifted[j]][o1, rows_y, rows_z]
        cell_sum = np.sum(chi_sq * local * np.exp(1j * (linear + psi2)), axis=-1)
        collapsed = np.sum(np.exp(1j * phase.value(x, y, z))[..., None, None] * cell_sum, axis=1)
        h_table = (h / n) * np.einsum('yab,ap,bq->ypq', collapsed, cell_phase, cell_phase)
        partial = np.einsum('ypq,yq->p', h_table, vf_reflected * y_phase)
        total += np.sum(partial * np.conj(vg[j]) * np.exp(-1j * grid.x_nodes[j] * xi))
    return complex(windows.normalization() * h ** 5 * total)


@dataclass
class HessianReport:
    which: str
    min_abs_det: float
    d: float
    passed: bool

    def to_dict(self):
        return {"which": self.which, "min_abs_det": self.min_abs_det, "d": self.d, "pass": self.passed}


def _points(nodes):
    if isinstance(nodes, PhaseSpaceGrid):
        return [m.ravel() for m in node_mesh(nodes)]
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 3:
        raise ValidationError("Hessian nodes must be a grid or an (M, 3) array")
    return list(nodes.T)


def hessian_block(hess, which):
    if which == "full":
        return hess[..., 0, 1] * hess[..., 2, 2] - hess[..., 0, 2] * hess[..., 1, 2]
    if which == "x_zeta":
        return hess[..., 0, 2]
    if which == "y_zeta":
        return hess[..., 1, 2]
    if which == "zeta_zeta":
        return hess[..., 2, 2]
    raise ConfigurationError(f"Unknown Hessian block {which!r}; expected one of {HESSIAN_BLOCKS}")


def hessian_condition(phase: PhaseFn, which, nodes, d=None) -> HessianReport:
    """min |det| of the requested Hessian block over the nodes; pass iff >= d."""
    if which not in HESSIAN_BLOCKS:
        raise ConfigurationError(f"Unknown Hessian block {which!r}; expected one of {HESSIAN_BLOCKS}")
    d = Config.HESSIAN_MIN_DET if d is None else float(d)
    hess = phase.hess(*_points(nodes))
    min_abs = float(np.min(np.abs(hessian_block(hess, which))))
    return HessianReport(which, min_abs, d, min_abs >= d)


def hessian_deviation(phase: PhaseFn, nodes) -> float:
    """max |phi''(X) - phi''(0)| over the nodes."""
    hess = phase.hess(*_points(nodes))
    origin = phase.hess(0.0, 0.0, 0.0)
    return float(np.max(np.abs(hess - origin)))


@dataclass(frozen=True)
class AmplitudeSpec:
    """Analytic amplitude exp(-((x-x0)^2 + (y-y0)^2) / (4 w^2) - (zeta-z0)^2 / (2 s^2) + i k x).

    Samples agree on every grid, so amplitude norms can be computed on a
    coarse grid and reused at any N.
    """
    width: float = 1.0
    spread: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)
    modulation: float = 0.0
    scale: complex = 1.0

    def evaluate(self, x, y, z):
        x0, y0, z0 = self.center
        envelope = np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / (4 * self.width ** 2)
                          - (z - z0) ** 2 / (2 * self.spread ** 2))
        return self.scale * envelope * np.exp(1j * self.modulation * x)

    def sample(self, grid: PhaseSpaceGrid) -> Amplitude3D:
        return Amplitude3D(self.evaluate(*node_mesh(grid)), grid)

    def scaled(self, factor):
        return AmplitudeSpec(self.width, self.spread, self.center, self.modulation, self.scale * factor)

    def to_dict(self):
        return {
            "width": self.width,
            "spread": self.spread,
            "center": list(self.center),
            "modulation": self.modulation,
            "scale": [float(np.real(self.scale)), float(np.imag(self.scale))],
        }


def amplitude_norms(a: Amplitude3D, omega: Weight = None, chi: Window = None):
    """Mixed sup/integral norms of the 6-D STFT of an amplitude.

    ``case1`` integrates the z dual, ``case2`` the xi dual and ``case3`` the
    eta dual, taking the sup over everything else; ``m_inf_1`` is the
    sup over X followed by the integral over all duals.
    """
    grid = a.grid
    h = grid.spacing
    if omega is not None and omega.arity != 6:
        raise ValidationError("Amplitude weights have arity 6")
    chi = chi or gaussian_window(grid)
    y = grid.x_nodes[:, None, None, None, None]
    zeta = grid.xi_nodes[None, :, None, None, None]
    xi = grid.xi_nodes[None, None, :, None, None]
    eta = grid.xi_nodes[None, None, None, :, None]
    zz = grid.x_nodes[None, None, None, None, :]
    norms = {"case1": 0.0, "case2": 0.0, "case3": 0.0}
    running = np.zeros((grid.n_points,) * 3)
    for j, block in stft_3d_blocks(a.values, chi):
        magnitude = np.abs(block)
        if omega is not None and not omega.is_constant:
            magnitude = magnitude * omega(grid.x_nodes[j], y, zeta, xi, eta, zz)
        norms["case1"] = max(norms["case1"], h * float(np.max(np.sum(magnitude, axis=4))))
        norms["case2"] = max(norms["case2"], h * float(np.max(np.sum(magnitude, axis=2))))
        norms["case3"] = max(norms["case3"], h * float(np.max(np.sum(magnitude, axis=3))))
        np.maximum(running, np.max(magnitude, axis=(0, 1)), out=running)
    norms["m_inf_1"] = h ** 3 * float(np.sum(running))
    return norms
