"""
Short-time Fourier transform on the periodic grid.

V_chi f(x_j, xi_k) = F(f * conj(tau_{x_j} chi))(xi_k), where tau is the cyclic
shift. Rows are computed in one vectorised FFT; ``stft_direct`` keeps the
defining double sum as an oracle.
"""

from dataclasses import dataclass

import numpy as np

from tfoc.core.errors import ValidationError
from tfoc.models import PhaseSpaceGrid, Signal, TFArray, check_same_grid
from tfoc.services.grid import l2_norm, unitary_fft, unitary_ifft


@dataclass(frozen=True, eq=False)
class Window:
    signal: Signal
    l2_norm: float

    def __post_init__(self):
        actual = l2_norm(self.signal)
        if not actual > 0:
            raise ValidationError("Window must be nonzero")
        if abs(actual - self.l2_norm) > 1e-12 * max(1.0, actual):
            raise ValidationError(
                f"Window l2_norm {self.l2_norm!r} does not match computed norm {actual!r}")

    @classmethod
    def from_signal(cls, signal: Signal):
        return cls(signal, l2_norm(signal))

    @property
    def grid(self):
        return self.signal.grid

    @property
    def values(self):
        return self.signal.values


@dataclass(frozen=True, eq=False)
class Window2D:
    """Window on the 2-D grid (x1, x2); tensor products or general tables."""
    values: np.ndarray
    grid: PhaseSpaceGrid
    l2_norm: float

    def __post_init__(self):
        n = self.grid.n_points
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (n, n):
            raise ValidationError(f"Window2D must have shape {(n, n)}, got {values.shape}")
        actual = self.grid.spacing * float(np.linalg.norm(values))
        if not actual > 0:
            raise ValidationError("Window must be nonzero")
        if abs(actual - self.l2_norm) > 1e-12 * max(1.0, actual):
            raise ValidationError("Window2D l2_norm does not match computed norm")
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_values(cls, values, grid):
        return cls(values, grid, grid.spacing * float(np.linalg.norm(values)))


def _periodized_gaussian(grid, width, center, images=2):
    x = grid.x_nodes
    total = np.zeros_like(x)
    for k in range(-images, images + 1):
        total += np.exp(-((x - center + k * grid.length) ** 2) / (2.0 * width ** 2))
    return total


def gaussian_window(grid: PhaseSpaceGrid, width=1.0, center=0.0, normalize=True) -> Window:
    """Periodized Gaussian exp(-(x-c)^2 / (2 w^2)), L2-normalised by default."""
    values = _periodized_gaussian(grid, width, center).astype(complex)
    if normalize:
        values = values / (np.sqrt(grid.spacing) * np.linalg.norm(values))
    return Window.from_signal(Signal(values, grid))


def gaussian_window_2d(grid: PhaseSpaceGrid, width=1.0, normalize=True) -> Window2D:
    """Tensor Gaussian chi (x) chi."""
    chi = gaussian_window(grid, width=width, normalize=normalize).values
    return Window2D.from_values(np.outer(chi, chi), grid)


def shift_table(grid: PhaseSpaceGrid):
    """Index table idx[j, m] = (m - s_j) mod N, so chi[idx][j] = tau_{x_j} chi."""
    n = grid.n_points
    return (np.arange(n)[None, :] - grid.indices[:, None]) % n


def _check_window(chi):
    if not np.any(chi.values):
        raise ValidationError("Window must be nonzero")


def stft(f: Signal, chi: Window) -> TFArray:
    check_same_grid(f, chi.signal)
    _check_window(chi)
    shifted = chi.values[shift_table(f.grid)]
    return TFArray(unitary_fft(f.values[None, :] * np.conj(shifted), axes=1), f.grid)


def stft_direct(f: Signal, chi: Window) -> TFArray:
    """Brute-force double sum without FFT."""
    check_same_grid(f, chi.signal)
    _check_window(chi)
    grid = f.grid
    shifted = chi.values[shift_table(grid)]
    kernel = np.exp(-1j * np.outer(grid.x_nodes, grid.xi_nodes))
    values = (f.values[None, :] * np.conj(shifted)) @ kernel / np.sqrt(grid.n_points)
    return TFArray(values, grid)


def stft_adjoint(F: TFArray, chi: Window) -> Signal:
    """h * sum_j F^{-1}(row_j) * tau_{x_j} chi; stft_adjoint(stft(f)) = ||chi||^2 f."""
    check_same_grid(F, chi.signal)
    _check_window(chi)
    grid = F.grid
    rows = unitary_ifft(F.values, axes=1)
    shifted = chi.values[shift_table(grid)]
    return Signal(grid.spacing * np.sum(rows * shifted, axis=0), grid)


def modulate_translate(f: Signal, x0, xi0) -> Signal:
    """exp(i <., xi0>) f(. - x0) for node offsets x0, xi0."""
    grid = f.grid
    k_x = grid.node_index(x0)
    k_xi = grid.node_index(xi0)
    phase = np.exp(2j * np.pi * grid.indices * k_xi / grid.n_points)
    return f.with_values(phase * np.roll(f.values, k_x))


def stft_2d_blocks(values, window: Window2D):
    """Yield (j1, block) with block[x2, xi1, xi2] = V a(x1_j1, x2, xi1, xi2).

    ``values`` is an N x N table a(y1, y2). Memory stays O(N^3).
    """
    grid = window.grid
    n = grid.n_points
    values = np.asarray(values, dtype=complex)
    if values.shape != (n, n):
        raise ValidationError(f"2-D input must have shape {(n, n)}, got {values.shape}")
    table = shift_table(grid)
    conj_w = np.conj(window.values)
    for j1 in range(n):
        shifted = conj_w[table[j1][None, :, None], table[:, None, :]]
        yield j1, unitary_fft(values[None, :, :] * shifted, axes=(1, 2))


def stft_3d_blocks(values, chi: Window):
    """Yield (j, block) with block[l, k, xi, eta, z] = V a(x_j, y_l, zeta_k, xi, eta, z).

    The window is the tensor cube chi (x) chi (x) chi. Intended for coarse grids:
    each block holds N^5 entries.
    """
    grid = chi.grid
    n = grid.n_points
    values = np.asarray(values, dtype=complex)
    if values.shape != (n, n, n):
        raise ValidationError(f"3-D input must have shape {(n, n, n)}, got {values.shape}")
    conj_shifts = np.conj(chi.values[shift_table(grid)])
    w_y = conj_shifts[:, None, None, :, None]
    w_z = conj_shifts[None, :, None, None, :]
    for j in range(n):
        localized = values * conj_shifts[j][:, None, None]
        yield j, unitary_fft(localized[None, None] * w_y * w_z, axes=(2, 3, 4))
