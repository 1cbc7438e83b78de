"""
Periodic square grid and FFT-based spectral calculus.

All fields in this package live on ``PeriodicGrid``: the square
``[-L, L]^2`` sampled at ``n`` points per axis with periodic boundary
conditions.  Physical frequencies are integer multiples of ``pi / L``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft


class NonFiniteSymbol(ValueError):
    """A spectral symbol evaluated to NaN/inf at a nonzero frequency."""


_REAL_TAG_TOL = 1e-12


@dataclass(frozen=True)
class PeriodicGrid:
    """
    Square periodic grid on ``[-L, L]^2``.

    Parameters
    ----------
    half_side : float
        Half the box side ``L``; the domain is ``[-L, L]^2``.
    n : int
        Samples per axis.  Must be a power of two, ``n >= 8``.
    """

    half_side: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError("n must be a power of two with n >= 8")
        if not self.half_side > 0:
            raise ValueError("half_side must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_side / self.n

    def axis(self) -> np.ndarray:
        """Sample coordinates along one axis: -L + j*h, j = 0..n-1."""
        return -self.half_side + self.spacing * np.arange(self.n)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) coordinate arrays, indexed ``[j_y, j_x]``."""
        ax = self.axis()
        return np.meshgrid(ax, ax, indexing="xy")

    def points_complex(self) -> np.ndarray:
        """Grid points as complex numbers z = x + iy."""
        x, y = self.meshgrid()
        return x + 1j * y

    def frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        """(xi, eta) frequency arrays in FFT layout; xi = pi*m/L."""
        k1 = 2.0 * np.pi * sfft.fftfreq(self.n, d=self.spacing)
        xi, eta = np.meshgrid(k1, k1, indexing="xy")
        return xi, eta

    def nyquist_mask(self) -> np.ndarray:
        """True off the Nyquist row/column (the m = -n/2 modes)."""
        m = sfft.fftfreq(self.n, d=1.0 / self.n)
        keep = m != -(self.n // 2)
        mx, my = np.meshgrid(keep, keep, indexing="xy")
        return mx & my

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PeriodicGrid)
            and self.n == other.n
            and self.half_side == other.half_side
        )

    def __hash__(self) -> int:
        return hash((self.half_side, self.n))


@dataclass(frozen=True)
class Field2D:
    """
    Complex-valued samples on a periodic grid.

    ``samples[j_y, j_x]`` is the value at ``(-L + j_x*h, -L + j_y*h)``.
    Fields are immutable values; all operations return new fields.
    """

    grid: PeriodicGrid
    samples: np.ndarray
    real_tagged: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.samples, dtype=np.complex128))
        if arr.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"samples must have shape {(self.grid.n, self.grid.n)}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if self.real_tagged:
            self.check_real()

    def check_real(self) -> None:
        """Enforce the realness invariant of a real-tagged field."""
        im = float(np.max(np.abs(self.samples.imag)))
        re = float(np.max(np.abs(self.samples.real)))
        if im > _REAL_TAG_TOL * max(re, 1e-300):
            raise ValueError(
                f"field tagged real has |Im|/|Re| = {im / max(re, 1e-300):.3e}"
            )

    @classmethod
    def from_function(
        cls, grid: PeriodicGrid, fn: Callable, real: bool = False
    ) -> "Field2D":
        """Sample ``fn(x, y)`` on the grid."""
        x, y = grid.meshgrid()
        vals = np.asarray(fn(x, y), dtype=np.complex128)
        vals = np.broadcast_to(vals, (grid.n, grid.n)).copy()
        return cls(grid, vals, real_tagged=real)

    @classmethod
    def zeros(cls, grid: PeriodicGrid, real: bool = False) -> "Field2D":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=np.complex128), real_tagged=real)

    def with_samples(self, samples: np.ndarray, real: bool = False) -> "Field2D":
        return Field2D(self.grid, samples, real_tagged=real)

    def fft(self) -> np.ndarray:
        return sfft.fft2(self.samples, workers=-1)

    def norm_l2(self) -> float:
        """Continuum L2 norm: sqrt(h^2 * sum |f|^2)."""
        h = self.grid.spacing
        return float(np.sqrt(h * h * np.sum(np.abs(self.samples) ** 2)))

    def norm_max(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def __add__(self, other: "Field2D") -> "Field2D":
        _require_same_grid(self, other)
        return Field2D(self.grid, self.samples + other.samples)

    def __sub__(self, other: "Field2D") -> "Field2D":
        _require_same_grid(self, other)
        return Field2D(self.grid, self.samples - other.samples)

    def __mul__(self, other) -> "Field2D":
        if isinstance(other, Field2D):
            _require_same_grid(self, other)
            return Field2D(self.grid, self.samples * other.samples)
        return Field2D(self.grid, self.samples * other)

    __rmul__ = __mul__


def _require_same_grid(a: Field2D, b: Field2D) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True)
class SpectralMultiplier:
    """
    Fourier multiplier: ``symbol(xi, eta)`` applied mode by mode.

    ``zero_mode_rule`` is the explicit value assigned at (0, 0), where
    many symbols of interest (derivatives, 1/|xi|^2 quotients) are
    singular or undefined.
    """

    symbol: Callable[[np.ndarray, np.ndarray], np.ndarray]
    zero_mode_rule: complex = 0.0

    def table(self, grid: PeriodicGrid) -> np.ndarray:
        """Symbol sampled on the grid frequencies, zero mode patched."""
        xi, eta = grid.frequencies()
        with np.errstate(divide="ignore", invalid="ignore"):
            sym = np.asarray(self.symbol(xi, eta), dtype=np.complex128)
        sym = np.broadcast_to(sym, xi.shape).copy()
        sym[0, 0] = self.zero_mode_rule
        if not np.all(np.isfinite(sym)):
            raise NonFiniteSymbol("symbol is not finite at a nonzero grid frequency")
        return sym


def apply_multiplier(f: Field2D, m: SpectralMultiplier) -> Field2D:
    """FFT, multiply by the symbol, inverse FFT."""
    sym = m.table(f.grid)
    out = sfft.ifft2(sym * f.fft(), workers=-1)
    return Field2D(f.grid, out)


def _apply_table(f: Field2D, table: np.ndarray) -> Field2D:
    return Field2D(f.grid, sfft.ifft2(table * f.fft(), workers=-1))


def _derivative_table(grid: PeriodicGrid, kind: str) -> np.ndarray:
    xi, eta = grid.frequencies()
    if kind == "d":
        # d = (d/dx - i d/dy)/2, symbol (i/2)(xi - i eta)
        sym = 0.5j * (xi - 1j * eta)
    elif kind == "dbar":
        sym = 0.5j * (xi + 1j * eta)
    elif kind == "dx":
        sym = 1j * xi
    elif kind == "dy":
        sym = 1j * eta
    else:
        raise ValueError(kind)
    # Odd symbols: kill the Nyquist modes so real fields stay real.
    return np.where(grid.nyquist_mask(), sym, 0.0)


def d(f: Field2D) -> Field2D:
    """Holomorphic derivative (d/dx - i d/dy)/2, spectrally."""
    return _apply_table(f, _derivative_table(f.grid, "d"))


def d_bar(f: Field2D) -> Field2D:
    """Antiholomorphic derivative (d/dx + i d/dy)/2, spectrally."""
    return _apply_table(f, _derivative_table(f.grid, "dbar"))


def dx(f: Field2D) -> Field2D:
    return _apply_table(f, _derivative_table(f.grid, "dx"))


def dy(f: Field2D) -> Field2D:
    return _apply_table(f, _derivative_table(f.grid, "dy"))


def laplacian(f: Field2D) -> Field2D:
    """Spectral Laplacian; symbol -(xi^2 + eta^2), even so no Nyquist fix."""
    xi, eta = f.grid.frequencies()
    return _apply_table(f, -(xi * xi + eta * eta))


def integrate(f: Field2D) -> complex:
    """Periodic trapezoid rule: h^2 times the sample sum."""
    h = f.grid.spacing
    return complex(h * h * np.sum(f.samples))


def inner(f: Field2D, g: Field2D) -> complex:
    """L2 inner product <f, g> = integral of f * conj(g)."""
    _require_same_grid(f, g)
    h = f.grid.spacing
    return complex(h * h * np.sum(f.samples * np.conj(g.samples)))
