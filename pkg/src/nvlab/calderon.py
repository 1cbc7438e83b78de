"""
Free-space Cauchy and Beurling transforms on compactly supported fields.

P inverts dbar; S = d o P maps dbar(phi) to d(phi) and realizes the
auxiliary field u = dbar^{-1} d q of the evolution nonlinearity.

Discretization: zero padding to a 2n x 2n grid kills periodic images,
and the 1/(pi z) kernel is truncated to the disc |z| <= 2L whose Fourier
transform is known in closed form (a Bessel-J0 expression).  Sampling
that transform on the padded grid makes the discrete convolution exact
for the truncated kernel, so accuracy is limited only by the smoothness
of f.  The truncation radius 2L is exact for sources within |z| <= L/2
evaluated anywhere on the original grid.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.special import j0

from .errors import SupportViolation
from .grid import Field2D, PeriodicGrid

_BOUNDARY_MASS_TOL = 1e-8


@lru_cache(maxsize=16)
def _padded_symbols(n: int, half_side: float) -> tuple[np.ndarray, np.ndarray]:
    """(cauchy, beurling) symbol tables on the 2n x 2n padded grid.

    The Cauchy symbol is the exact Fourier transform of the kernel
    1/(pi z) truncated to |z| <= 2L, which reproduces free-space
    convolution for sources inside |z| <= L/2.  The Beurling symbol is
    the exact unimodular quotient (xi - i eta)/(xi + i eta), i.e. the
    derivative of the inverse-dbar symbol, so S(dbar phi) = d(phi) and
    the L2 isometry hold at machine precision on the padded torus.
    """
    h = 2.0 * half_side / n
    trunc = 2.0 * half_side
    k1 = 2.0 * np.pi * sfft.fftfreq(2 * n, d=h)
    xi, eta = np.meshgrid(k1, k1, indexing="xy")
    zeta = xi + 1j * eta
    rho = np.abs(zeta)
    with np.errstate(divide="ignore", invalid="ignore"):
        cauchy = -2j * (1.0 - j0(rho * trunc)) / zeta
        beurling = (xi - 1j * eta) / zeta
    cauchy[0, 0] = 0.0
    beurling[0, 0] = 0.0
    # the Nyquist modes have no lattice mirror partner; zeroing them keeps
    # conjugation symmetries exact (same cure as for odd derivatives)
    cauchy *= _nyquist_mask(2 * n)
    return cauchy, beurling


@lru_cache(maxsize=16)
def _nyquist_mask(m: int) -> np.ndarray:
    modes = sfft.fftfreq(m, d=1.0 / m)
    keep = modes != -(m // 2)
    mx, my = np.meshgrid(keep, keep, indexing="xy")
    return (mx & my).astype(float)


def _check_support(f: Field2D) -> None:
    n = f.grid.n
    total = float(np.sum(np.abs(f.samples)))
    if total == 0.0:
        return
    frame = n // 8  # points with max(|x|,|y|) > 3L/4
    mask = np.zeros((n, n), dtype=bool)
    mask[:frame, :] = mask[-frame:, :] = True
    mask[:, :frame] = mask[:, -frame:] = True
    near = float(np.sum(np.abs(f.samples[mask])))
    if near > _BOUNDARY_MASS_TOL * total:
        raise SupportViolation(
            f"boundary-frame mass fraction {near / total:.3e} exceeds "
            f"{_BOUNDARY_MASS_TOL:.0e}; support must stay within |z| <= L/2"
        )


def _padded_apply(f: Field2D, symbol: np.ndarray) -> Field2D:
    n = f.grid.n
    padded = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    padded[:n, :n] = f.samples
    out = sfft.ifft2(symbol * sfft.fft2(padded, workers=-1), workers=-1)
    return Field2D(f.grid, out[:n, :n])


def cauchy_transform(f: Field2D) -> Field2D:
    """u = P f with dbar(u) = f in the interior and u = O(1/z) far out."""
    _check_support(f)
    cauchy, _ = _padded_symbols(f.grid.n, f.grid.half_side)
    return _padded_apply(f, cauchy)


@lru_cache(maxsize=16)
def _padded_conj_symbol(n: int, half_side: float) -> np.ndarray:
    h = 2.0 * half_side / n
    trunc = 2.0 * half_side
    k1 = 2.0 * np.pi * sfft.fftfreq(2 * n, d=h)
    xi, eta = np.meshgrid(k1, k1, indexing="xy")
    rho = np.hypot(xi, eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = -2j * (1.0 - j0(rho * trunc)) / (xi - 1j * eta)
    sym[0, 0] = 0.0
    sym *= _nyquist_mask(2 * n)
    return sym


def cauchy_transform_conj(f: Field2D) -> Field2D:
    """Conjugate transform Pbar with kernel 1/(pi conj(z))."""
    _check_support(f)
    return _padded_apply(f, _padded_conj_symbol(f.grid.n, f.grid.half_side))


def beurling_transform(f: Field2D) -> Field2D:
    """S f, computed as d(P f) on the padded grid; S(dbar phi) = d phi."""
    _check_support(f)
    _, beurling = _padded_symbols(f.grid.n, f.grid.half_side)
    return _padded_apply(f, beurling)


def aux_field_u(q: Field2D) -> Field2D:
    """
    The auxiliary field u = dbar^{-1} d q = S q of the NV nonlinearity.

    q must be real-tagged and compactly supported inside |z| <= L/2;
    the result decays like O(|z|^{-2}).
    """
    q.check_real()
    return beurling_transform(q)
