"""
Exceptional-point experiments: parameter sweeps of t-profiles,
singularity detection, and the renormalized-determinant detector.

For the bump family q = lambda * w the scattering profile along the
positive real k axis is enough (radial real potentials have radial real
transforms).  Exceptional circles show up as sign jumps through large
magnitudes, as contiguous non-convergence blocks, and as zero crossings
of det2(I - T_k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MatrixTooLarge
from .parallel import parallel_map
from .scatter import (
    Potential,
    dn_map,
    scattering_t,
    scattering_t_dn,
    solve_cgo_ls,
)
from .special import g1, singular_cell_value

DN_K_CUTOFF = 0.5
JUMP_FACTOR = 20.0
DET2_MAX_CELLS = 6000


@dataclass
class ScanResult:
    """t-profiles over a (lambda, |k|) table with singularity annotations."""

    lambdas: list[float]
    k_samples: list[float]
    t_profiles: np.ndarray  # complex, shape (n_lambda, n_k)
    flags: np.ndarray  # str, shape (n_lambda, n_k)
    singular_radii: list[list[float]] = field(default_factory=list)
    det2_values: np.ndarray | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScanResult):
            return NotImplemented
        same_det = (self.det2_values is None) == (other.det2_values is None)
        if same_det and self.det2_values is not None:
            same_det = bool(
                np.allclose(self.det2_values, other.det2_values, equal_nan=True)
            )
        return (
            self.lambdas == other.lambdas
            and self.k_samples == other.k_samples
            and bool(np.allclose(self.t_profiles, other.t_profiles, equal_nan=True))
            and bool((self.flags == other.flags).all())
            and self.singular_radii == other.singular_radii
            and same_det
        )


def detect_singularities(
    t_profile: np.ndarray,
    flags: Sequence[str],
    k_samples: Sequence[float],
    jump_factor: float = JUMP_FACTOR,
) -> list[float]:
    """
    Radii of singular behavior in a profile on a uniform k grid.

    Fires on (a) adjacent samples of opposite sign both exceeding
    ``jump_factor`` times the median magnitude, and (b) contiguous
    non-convergence blocks (midpoint reported).
    """
    k = np.asarray(k_samples, dtype=float)
    vals = np.asarray(t_profile)
    okm = np.array([f == "ok" for f in flags], dtype=bool)
    radii: list[float] = []
    finite = okm & np.isfinite(vals.real)
    if finite.any():
        med = float(np.median(np.abs(vals[finite])))
        thr = jump_factor * max(med, 1e-300)
        re = vals.real
        for i in range(len(k) - 1):
            if not (finite[i] and finite[i + 1]):
                continue
            if (
                abs(re[i]) > thr
                and abs(re[i + 1]) > thr
                and np.sign(re[i]) != np.sign(re[i + 1])
            ):
                radii.append(float(0.5 * (k[i] + k[i + 1])))
    # contiguous no_converge blocks
    bad = np.array([f == "no_converge" for f in flags], dtype=bool)
    i = 0
    while i < len(bad):
        if bad[i]:
            j = i
            while j + 1 < len(bad) and bad[j + 1]:
                j += 1
            radii.append(float(0.5 * (k[i] + k[j])))
            i = j + 1
        else:
            i += 1
    return sorted(radii)


def _t_at(q: Potential, k: float, dn_modes: int, dn=None):
    """One scattering value with the route chosen by |k|."""
    if abs(k) < DN_K_CUTOFF:
        try:
            handle = dn if dn is not None else dn_map(q, boundary_modes=dn_modes)
            return complex(scattering_t_dn(handle, complex(k))), "ok", 0
        except Exception:
            return np.nan + 0j, "no_converge", 0
    sol = solve_cgo_ls(q, complex(k))
    if not sol.converged:
        return np.nan + 0j, "no_converge", sol.iterations
    return complex(scattering_t(q, sol)), "ok", sol.iterations


def lambda_sweep(
    make_potential,
    lambdas: Sequence[float],
    k_samples: Sequence[float],
    dn_modes: int = 16,
    with_det2: bool = False,
    threads: int | None = None,
) -> ScanResult:
    """
    Sweep t(k) across a potential family.

    ``make_potential(lam)`` must return the family member.  Failures are
    recorded per cell; the DN route serves |k| below 0.5 and the LS
    route the rest.
    """
    lambdas = [float(v) for v in lambdas]
    k_samples = [float(v) for v in k_samples]
    nl, nk = len(lambdas), len(k_samples)
    t_prof = np.zeros((nl, nk), dtype=complex)
    flags = np.empty((nl, nk), dtype=object)
    det_vals = np.full((nl, nk), np.nan) if with_det2 else None

    for il, lam in enumerate(lambdas):
        q = make_potential(lam)
        dn = dn_map(q, boundary_modes=dn_modes) if min(map(abs, k_samples)) < DN_K_CUTOFF else None

        def one(k: float):
            t, fl, _ = _t_at(q, k, dn_modes, dn)
            d = det2(q, complex(k)).value if with_det2 else np.nan
            return t, fl, d

        rows = parallel_map(one, k_samples, threads=threads)
        for ik, (t, fl, dv) in enumerate(rows):
            t_prof[il, ik] = t
            flags[il, ik] = fl
            if with_det2:
                det_vals[il, ik] = dv

    radii = [
        detect_singularities(t_prof[il], flags[il], k_samples) for il in range(nl)
    ]
    return ScanResult(
        lambdas=lambdas,
        k_samples=k_samples,
        t_profiles=t_prof,
        flags=flags,
        singular_radii=radii,
        det2_values=det_vals,
    )


@dataclass(frozen=True)
class Det2Result:
    """Renormalized determinant value with overflow-safe pieces."""

    log_abs: float
    phase: float
    imag_fraction: float

    @property
    def value(self) -> float:
        if self.log_abs > 700.0:
            return math.inf * math.copysign(1.0, math.cos(self.phase))
        return math.exp(self.log_abs) * math.cos(self.phase)


def det2(q: Potential, k: complex, max_cells: int = DET2_MAX_CELLS) -> Det2Result:
    """
    det2(I - T_k) = det(I - T_k) exp(tr T_k) with T_k = (1/4) g_k * (q .).

    The operator is discretized densely on the support cells only (the
    nonzero spectrum of an operator ending in multiplication by q lives
    there).  Real for real decaying q up to discretization, reported in
    ``imag_fraction``.
    """
    grid = q.q.grid
    z = grid.points_complex()
    qs = q.q.samples.real
    support = np.abs(qs) > 0
    idx = np.nonzero(support.ravel())[0]
    if idx.size > max_cells:
        raise MatrixTooLarge(f"{idx.size} support cells exceed the cap {max_cells}")
    if idx.size == 0:
        return Det2Result(0.0, 0.0, 0.0)
    h = grid.spacing
    n = grid.n
    # g table over the difference lattice, vectorized evaluation
    ax = h * (np.arange(2 * n - 1) - (n - 1))
    dz = ax[None, :] + 1j * ax[:, None]
    gtab = np.empty_like(dz, dtype=complex)
    ctr = dz == 0
    gtab[~ctr] = g1(complex(k) * dz[~ctr])
    gtab[ctr] = singular_cell_value(complex(k), h)
    iy, ix = np.divmod(idx, n)
    dyi = iy[:, None] - iy[None, :] + (n - 1)
    dxi = ix[:, None] - ix[None, :] + (n - 1)
    kernel = gtab[dyi, dxi]
    kmat = 0.25 * h * h * kernel * qs.ravel()[idx][None, :]
    trace = complex(np.trace(kmat))
    sign, logdet = np.linalg.slogdet(np.eye(idx.size, dtype=complex) - kmat)
    log_abs = float(logdet + trace.real)
    phase = float(np.angle(sign) + trace.imag)
    return Det2Result(log_abs=log_abs, phase=phase, imag_fraction=abs(math.sin(phase)))


def det2_sign_changes(
    q: Potential, k_values: Sequence[float], max_cells: int = DET2_MAX_CELLS
) -> list[float]:
    """Radii (midpoints) where det2 changes sign along real k."""
    vals = [det2(q, complex(k), max_cells) for k in k_values]
    signs = [math.copysign(1.0, math.cos(v.phase)) for v in vals]
    out = []
    for i in range(len(signs) - 1):
        if signs[i] != signs[i + 1]:
            out.append(0.5 * (k_values[i] + k_values[i + 1]))
    return out
