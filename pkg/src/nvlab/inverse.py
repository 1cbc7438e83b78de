"""
Inverse scattering transform: the k-plane dbar problem and the two
reconstruction routes.

For each spatial point z the normalized solution mu(z, .) satisfies the
real-linear equation dbar_k mu = tsharp e_{-k}(z) conj(mu), solved here
in integral form with the k-plane Cauchy transform and a restarted
Krylov iteration on the doubled real system.  The potential follows
either from the dbar_z derivative of the scattering integral or, for
conductivity-type data, from mu(z, 0)^2 = sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
import scipy.sparse.linalg as spla

from .calderon import _padded_apply, _padded_symbols
from .errors import NotConductivityType, NotConverged
from .grid import Field2D, PeriodicGrid
from .parallel import parallel_map

KRYLOV_RESTART = 30
KRYLOV_TOL = 1e-8
KRYLOV_MAXITER = 300
DEFAULT_KGRID_N = 256


# ----------------------------------------------------------------------
# Scattering data carrier
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class TSharpField:
    """t(k)/(4 pi conj(k)) sampled on a k-plane grid, truncated at R."""

    k_grid: PeriodicGrid
    values: np.ndarray
    truncation_radius: float

    def __post_init__(self) -> None:
        if self.values.shape != (self.k_grid.n, self.k_grid.n):
            raise ValueError("values shape does not match the k grid")

    @classmethod
    def from_profile(
        cls,
        k_abs: np.ndarray,
        t_values: np.ndarray,
        radius: float | None = None,
        n: int = DEFAULT_KGRID_N,
    ) -> "TSharpField":
        """
        Radial t(|k|) profile interpolated over a symmetric k grid.

        The profile is extended through the origin with t(0) = 0 and
        truncated at ``radius`` (default: where |tsharp| falls below
        1e-6 of its max).
        """
        k_abs = np.asarray(k_abs, dtype=float)
        t_values = np.asarray(t_values, dtype=complex)
        order = np.argsort(k_abs)
        k_abs, t_values = k_abs[order], t_values[order]
        if k_abs[0] > 0:
            k_abs = np.concatenate([[0.0], k_abs])
            t_values = np.concatenate([[0.0], t_values])
        if radius is None:
            with np.errstate(divide="ignore"):
                tsharp_prof = np.abs(t_values) / np.maximum(4.0 * np.pi * k_abs, 1e-300)
            tsharp_prof[k_abs == 0] = 0.0
            peak = tsharp_prof.max()
            below = np.nonzero(tsharp_prof > 1e-6 * peak)[0]
            radius = float(k_abs[below[-1]]) if below.size else float(k_abs[-1])
        grid = cls._default_grid(radius, n)
        kk = grid.points_complex()
        r = np.abs(kk)
        t_interp = np.interp(r, k_abs, t_values.real, right=0.0) + 1j * np.interp(
            r, k_abs, t_values.imag, right=0.0
        )
        vals = np.zeros_like(kk)
        mask = (r > 0) & (r <= radius)
        vals[mask] = t_interp[mask] / (4.0 * np.pi * np.conj(kk[mask]))
        return cls(grid, vals, radius)

    @classmethod
    def from_t_field(cls, t_field: Field2D, radius: float | None = None) -> "TSharpField":
        """Full 2-D t(k) samples; the field grid becomes the k grid."""
        kk = t_field.grid.points_complex()
        r = np.abs(kk)
        tsharp = np.zeros_like(t_field.samples)
        nz = r > 0
        tsharp[nz] = t_field.samples[nz] / (4.0 * np.pi * np.conj(kk[nz]))
        if radius is None:
            peak = np.abs(tsharp).max()
            radius = float(r[np.abs(tsharp) > 1e-6 * peak].max()) if peak > 0 else 1.0
        tsharp[r > radius] = 0.0
        return cls(t_field.grid, tsharp, radius)

    @staticmethod
    def _default_grid(radius: float, n: int = DEFAULT_KGRID_N) -> PeriodicGrid:
        return PeriodicGrid(radius + 1.0, n)


def evolve_scattering(tsharp: TSharpField, tau: float) -> TSharpField:
    """Multiply by the unimodular flow phase exp(i tau (k^3 + conj(k)^3))."""
    kk = tsharp.k_grid.points_complex()
    phase = np.exp(2j * tau * np.real(kk**3))
    return TSharpField(tsharp.k_grid, tsharp.values * phase, tsharp.truncation_radius)


# ----------------------------------------------------------------------
# The dbar solve in k
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DbarSolution:
    """mu(z, .) on the k grid for one spatial point z."""

    z: complex
    mu: np.ndarray
    converged: bool
    iterations: int
    residual: float


def _rhs_weight(tsharp: TSharpField, z: complex, tau: float) -> np.ndarray:
    """w(k) = tsharp(k) e_{-k}(z) exp(i tau (k^3 + conj(k)^3))."""
    kk = tsharp.k_grid.points_complex()
    phase = np.exp(-2j * np.real(kk * z))
    if tau != 0.0:
        phase = phase * np.exp(2j * tau * np.real(kk**3))
    return tsharp.values * phase


def solve_dbar_k(
    tsharp: TSharpField, z: complex, tau: float = 0.0, tol: float = KRYLOV_TOL
) -> DbarSolution:
    """
    Solve mu = 1 + P[w conj(mu)] on the k grid.

    The conjugation makes the equation real-linear, so the Krylov
    iteration runs on the stacked (Re, Im) system.  Non-convergence is
    reported in the flag.
    """
    grid = tsharp.k_grid
    n = grid.n
    w = _rhs_weight(tsharp, z, tau)
    cauchy, _ = _padded_symbols(n, grid.half_side)

    def cauchy_apply(g: np.ndarray) -> np.ndarray:
        return _padded_apply(Field2D(grid, g), cauchy).samples

    def matvec(x: np.ndarray) -> np.ndarray:
        nu = x[: n * n].reshape(n, n) + 1j * x[n * n :].reshape(n, n)
        out = nu - cauchy_apply(w * np.conj(nu))
        return np.concatenate([out.real.ravel(), out.imag.ravel()])

    rhs_c = cauchy_apply(w)
    b = np.concatenate([rhs_c.real.ravel(), rhs_c.imag.ravel()])
    count = [0]
    lin = spla.LinearOperator((2 * n * n, 2 * n * n), matvec=matvec, dtype=np.float64)
    x, info = spla.gmres(
        lin,
        b,
        rtol=tol,
        atol=0.0,
        restart=KRYLOV_RESTART,
        maxiter=max(1, KRYLOV_MAXITER // KRYLOV_RESTART),
        callback=lambda _: count.__setitem__(0, count[0] + 1),
        callback_type="pr_norm",
    )
    nu = x[: n * n].reshape(n, n) + 1j * x[n * n :].reshape(n, n)
    res = float(np.linalg.norm(matvec(x) - b) / max(np.linalg.norm(b), 1e-300))
    return DbarSolution(
        z=complex(z), mu=1.0 + nu, converged=info == 0, iterations=count[0], residual=res
    )


def dbar_residual_at(
    tsharp: TSharpField,
    sol: DbarSolution,
    tau: float,
    k_samples: np.ndarray,
) -> float:
    """
    Max defect of the integral form at off-grid collocation points.

    Direct quadrature of the Cauchy integral, independent of the FFT
    path used by the solver.
    """
    grid = tsharp.k_grid
    kk = grid.points_complex()
    w = _rhs_weight(tsharp, sol.z, tau)
    g = w * np.conj(sol.mu)
    h = grid.spacing
    worst = 0.0
    mu_interp = sol.mu
    for k0 in np.asarray(k_samples):
        dist = np.abs(k0 - kk)
        kernel = np.zeros_like(kk)
        far = dist > 0.5 * h
        kernel[far] = 1.0 / (np.pi * (k0 - kk[far]))
        integral = h * h * np.sum(kernel * g)
        # compare against bilinear interp of mu at k0
        fx = (k0.real + grid.half_side) / h
        fy = (k0.imag + grid.half_side) / h
        ix, iy = int(fx), int(fy)
        tx, ty = fx - ix, fy - iy
        mu0 = (
            mu_interp[iy, ix] * (1 - tx) * (1 - ty)
            + mu_interp[iy, ix + 1] * tx * (1 - ty)
            + mu_interp[iy + 1, ix] * (1 - tx) * ty
            + mu_interp[iy + 1, ix + 1] * tx * ty
        )
        worst = max(worst, abs(mu0 - 1.0 - integral))
    return worst


# ----------------------------------------------------------------------
# Reconstruction
# ----------------------------------------------------------------------


@dataclass
class ReconstructionResult:
    """Potential on a z lattice with the mu(z, 0) trace."""

    z_grid: PeriodicGrid
    q: Field2D
    mu0: Field2D
    method: str
    ok: np.ndarray  # per-lattice-point validity flags

    def interior_mask(self) -> np.ndarray:
        m = np.zeros((self.z_grid.n, self.z_grid.n), dtype=bool)
        m[1:-1, 1:-1] = True
        return m & self.ok


def _k_zero_index(grid: PeriodicGrid) -> tuple[int, int]:
    return grid.n // 2, grid.n // 2


def _scatter_integrals(
    tsharp: TSharpField, z_grid: PeriodicGrid, tau: float, tol: float, threads=None
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-z dbar solves; returns (integral I(z), mu0(z), ok, iterations)."""
    kgrid = tsharp.k_grid
    hk = kgrid.spacing
    i0, j0 = _k_zero_index(kgrid)
    zs = z_grid.points_complex().ravel()

    def one(z: complex):
        sol = solve_dbar_k(tsharp, complex(z), tau, tol)
        w = _rhs_weight(tsharp, complex(z), tau)
        integral = hk * hk * np.sum(w * np.conj(sol.mu))
        return integral, sol.mu[j0, i0], sol.converged, sol.iterations

    rows = parallel_map(one, list(zs), threads=threads)
    n = z_grid.n
    eye = np.array([r[0] for r in rows], dtype=complex).reshape(n, n)
    mu0 = np.array([r[1] for r in rows], dtype=complex).reshape(n, n)
    ok = np.array([r[2] for r in rows], dtype=bool).reshape(n, n)
    iters = np.array([r[3] for r in rows], dtype=int).reshape(n, n)
    return eye, mu0, ok, iters


def _lattice_dbar(values: np.ndarray, h: float) -> np.ndarray:
    """(d/dx + i d/dy)/2 by centered differences, one-sided at edges."""
    ddx = np.gradient(values, h, axis=1)
    ddy = np.gradient(values, h, axis=0)
    return 0.5 * (ddx + 1j * ddy)


def reconstruct_q(
    tsharp: TSharpField,
    z_grid: PeriodicGrid,
    tau: float = 0.0,
    tol: float = KRYLOV_TOL,
    threads: int | None = None,
) -> ReconstructionResult:
    """
    q(z, tau) = (4i/pi) dbar_z of the scattering integral.

    One dbar solve per lattice point (a parallel map); failed points
    leave holes flagged in the result.
    """
    eye, mu0, ok, _ = _scatter_integrals(tsharp, z_grid, tau, tol, threads)
    qv = (4j / np.pi) * _lattice_dbar(eye, z_grid.spacing)
    qv[~ok] = np.nan
    return ReconstructionResult(
        z_grid=z_grid,
        q=Field2D(z_grid, np.where(ok, qv, 0.0)),
        mu0=Field2D(z_grid, mu0),
        method="q_formula",
        ok=ok,
    )


def reconstruct_conductivity(
    tsharp: TSharpField,
    z_grid: PeriodicGrid,
    tau: float = 0.0,
    tol: float = KRYLOV_TOL,
    threads: int | None = None,
    reality_tol: float = 0.01,
) -> ReconstructionResult:
    """
    Conductivity route: sqrt(sigma)(z) = mu(z, 0), q = Lap(mu0)/mu0.

    Raises NotConductivityType unless mu(z, 0) is real within
    ``reality_tol`` and positive on the converged lattice points.
    """
    _, mu0, ok, _ = _scatter_integrals(tsharp, z_grid, tau, tol, threads)
    good = mu0[ok]
    if good.size == 0:
        raise NotConverged("no lattice point converged")
    if np.max(np.abs(good.imag)) > reality_tol * np.max(np.abs(good.real)):
        raise NotConductivityType(
            f"mu(z,0) imaginary fraction "
            f"{np.max(np.abs(good.imag)) / np.max(np.abs(good.real)):.3e}"
        )
    if np.min(good.real) <= 0:
        raise NotConductivityType(f"mu(z,0) min = {np.min(good.real):.3e} not positive")
    root = mu0.real
    h = z_grid.spacing
    lap = np.full_like(root, np.nan)
    lap[1:-1, 1:-1] = (
        root[1:-1, 2:] + root[1:-1, :-2] + root[2:, 1:-1] + root[:-2, 1:-1]
        - 4.0 * root[1:-1, 1:-1]
    ) / (h * h)
    qv = np.zeros_like(root)
    interior = np.isfinite(lap)
    qv[interior] = lap[interior] / root[interior]
    ok2 = ok & interior
    return ReconstructionResult(
        z_grid=z_grid,
        q=Field2D(z_grid, qv.astype(np.complex128)),
        mu0=Field2D(z_grid, mu0),
        method="conductivity",
        ok=ok2,
    )
