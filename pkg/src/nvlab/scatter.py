"""
Direct scattering transform for the zero-energy flow.

Two routes to the scattering data t(k):

* the LS route solves the potential-space integral equation for the
  normalized CGO solution mu with a periodized-kernel FFT convolution
  and a restarted Krylov iteration, then integrates t = int e_k q mu;
* the DN route builds the Dirichlet-to-Neumann matrix of the interior
  Schroedinger problem on a disc and solves a boundary integral
  equation for the CGO trace, which is preferred for k near zero.

Non-convergence of either route is recorded as data, never raised:
exceptional-point physics lives in those flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import calderon
from .errors import (
    DirichletEigenvalue,
    DomainZero,
    GridTooCoarse,
    GridTooSmall,
    NotConverged,
    SolverSingular,
)
from .grid import Field2D, PeriodicGrid, d, integrate
from .special import g1, singular_cell_value, small_k_shift

KRYLOV_RESTART = 30
KRYLOV_TOL = 1e-8
KRYLOV_MAXITER = 300
MIN_POINTS_PER_SUPPORT = 16


# ----------------------------------------------------------------------
# Domain types
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Potential:
    """Compactly supported real potential, carrier of one scattering run."""

    q: Field2D
    support_radius: float
    classification_hint: str = "unknown"

    def __post_init__(self) -> None:
        if self.classification_hint not in (
            "subcritical",
            "critical",
            "supercritical",
            "unknown",
        ):
            raise ValueError(f"bad classification hint {self.classification_hint!r}")
        self.q.check_real()
        a = np.abs(self.q.samples)
        total = float(a.sum())
        if total > 0:
            r = np.abs(self.q.grid.points_complex())
            outside = float(a[r > self.support_radius].sum())
            if outside > 1e-10 * total:
                raise ValueError(
                    f"mass fraction {outside / total:.2e} outside the declared "
                    f"support radius {self.support_radius}"
                )

    @classmethod
    def truncated(
        cls, f: Field2D, support_radius: float, classification_hint: str = "unknown"
    ) -> "Potential":
        """
        Clip a field to the given support radius and wrap it.

        For fields produced by evolution, whose dispersive tails are
        small but not compactly supported; the clipped mass is the
        caller's accepted truncation error.  The imaginary part must be
        negligible (1e-8 relative) and is projected out.
        """
        im = float(np.max(np.abs(f.samples.imag)))
        re = float(np.max(np.abs(f.samples.real)))
        if im > 1e-8 * max(re, 1e-300):
            raise ValueError(f"field is not real enough to truncate: |Im|/|Re| = {im / re:.2e}")
        r = np.abs(f.grid.points_complex())
        clipped = np.where(r <= support_radius, f.samples.real, 0.0)
        return cls(
            q=Field2D(f.grid, clipped.astype(np.complex128), real_tagged=True),
            support_radius=support_radius,
            classification_hint=classification_hint,
        )


@dataclass(frozen=True)
class CGOSolution:
    """Normalized CGO solution at one spectral parameter k."""

    k: complex
    mu: Field2D
    converged: bool
    iterations: int
    residual: float


@dataclass
class ScatteringData:
    """Sampled t(k), s(k) with per-sample convergence flags."""

    k_points: list
    t_values: list
    s_values: list
    flags: list
    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    def ok_mask(self) -> np.ndarray:
        return np.array([f == "ok" for f in self.flags], dtype=bool)


@dataclass(frozen=True)
class DtoNMap:
    """Matrix of the Dirichlet-to-Neumann map in the trig basis e^{im theta}."""

    boundary_modes: int
    matrix: np.ndarray
    disc_radius: float = 1.0

    def __post_init__(self) -> None:
        m = 2 * self.boundary_modes + 1
        if self.matrix.shape != (m, m):
            raise ValueError("DN matrix shape does not match boundary_modes")


def dn_map_zero(boundary_modes: int, disc_radius: float = 1.0) -> DtoNMap:
    """Analytic DN map of the free Laplacian: Lambda_0 e^{im t} = |m|/R e^{im t}."""
    m = np.arange(-boundary_modes, boundary_modes + 1)
    return DtoNMap(boundary_modes, np.diag(np.abs(m) / disc_radius), disc_radius)


# ----------------------------------------------------------------------
# Phases
# ----------------------------------------------------------------------


def e_k(k: complex, z: np.ndarray) -> np.ndarray:
    """Unimodular phase exp(i(kz + conj(kz))) = exp(2i Re(kz))."""
    return np.exp(2j * np.real(k * np.asarray(z)))


# ----------------------------------------------------------------------
# LS route
# ----------------------------------------------------------------------


@lru_cache(maxsize=64)
def _ls_kernel_hat(k: complex, half_side: float, n: int) -> np.ndarray:
    """
    DFT of the periodized Faddeev kernel times the quadrature weight.

    The grid square [-L, L)^2 is the fundamental domain of the torus, so
    sampling g_k at the grid coordinates realizes the wrapped-difference
    (truncated and periodized) kernel; the singular cell carries its
    exact log-average value.
    """
    grid = PeriodicGrid(half_side, n)
    z = grid.points_complex()
    vals = np.empty(z.shape, dtype=np.complex128)
    mask = z != 0
    vals[mask] = g1(k * z[mask])
    vals[~mask] = singular_cell_value(k, grid.spacing)
    h = grid.spacing
    return sfft.fft2(sfft.ifftshift(vals), workers=-1) * (h * h)


def _gmres(op, b: np.ndarray, tol: float, restart: int, maxiter: int, x0=None):
    """Restarted GMRES; returns (solution, converged, inner_iterations)."""
    count = [0]

    def cb(_):
        count[0] += 1

    lin = spla.LinearOperator((b.size, b.size), matvec=op, dtype=np.complex128)
    x, info = spla.gmres(
        lin,
        b,
        x0=x0,
        rtol=tol,
        atol=0.0,
        restart=restart,
        maxiter=max(1, maxiter // restart),
        callback=cb,
        callback_type="pr_norm",
    )
    return x, info == 0, count[0]


def solve_cgo_ls(q: Potential, k: complex, tol: float = KRYLOV_TOL) -> CGOSolution:
    """
    Solve mu = 1 - g_k * (q mu) on the potential grid.

    The grid must extend to at least twice the support radius so the
    periodized kernel reproduces free-space convolution on the support.
    Non-convergence is returned in the flag, not raised.
    """
    if k == 0:
        raise DomainZero("LS solve requires k != 0")
    grid = q.q.grid
    if grid.half_side < 2.0 * q.support_radius - 1e-12:
        raise GridTooSmall(
            "LS grid must cover twice the support radius "
            f"(L = {grid.half_side}, support = {q.support_radius})"
        )
    if q.support_radius / grid.spacing < MIN_POINTS_PER_SUPPORT:
        raise GridTooCoarse(
            f"support_radius/h = {q.support_radius / grid.spacing:.1f} < "
            f"{MIN_POINTS_PER_SUPPORT}"
        )
    khat = _ls_kernel_hat(complex(k), grid.half_side, grid.n)
    qs = q.q.samples
    n = grid.n

    def conv(v: np.ndarray) -> np.ndarray:
        return sfft.ifft2(khat * sfft.fft2(v, workers=-1), workers=-1)

    def op(vec: np.ndarray) -> np.ndarray:
        mu = vec.reshape(n, n)
        return (mu + conv(qs * mu)).ravel()

    b = np.ones(n * n, dtype=np.complex128)
    x, ok, iters = _gmres(op, b, tol, KRYLOV_RESTART, KRYLOV_MAXITER, x0=b.copy())
    res = float(np.linalg.norm(op(x) - b) / np.linalg.norm(x))
    mu = Field2D(grid, x.reshape(n, n))
    return CGOSolution(k=complex(k), mu=mu, converged=ok, iterations=iters, residual=res)


def scattering_t(q: Potential, sol: CGOSolution) -> complex:
    """t(k) = int e_k(z) q(z) mu(z, k) dz by grid quadrature."""
    if not sol.converged:
        raise NotConverged(f"CGO solution at k={sol.k} did not converge")
    phase = e_k(sol.k, q.q.grid.points_complex())
    return integrate(Field2D(q.q.grid, phase * q.q.samples * sol.mu.samples))


def scattering_s(q: Potential, sol: CGOSolution) -> complex:
    """s(k) = int q(z) mu(z, k) dz by grid quadrature."""
    if not sol.converged:
        raise NotConverged(f"CGO solution at k={sol.k} did not converge")
    return integrate(Field2D(q.q.grid, q.q.samples * sol.mu.samples))


def ls_residual(q: Potential, sol: CGOSolution) -> float:
    """Relative defect of mu in its own integral equation."""
    grid = q.q.grid
    khat = _ls_kernel_hat(complex(sol.k), grid.half_side, grid.n)
    lhs = sol.mu.samples + sfft.ifft2(
        khat * sfft.fft2(q.q.samples * sol.mu.samples, workers=-1), workers=-1
    )
    return float(
        np.linalg.norm(lhs - 1.0) / max(np.linalg.norm(sol.mu.samples), 1e-300)
    )


# ----------------------------------------------------------------------
# Conserved quantities and the large-k expansion
# ----------------------------------------------------------------------


def conserved_quantities(q: Potential, j_max: int = 2) -> list[complex]:
    """
    First conserved quantities s_0..s_jmax of the flow.

    s_j = int q a_j with a_0 = 1 and the recursion
    a_{j+1} = i d(a_j) + (1/4i) dbar^{-1}(q a_j); the inverse dbar is the
    free-space Cauchy transform.  Only j_max <= 2 is supported.
    """
    if not 0 <= j_max <= 2:
        raise ValueError("j_max must be 0, 1 or 2")
    qf = q.q
    out = [integrate(qf)]
    if j_max >= 1:
        a1 = calderon.cauchy_transform(qf) * (1.0 / 4j)
        out.append(integrate(qf * a1))
    if j_max >= 2:
        # i d(a1) = (1/4) S q, computed with the free-space Beurling transform
        a2 = calderon.beurling_transform(qf) * 0.25 + calderon.cauchy_transform(
            qf * a1
        ) * (1.0 / 4j)
        out.append(integrate(qf * a2))
    return out


def large_k_expansion_check(q: Potential, sol_set: Sequence[CGOSolution]) -> dict:
    """
    Fit k (mu - 1) against the leading coefficient -(i/4) dbar^{-1} q.

    Per-k values carry an O(1/k) contamination from the next expansion
    coefficient, so the fitted value extrapolates it away using the two
    largest k.  Returns the per-k and fitted relative L2 deviations on
    the support and the log-log decay exponent of max|mu - 1|.
    """
    c0 = calderon.cauchy_transform(q.q) * (-0.25j)
    mask = np.abs(q.q.grid.points_complex()) <= q.support_radius
    den = np.linalg.norm(c0.samples[mask])
    devs = {}
    norms = []
    fields = {}
    for sol in sol_set:
        if not sol.converged:
            raise NotConverged(f"large-k check needs converged solutions (k={sol.k})")
        approx = sol.k * (sol.mu.samples - 1.0)
        fields[sol.k] = approx
        devs[sol.k] = float(np.linalg.norm((approx - c0.samples)[mask]) / den)
        norms.append((abs(sol.k), float(np.max(np.abs(sol.mu.samples - 1.0)))))
    kk = sorted(fields, key=abs)
    if len(kk) >= 2:
        k1, k2 = kk[-2], kk[-1]
        fitted = fields[k2] + (fields[k2] - fields[k1]) * (1.0 / (k2 / k1 - 1.0))
        fitted_dev = float(np.linalg.norm((fitted - c0.samples)[mask]) / den)
    else:
        fitted_dev = min(devs.values())
    ks = np.log([a for a, _ in norms])
    ns = np.log([b for _, b in norms])
    slope = float(np.polyfit(ks, ns, 1)[0]) if len(norms) > 1 else float("nan")
    return {
        "deviations": devs,
        "fitted_deviation": fitted_dev,
        "max_deviation": max(devs.values()),
        "decay_exponent": slope,
    }


# ----------------------------------------------------------------------
# DN route: interior solver
# ----------------------------------------------------------------------


def _radial_profile(q: Potential) -> tuple[np.ndarray, np.ndarray] | None:
    """(r, q(r)) if q is radially symmetric on its grid, else None."""
    z = q.q.grid.points_complex()
    r = np.abs(z).ravel()
    v = q.q.samples.real.ravel()
    order = np.argsort(r)
    r, v = r[order], v[order]
    # Radial means equal values on equal radii.
    rr = np.round(r / (q.q.grid.spacing * 1e-6))
    _, idx = np.unique(rr, return_index=True)
    spread = 0.0
    for i0, i1 in zip(idx, list(idx[1:]) + [len(r)]):
        spread = max(spread, float(np.ptp(v[i0:i1])))
    scale = max(float(np.max(np.abs(v))), 1e-300)
    if spread > 1e-10 * scale:
        return None
    return r[idx], v[idx]


def _radial_dirichlet_derivative(
    qr: np.ndarray, m: int, radius: float, n_r: int
) -> float:
    """
    d/dr at the boundary of the mode-m solution of (-Delta + q) u = 0.

    qr holds q on the uniform radial grid r_j = j dr, j = 0..n_r, with
    boundary value u(radius) = 1.
    """
    dr = radius / n_r
    n_int = n_r - 1  # interior unknowns j = 1..n_r-1
    j = np.arange(1, n_r)
    r = j * dr
    main = -2.0 / dr**2 - (m * m) / r**2 - qr[1:n_r]
    upper = 1.0 / dr**2 + 1.0 / (2 * dr * r)
    lower = 1.0 / dr**2 - 1.0 / (2 * dr * r)
    rhs = np.zeros(n_int)
    rhs[-1] = -upper[-1] * 1.0  # Dirichlet value at r = radius
    ab = np.zeros((3, n_int))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = main
    ab[2, :-1] = lower[1:]
    if m == 0:
        # regularity: u'(0) = 0, operator limit 4 (u_1 - u_0)/dr^2 at center;
        # eliminate u_0 = u_1 * 4/(4 + dr^2 q(0)) from the j=1 row
        u0_coeff = 4.0 / (4.0 + dr * dr * qr[0])
        ab[1, 0] += lower[0] * u0_coeff
    try:
        u = sla.solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise DirichletEigenvalue(str(exc)) from exc
    if not np.all(np.isfinite(u)):
        raise DirichletEigenvalue(f"singular interior solve at mode {m}")
    # third-order one-sided derivative using the boundary value u(R) = 1
    u3, u2, u1 = u[-3], u[-2], u[-1]
    return float((11.0 * 1.0 - 18.0 * u1 + 9.0 * u2 - 2.0 * u3) / (6.0 * dr))


def _dn_matrix_radial(
    rr: np.ndarray, vv: np.ndarray, boundary_modes: int, radius: float, n_r: int
) -> np.ndarray:
    grid_r = np.linspace(0.0, radius, n_r + 1)
    qr = np.interp(grid_r, rr, vv, left=vv[0], right=0.0)
    m_list = np.arange(-boundary_modes, boundary_modes + 1)
    diag = [ _radial_dirichlet_derivative(qr, abs(int(m)), radius, n_r) for m in m_list ]
    return np.diag(np.asarray(diag, dtype=np.complex128))


def _dn_matrix_general(
    q: Potential, boundary_modes: int, radius: float, n_r: int, n_theta: int
) -> np.ndarray:
    """Polar finite-difference DN matrix for non-radial potentials."""
    dr = radius / n_r
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    rs = np.arange(1, n_r) * dr
    zz = rs[:, None] * np.exp(1j * theta[None, :])
    # bilinear sample of q at the polar nodes
    qgrid = q.q
    L, ng = qgrid.grid.half_side, qgrid.grid.n
    h = qgrid.grid.spacing
    fx = (zz.real + L) / h
    fy = (zz.imag + L) / h
    ix = np.clip(fx.astype(int), 0, ng - 2)
    iy = np.clip(fy.astype(int), 0, ng - 2)
    tx, ty = fx - ix, fy - iy
    qq = qgrid.samples.real
    qpol = (
        qq[iy, ix] * (1 - tx) * (1 - ty)
        + qq[iy, ix + 1] * tx * (1 - ty)
        + qq[iy + 1, ix] * (1 - tx) * ty
        + qq[iy + 1, ix + 1] * tx * ty
    )
    q0 = float(qq[ng // 2, ng // 2])

    # spectral second derivative in theta
    modes = sfft.fftfreq(n_theta, d=1.0 / n_theta)
    fmat = sfft.fft(np.eye(n_theta), axis=0)
    d2_theta = np.real(sfft.ifft(-(modes**2)[:, None] * fmat, axis=0))

    nun = (n_r - 1) * n_theta + 1  # interior nodes + center
    center = nun - 1
    rows, cols, vals = [], [], []

    def idx(jr, jt):
        return jr * n_theta + jt

    for jr in range(n_r - 1):
        r = rs[jr]
        cup = 1.0 / dr**2 + 1.0 / (2 * dr * r)
        cdn = 1.0 / dr**2 - 1.0 / (2 * dr * r)
        for jt in range(n_theta):
            me = idx(jr, jt)
            rows.append(me); cols.append(me)
            vals.append(-2.0 / dr**2 - qpol[jr, jt])
            if jr + 1 <= n_r - 2:
                rows.append(me); cols.append(idx(jr + 1, jt)); vals.append(cup)
            # boundary ring (jr + 1 == n_r - 1) enters through the rhs lift
            if jr - 1 >= 0:
                rows.append(me); cols.append(idx(jr - 1, jt)); vals.append(cdn)
            else:
                rows.append(me); cols.append(center); vals.append(cdn)
            for jt2 in range(n_theta):
                w = d2_theta[jt, jt2] / r**2
                if w != 0.0:
                    rows.append(me); cols.append(idx(jr, jt2)); vals.append(w)
    # center closure: -4/dr^2 (mean(u_1) - u_c) + q(0) u_c = 0
    rows.append(center); cols.append(center); vals.append(4.0 / dr**2 + q0)
    for jt in range(n_theta):
        rows.append(center); cols.append(idx(0, jt)); vals.append(-4.0 / (dr**2 * n_theta))

    mat = sp.csc_matrix(
        (np.asarray(vals, dtype=np.complex128), (rows, cols)), shape=(nun, nun)
    )
    try:
        lu = spla.splu(mat)
    except RuntimeError as exc:
        raise DirichletEigenvalue(str(exc)) from exc

    # boundary lift: Dirichlet data enters the last interior ring row
    cup_last = 1.0 / dr**2 + 1.0 / (2 * dr * rs[-1])
    m_list = np.arange(-boundary_modes, boundary_modes + 1)
    lam = np.zeros((2 * boundary_modes + 1, 2 * boundary_modes + 1), dtype=np.complex128)
    for col, m in enumerate(m_list):
        g = np.exp(1j * m * theta)
        rhs = np.zeros(nun, dtype=np.complex128)
        rhs[idx(n_r - 2, 0) : idx(n_r - 2, 0) + n_theta] = -cup_last * g
        u = lu.solve(rhs)
        if not np.all(np.isfinite(u)):
            raise DirichletEigenvalue("singular interior solve")
        un1 = u[idx(n_r - 2, 0) : idx(n_r - 2, 0) + n_theta]
        un2 = u[idx(n_r - 3, 0) : idx(n_r - 3, 0) + n_theta]
        un3 = u[idx(n_r - 4, 0) : idx(n_r - 4, 0) + n_theta]
        du = (11.0 * g - 18.0 * un1 + 9.0 * un2 - 2.0 * un3) / (6.0 * dr)
        coef = sfft.fft(du) / n_theta
        for row, mrow in enumerate(m_list):
            lam[row, col] = coef[int(mrow) % n_theta]
    return lam


def dn_map(
    q: Potential,
    boundary_modes: int = 16,
    n_r: int = 512,
    disc_radius: float = 1.0,
) -> DtoNMap:
    """
    Matrix of Lambda_q on the disc of radius ``disc_radius``.

    The potential support must lie strictly inside the disc.  Radial
    potentials take the decoupled per-mode ODE path, exact in theta;
    general potentials a second-order polar finite-difference solve with
    2*boundary_modes + 4 angular points.
    """
    if q.support_radius > disc_radius:
        raise GridTooSmall(
            f"potential support {q.support_radius} exceeds the DN disc {disc_radius}"
        )
    prof = _radial_profile(q)
    if prof is not None:
        lam = _dn_matrix_radial(prof[0], prof[1], boundary_modes, disc_radius, n_r)
    else:
        lam = _dn_matrix_general(
            q, boundary_modes, disc_radius, n_r, 2 * boundary_modes + 4
        )
    return DtoNMap(boundary_modes, lam, disc_radius)


# ----------------------------------------------------------------------
# DN route: boundary integral equation
# ----------------------------------------------------------------------


def _log_weights_spectral(n_b: int) -> np.ndarray:
    """Multipliers of int ln(4 sin^2((t-s)/2)) f(s) ds in mode space."""
    modes = np.abs(sfft.fftfreq(n_b, d=1.0 / n_b))
    out = np.zeros(n_b)
    nz = modes > 0
    out[nz] = -2.0 * np.pi / modes[nz]
    return out


def _boundary_nodes(n_b: int, radius: float) -> tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(n_b) / n_b
    return theta, radius * np.exp(1j * theta)


def _smooth_part(kernel_vals: np.ndarray, zdiff: np.ndarray, k: complex) -> np.ndarray:
    """kernel + log|zdiff|/(2 pi), with the correct diagonal limit."""
    out = np.empty_like(kernel_vals)
    mask = zdiff != 0
    out[mask] = kernel_vals[mask] + np.log(np.abs(zdiff[mask])) / (2.0 * np.pi)
    out[~mask] = -small_k_shift(k)
    return out


def _dn_operator_nodes(dn: DtoNMap, dn0: DtoNMap, n_b: int) -> np.ndarray:
    """(Lambda_q - Lambda_0) as an n_b x n_b nodal matrix via the trig basis."""
    mmax = dn.boundary_modes
    diff = dn.matrix - dn0.matrix
    fmat = sfft.fft(np.eye(n_b), axis=0) / n_b  # nodal -> coefficients c_m
    m_all = sfft.fftfreq(n_b, d=1.0 / n_b).astype(int)
    # basis evaluation at nodes for the output side
    theta = 2.0 * np.pi * np.arange(n_b) / n_b
    m_list = np.arange(-mmax, mmax + 1)
    basis = np.exp(1j * np.outer(theta, m_list))
    pick = np.zeros((2 * mmax + 1, n_b), dtype=np.complex128)
    for i, m in enumerate(m_list):
        pick[i, :] = fmat[np.where(m_all == m)[0][0], :]
    return basis @ diff @ pick


def solve_cgo_boundary(
    dn: DtoNMap, k: complex, n_b: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """
    Boundary trace of psi(., k) from the boundary integral equation.

    Returns (theta nodes, psi values).  Raises SolverSingular when the
    Nystroem system is numerically singular: the point is then flagged
    exceptional-suspect by callers.
    """
    if k == 0:
        raise DomainZero("boundary solve requires k != 0")
    mmax = dn.boundary_modes
    n_b = n_b or max(64, 4 * mmax)
    radius = dn.disc_radius
    theta, zb = _boundary_nodes(n_b, radius)
    zdiff = zb[:, None] - zb[None, :]
    gk = np.zeros_like(zdiff)
    mask = zdiff != 0
    gk[mask] = np.exp(1j * k * zdiff[mask]) * g1(k * zdiff[mask])
    rk = _smooth_part(gk, zdiff, k)

    # quadrature of int G_k(z - w) rho(w) dS(w), dS = R dtheta
    log_mult = _log_weights_spectral(n_b)
    fmat = sfft.fft(np.eye(n_b), axis=0)
    log_mat = np.real(sfft.ifft(log_mult[:, None] * fmat, axis=0))
    # ln|z-w| = ln R + (1/2) ln(4 sin^2); G_k = -(1/2pi) ln|z-w| + smooth
    quad = radius * (
        -np.log(radius) / (2.0 * np.pi) * (2.0 * np.pi / n_b)
        - log_mat / (4.0 * np.pi)
        + rk * (2.0 * np.pi / n_b)
    )

    dlam = _dn_operator_nodes(dn, dn_map_zero(mmax, radius), n_b)
    sysmat = np.eye(n_b, dtype=np.complex128) + quad @ dlam
    rhs = np.exp(1j * k * zb)
    try:
        psi = sla.solve(sysmat, rhs)
    except sla.LinAlgError as exc:
        raise SolverSingular(str(exc)) from exc
    if not np.all(np.isfinite(psi)):
        raise SolverSingular(f"boundary system singular at k = {k}")
    return theta, psi


def scattering_t_dn(
    dn: DtoNMap, k: complex, n_b: int | None = None
) -> complex:
    """t(k) from boundary data: int e^{i conj(k) conj(z)} (dLambda psi) dS."""
    mmax = dn.boundary_modes
    n_b = n_b or max(64, 4 * mmax)
    theta, psi = solve_cgo_boundary(dn, k, n_b)
    zb = dn.disc_radius * np.exp(1j * theta)
    dlam = _dn_operator_nodes(dn, dn_map_zero(mmax, dn.disc_radius), n_b)
    integrand = np.exp(1j * np.conj(k) * np.conj(zb)) * (dlam @ psi)
    return complex(np.sum(integrand) * dn.disc_radius * 2.0 * np.pi / n_b)


# ----------------------------------------------------------------------
# Normalized DN route for large discs
# ----------------------------------------------------------------------


def _conjugated_dirichlet_normal_derivs(
    qr: np.ndarray, k: complex, radius: float, n_r: int, mmax: int
) -> np.ndarray:
    """
    Normal derivatives at the boundary of the conjugated interior problem.

    Solves (-Delta - 4ik dbar + q) v = 0 for boundary data e^{im theta},
    all |m| <= mmax at once.  In polar modes the first-order term couples
    mode m to m+1 only, so a single upward sweep of banded solves covers
    every boundary mode.  Returns the matrix dv/dr coefficients with rows
    and columns indexed by modes -mmax..mmax.
    """
    dr = radius / n_r
    jj = np.arange(1, n_r)
    r = jj * dr
    n_int = n_r - 1
    msize = 2 * mmax + 1

    out = np.zeros((msize, msize), dtype=np.complex128)
    prev = None  # solution of the previous mode, shape [r, column]

    up = 1.0 / dr**2 + 1.0 / (2 * dr * r)
    dn_ = 1.0 / dr**2 - 1.0 / (2 * dr * r)

    for mi, m in enumerate(range(-mmax, mmax + 1)):
        main = -2.0 / dr**2 - (m * m) / r**2 - qr[1:n_r]
        ab = np.zeros((3, n_int), dtype=np.complex128)
        ab[0, 1:] = up[:-1]
        ab[1, :] = main
        ab[2, :-1] = dn_[1:]
        if m == 0:
            u0_coeff = 4.0 / (4.0 + dr * dr * qr[0])
            ab[1, 0] += dn_[0] * u0_coeff
        # RHS for all boundary-data columns: coupling from mode m-1
        rhs = np.zeros((n_int, msize), dtype=np.complex128)
        if prev is not None:
            dprev = np.zeros_like(prev)
            dprev[1:-1] = (prev[2:] - prev[:-2]) / (2 * dr)
            dprev[0] = prev[1] / (2 * dr)  # v_{m-1}(0) = 0 unless m-1 == 0
            if m - 1 == 0:
                u0 = prev[0] * (4.0 / (4.0 + dr * dr * qr[0]))
                dprev[0] = (prev[1] - u0) / (2 * dr)
            bprev = np.zeros((msize,), dtype=np.complex128)
            bprev[mi - 1] = 1.0
            dprev[-1] = (bprev - prev[-2]) / (2 * dr)
            # (Delta_m - q) v_m = -2ik (v'_{m-1} - (m-1) v_{m-1}/r) + lift
            rhs -= 2j * k * (dprev - (m - 1) * prev / r[:, None])
        # Dirichlet lift: boundary value 1 in column mi
        rhs[-1, mi] -= up[-1] * 1.0
        try:
            v = sla.solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverSingular(str(exc)) from exc
        prev = v
        bvals = np.zeros((msize,), dtype=np.complex128)
        bvals[mi] = 1.0
        out[mi] = (11.0 * bvals - 18.0 * v[-1] + 9.0 * v[-2] - 2.0 * v[-3]) / (6.0 * dr)
    return out


def dn_normalized_t(
    q: Potential,
    k: complex,
    disc_radius: float,
    boundary_modes: int,
    n_r: int = 1024,
    n_b: int | None = None,
) -> complex:
    """
    t(k) by the DN route in normalized (growth-free) variables.

    Every quantity stays O(1) even when |k| * disc_radius is large, at
    the price of one conjugated interior sweep per k.  Radial potentials
    only.
    """
    if k == 0:
        raise DomainZero("k must be nonzero")
    prof = _radial_profile(q)
    if prof is None:
        raise ValueError("normalized DN route requires a radial potential")
    grid_r = np.linspace(0.0, disc_radius, n_r + 1)
    qr = np.interp(grid_r, prof[0], prof[1], left=prof[1][0], right=0.0)
    mmax = boundary_modes
    n_b = n_b or max(64, 4 * mmax)
    radius = disc_radius

    deriv_q = _conjugated_dirichlet_normal_derivs(qr, k, radius, n_r, mmax)
    deriv_0 = _conjugated_dirichlet_normal_derivs(np.zeros_like(qr), k, radius, n_r, mmax)
    dlam_modes = deriv_q - deriv_0  # [output mode, input mode]

    theta, zb = _boundary_nodes(n_b, radius)
    m_list = np.arange(-mmax, mmax + 1)
    basis = np.exp(1j * np.outer(theta, m_list))
    fmat = sfft.fft(np.eye(n_b), axis=0) / n_b
    m_all = sfft.fftfreq(n_b, d=1.0 / n_b).astype(int)
    pick = np.zeros((2 * mmax + 1, n_b), dtype=np.complex128)
    for i, m in enumerate(m_list):
        pick[i, :] = fmat[np.where(m_all == m)[0][0], :]
    dlam_nodes = basis @ dlam_modes @ pick

    zdiff = zb[:, None] - zb[None, :]
    gk = np.zeros_like(zdiff)
    mask = zdiff != 0
    gk[mask] = g1(k * zdiff[mask])
    rk = _smooth_part(gk, zdiff, k)
    log_mult = _log_weights_spectral(n_b)
    fmat2 = sfft.fft(np.eye(n_b), axis=0)
    log_mat = np.real(sfft.ifft(log_mult[:, None] * fmat2, axis=0))
    quad = radius * (
        -np.log(radius) / (2.0 * np.pi) * (2.0 * np.pi / n_b)
        - log_mat / (4.0 * np.pi)
        + rk * (2.0 * np.pi / n_b)
    )
    sysmat = np.eye(n_b, dtype=np.complex128) + quad @ dlam_nodes
    try:
        phi = sla.solve(sysmat, np.ones(n_b, dtype=np.complex128))
    except sla.LinAlgError as exc:
        raise SolverSingular(str(exc)) from exc
    if not np.all(np.isfinite(phi)):
        raise SolverSingular(f"normalized boundary system singular at k = {k}")
    integrand = e_k(k, zb) * (dlam_nodes @ phi)
    return complex(np.sum(integrand) * radius * 2.0 * np.pi / n_b)


# ----------------------------------------------------------------------
# Profile sweep
# ----------------------------------------------------------------------


def scattering_profile(
    q: Potential,
    k_points: Sequence[complex],
    method: str = "ls",
    tol: float = KRYLOV_TOL,
    dn_modes: int = 16,
    small_k_skip: float = 0.05,
    threads: int | None = None,
) -> ScatteringData:
    """
    Sweep t(k), s(k) over k_points; each k owns its solver state.

    The sweep is a parallel map with deterministic ordering.  For
    non-conductivity potentials, |k| below ``small_k_skip`` is skipped on
    the LS route (log-k kernel singularity).
    """
    from .parallel import parallel_map

    data = ScatteringData([], [], [], [], [], [])
    conductivity = q.classification_hint == "critical"
    dn = dn_map(q, boundary_modes=dn_modes) if method in ("dn", "both") else None

    def one(k: complex):
        k = complex(k)
        if method == "dn":
            try:
                t = scattering_t_dn(dn, k)
                return (t, np.nan + 0j, "ok", 0, 0.0)
            except (SolverSingular, DomainZero):
                return (np.nan + 0j, np.nan + 0j, "no_converge", 0, np.inf)
        if abs(k) < small_k_skip and not conductivity:
            return (np.nan + 0j, np.nan + 0j, "skipped", 0, np.nan)
        sol = solve_cgo_ls(q, k, tol)
        if not sol.converged:
            return (np.nan + 0j, np.nan + 0j, "no_converge", sol.iterations, sol.residual)
        return (
            scattering_t(q, sol),
            scattering_s(q, sol),
            "ok",
            sol.iterations,
            sol.residual,
        )

    results = parallel_map(one, list(k_points), threads=threads)
    for k, (t, s, flag, iters, res) in zip(k_points, results):
        data.k_points.append(complex(k))
        data.t_values.append(t)
        data.s_values.append(s)
        data.flags.append(flag)
        data.iterations.append(iters)
        data.residuals.append(res)
    return data
