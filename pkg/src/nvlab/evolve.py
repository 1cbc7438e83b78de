"""
Pseudospectral time integrator for the zero/nonzero-energy flow

    q_t = -q_xxx/4 + 3 q_xyy/4 + (3/4) div((q - E) u),

with the auxiliary field u solved mode by mode from dbar(u) = dq.
The linear part (including the energy term, which is a Fourier
multiplier) advances by Crank-Nicolson; the quadratic divergence is
explicit midpoint at the same dt.  Blow-up is flagged, never fatal.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import map_coordinates

from .errors import NonFinite
from .grid import Field2D, PeriodicGrid

ROTATION_ANGLES = (2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0)


@dataclass(frozen=True)
class EvolutionConfig:
    """Parameters of one integration run."""

    energy: float = 0.0
    dt: float = 0.01
    t_end: float = 1.0
    dealias: str = "two_thirds"
    blowup_growth_factor: float = 10.0
    tail_fraction_max: float = 0.1
    tail_sustain_steps: int = 10
    track_s1: bool = False
    nonlinear_scale: float = 1.0
    # zero-mode rule for the auxiliary field: None keeps it at zero (the
    # decaying free-space branch); a direction (n1, n2) selects the
    # bounded planar branch u = ((n1^2-n2^2) q, -2 n1 n2 q) mean and all.
    planar_mean_flow: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.dealias not in ("two_thirds", "none"):
            raise ValueError("dealias must be 'two_thirds' or 'none'")


@dataclass(frozen=True)
class Diagnostics:
    """Per-step scalars recorded into the run history."""

    time: float
    l2_norm: float
    zero_mode: complex
    tail_fraction: float
    s1_value: complex | None = None
    blowup_flag: bool = False


@dataclass
class EvolutionState:
    """Fourier-space solution state plus diagnostic history."""

    grid: PeriodicGrid
    time: float
    q_hat: np.ndarray
    history: list[Diagnostics] = field(default_factory=list)
    blowup_time: float | None = None
    blowup_reason: str | None = None
    tail_run_length: int = 0

    def q_field(self) -> Field2D:
        q = sfft.ifft2(self.q_hat, workers=-1)
        return Field2D(self.grid, q)

    def l2_norm(self) -> float:
        h = self.grid.spacing
        return float(
            np.sqrt(h * h * np.sum(np.abs(self.q_hat) ** 2)) / self.grid.n
        )

    def mode(self, mx: int, my: int) -> complex:
        """Fourier coefficient c_{mx,my} of exp(i pi (mx x + my y)/L)."""
        # the grid origin sits at (-L, -L), hence the alternating factor
        raw = complex(self.q_hat[my % self.grid.n, mx % self.grid.n]) / self.grid.n**2
        return raw * (-1.0) ** (mx + my)


def aux_multiplier_tables(grid: PeriodicGrid) -> tuple[np.ndarray, np.ndarray]:
    """Symbols (xi^2-eta^2)/(xi^2+eta^2) and -2 xi eta/(xi^2+eta^2), zero mode 0."""
    xi, eta = grid.frequencies()
    denom = xi * xi + eta * eta
    denom[0, 0] = 1.0
    m1 = (xi * xi - eta * eta) / denom
    m2 = -2.0 * xi * eta / denom
    m1[0, 0] = 0.0
    m2[0, 0] = 0.0
    return m1, m2


def aux_from_q(
    q_hat: np.ndarray,
    grid: PeriodicGrid,
    planar_mean_flow: tuple[float, float] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Spectral auxiliary pair (u1_hat, u2_hat) from q_hat.

    The (0,0) mode of u is set to zero by default; with a declared
    planar direction it takes the bounded-branch value proportional to
    the mean of q.
    """
    m1, m2 = aux_multiplier_tables(grid)
    u1 = m1 * q_hat
    u2 = m2 * q_hat
    if planar_mean_flow is not None:
        n1, n2 = planar_mean_flow
        u1[0, 0] = (n1 * n1 - n2 * n2) * q_hat[0, 0]
        u2[0, 0] = -2.0 * n1 * n2 * q_hat[0, 0]
    return u1, u2


def linear_symbol(grid: PeriodicGrid, energy: float, nonlinear_scale: float = 1.0) -> np.ndarray:
    """(i/4)(xi^3 - 3 xi eta^2)(1 - 3E/(xi^2+eta^2)) with zero mode 0."""
    xi, eta = grid.frequencies()
    denom = xi * xi + eta * eta
    denom[0, 0] = 1.0
    base = 0.25j * (xi**3 - 3.0 * xi * eta * eta)
    sym = base - nonlinear_scale * energy * base * 3.0 / denom
    sym[0, 0] = 0.0
    mask = grid.nyquist_mask()
    return np.where(mask, sym, 0.0)


def _dealias_mask(grid: PeriodicGrid, mode: str) -> np.ndarray:
    if mode == "none":
        return np.ones((grid.n, grid.n), dtype=bool)
    m = np.abs(sfft.fftfreq(grid.n, d=1.0 / grid.n))
    keep = m <= grid.n / 3.0
    kx, ky = np.meshgrid(keep, keep, indexing="xy")
    return kx & ky


def _tail_mask(grid: PeriodicGrid, mode: str) -> np.ndarray:
    """Top third of the resolved band, where resolution failure piles up."""
    band = grid.n / 3.0 if mode == "two_thirds" else grid.n / 2.0
    m = np.abs(sfft.fftfreq(grid.n, d=1.0 / grid.n))
    mx, my = np.meshgrid(m, m, indexing="xy")
    return np.maximum(mx, my) >= (2.0 / 3.0) * band


class _StepKernel:
    """Precomputed tables for repeated stepping on one grid/config."""

    def __init__(self, grid: PeriodicGrid, config: EvolutionConfig):
        self.grid = grid
        self.config = config
        lam = linear_symbol(grid, config.energy, config.nonlinear_scale)
        dt = config.dt
        self.cn_half = (1.0 + 0.25 * dt * lam) / (1.0 - 0.25 * dt * lam)
        self.cn_full = (1.0 + 0.5 * dt * lam) / (1.0 - 0.5 * dt * lam)
        self.inv_half = 1.0 / (1.0 - 0.25 * dt * lam)
        self.inv_full = 1.0 / (1.0 - 0.5 * dt * lam)
        self.m1, self.m2 = aux_multiplier_tables(grid)
        xi, eta = grid.frequencies()
        nyq = grid.nyquist_mask()
        self.ddx = np.where(nyq, 1j * xi, 0.0)
        self.ddy = np.where(nyq, 1j * eta, 0.0)
        self.dealias = _dealias_mask(grid, config.dealias)
        self.tail = _tail_mask(grid, config.dealias)

    def nonlinear(self, q_hat: np.ndarray) -> np.ndarray:
        """
        (3/4) div(q u) in spectral space, dealiased.

        For real q the pair (u1, u2) is real, so both inverse transforms
        ride in one complex FFT (u1 + i u2) and the two forward products
        in another; the halves are split by Hermitian symmetry.
        """
        cfg = self.config
        u1h = self.m1 * q_hat
        u2h = self.m2 * q_hat
        if cfg.planar_mean_flow is not None:
            n1, n2 = cfg.planar_mean_flow
            u1h[0, 0] = (n1 * n1 - n2 * n2) * q_hat[0, 0]
            u2h[0, 0] = -2.0 * n1 * n2 * q_hat[0, 0]
        qh = np.where(self.dealias, q_hat, 0.0)
        uh = np.where(self.dealias, u1h + 1j * u2h, 0.0)
        q = sfft.ifft2(qh, workers=-1).real
        w = sfft.ifft2(uh, workers=-1)  # u1 + i u2 up to Im(q) roundoff
        f = sfft.fft2(q * w, workers=-1)
        frev = np.conj(np.roll(f[::-1, ::-1], (1, 1), axis=(0, 1)))
        f1 = 0.5 * (f + frev)
        f2 = -0.5j * (f - frev)
        f1 = np.where(self.dealias, f1, 0.0)
        f2 = np.where(self.dealias, f2, 0.0)
        return cfg.nonlinear_scale * 0.75 * (self.ddx * f1 + self.ddy * f2)

    def advance(self, q_hat: np.ndarray) -> np.ndarray:
        dt = self.config.dt
        n1 = self.nonlinear(q_hat)
        q_half = self.cn_half * q_hat + (0.5 * dt) * self.inv_half * n1
        n2 = self.nonlinear(q_half)
        return self.cn_full * q_hat + dt * self.inv_full * n2


def _s1_diagnostic(state: EvolutionState) -> complex:
    """s1 = (1/4i) int q dbar^{-1} q, via the free-space Cauchy transform."""
    from .calderon import _padded_apply, _padded_symbols

    qf = state.q_field()
    cauchy, _ = _padded_symbols(state.grid.n, state.grid.half_side)
    pq = _padded_apply(qf, cauchy)
    h = state.grid.spacing
    return complex(h * h * np.sum(qf.samples * pq.samples) / 4j)


def _diagnose(state: EvolutionState, kernel: _StepKernel, track_s1: bool) -> Diagnostics:
    ahat2 = np.abs(state.q_hat) ** 2
    total = float(np.sum(ahat2))
    tail = float(np.sum(ahat2[kernel.tail])) / total if total > 0 else 0.0
    return Diagnostics(
        time=state.time,
        l2_norm=state.l2_norm(),
        zero_mode=complex(state.q_hat[0, 0]) / state.grid.n**2,
        tail_fraction=tail,
        s1_value=_s1_diagnostic(state) if track_s1 else None,
    )


def step(state: EvolutionState, config: EvolutionConfig, kernel: _StepKernel | None = None) -> EvolutionState:
    """One IMEX step; returns the advanced state (history not extended)."""
    if not np.all(np.isfinite(state.q_hat)):
        raise NonFinite(f"state not finite at t = {state.time}")
    kernel = kernel or _StepKernel(state.grid, config)
    q_next = kernel.advance(state.q_hat)
    return replace(state, time=state.time + config.dt, q_hat=q_next)


def initial_state(q0: Field2D) -> EvolutionState:
    q0.check_real()
    return EvolutionState(grid=q0.grid, time=0.0, q_hat=sfft.fft2(q0.samples, workers=-1))


def run(
    q0: Field2D,
    config: EvolutionConfig,
    on_checkpoint: Callable[[EvolutionState], None] | None = None,
    checkpoint_every: float | None = None,
) -> EvolutionState:
    """
    Integrate q0 to t_end or to the blow-up flag.

    The blow-up criterion: L2 growth beyond ``blowup_growth_factor``
    relative to t = 0, or a tail fraction above ``tail_fraction_max``
    sustained for ``tail_sustain_steps`` consecutive steps, or loss of
    finiteness.  The state up to the flagged step is preserved and
    returned with ``blowup_time`` set.
    """
    state = initial_state(q0)
    kernel = _StepKernel(state.grid, config)
    l2_initial = state.l2_norm()
    state.history.append(_diagnose(state, kernel, config.track_s1))
    n_steps = int(round(config.t_end / config.dt))
    next_checkpoint = checkpoint_every if checkpoint_every else None
    if on_checkpoint is not None:
        on_checkpoint(state)
    for _ in range(n_steps):
        try:
            state = step(state, config, kernel)
        except NonFinite:
            state.blowup_time = state.time
            state.blowup_reason = "nonfinite"
            break
        if not np.all(np.isfinite(state.q_hat)):
            state.blowup_time = state.time
            state.blowup_reason = "nonfinite"
            break
        diag = _diagnose(state, kernel, config.track_s1)
        if diag.tail_fraction > config.tail_fraction_max:
            state.tail_run_length += 1
        else:
            state.tail_run_length = 0
        flagged = None
        if l2_initial > 0 and diag.l2_norm >= config.blowup_growth_factor * l2_initial:
            flagged = f"l2 growth factor {diag.l2_norm / l2_initial:.2f}"
        elif state.tail_run_length >= config.tail_sustain_steps:
            flagged = (
                f"tail fraction > {config.tail_fraction_max} for "
                f"{state.tail_run_length} steps"
            )
        if flagged:
            diag = replace(diag, blowup_flag=True)
            state.history.append(diag)
            state.blowup_time = state.time
            state.blowup_reason = flagged
            break
        state.history.append(diag)
        if next_checkpoint is not None and state.time + 1e-12 >= next_checkpoint:
            if on_checkpoint is not None:
                on_checkpoint(state)
            next_checkpoint += checkpoint_every
    if on_checkpoint is not None:
        on_checkpoint(state)
    return state


def rotate_field(q: Field2D, angle: float) -> Field2D:
    """
    Rotate a field by 2pi/3 or 4pi/3 with periodic bicubic resampling.

    Used only by symmetry tests: the flow commutes with these rotations.
    """
    if not any(abs(angle - a) < 1e-12 for a in ROTATION_ANGLES):
        raise ValueError("angle must be 2pi/3 or 4pi/3")
    grid = q.grid
    x, y = grid.meshgrid()
    ca, sa = np.cos(angle), np.sin(angle)
    xs = ca * x + sa * y
    ys = -sa * x + ca * y
    h = grid.spacing
    col = (xs + grid.half_side) / h
    row = (ys + grid.half_side) / h
    coords = np.stack([row, col])
    re = map_coordinates(q.samples.real, coords, order=3, mode="grid-wrap")
    im = map_coordinates(q.samples.imag, coords, order=3, mode="grid-wrap")
    return Field2D(grid, re + 1j * im)
