"""
Report figures rendered to files next to the delimited outputs.

Everything uses the Agg backend and strips volatile metadata so a rerun
with identical inputs produces byte-identical images.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid import Field2D

_SAVE_KW = {"dpi": 130, "metadata": {"Software": None}}


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def save_profile_png(path, k_abs, t_values, flags=None, title="scattering profile") -> Path:
    """Profile of t along |k|; non-converged samples marked."""
    k_abs = np.asarray(k_abs, dtype=float)
    tv = np.asarray(t_values, dtype=complex)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ok = (
        np.array([f == "ok" for f in flags], dtype=bool)
        if flags is not None
        else np.ones(len(k_abs), dtype=bool)
    )
    ax.plot(k_abs[ok], tv.real[ok], "k.-", lw=0.8, ms=3, label="Re t")
    if np.max(np.abs(tv.imag[ok]), initial=0) > 1e-9 * np.max(np.abs(tv[ok]), initial=1):
        ax.plot(k_abs[ok], tv.imag[ok], "b.--", lw=0.8, ms=3, label="Im t")
    if (~ok).any():
        for k in k_abs[~ok]:
            ax.axvline(k, color="r", alpha=0.25, lw=2)
    ax.set_xlabel("|k|")
    ax.set_ylabel("t(k)")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def save_field_png(path, f: Field2D, title="field", part="real") -> Path:
    """Heat map of one component of a field."""
    data = getattr(f.samples, part) if part in ("real", "imag") else np.abs(f.samples)
    L = f.grid.half_side
    fig, ax = plt.subplots(figsize=(5.4, 4.6))
    im = ax.imshow(
        data, origin="lower", extent=(-L, L, -L, L), cmap="gray", interpolation="nearest"
    )
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    return _finish(fig, path)


def save_scan_png(path, lambdas, k_samples, t_profiles, title="t profiles") -> Path:
    """Grayscale (lambda, |k|) image of Re t, clipped at robust percentiles."""
    data = np.asarray(t_profiles).real.T.copy()
    finite = np.isfinite(data)
    if finite.any():
        lo, hi = np.percentile(data[finite], [2, 98])
        data = np.clip(data, lo, hi)
        data[~finite] = lo
    fig, ax = plt.subplots(figsize=(6.0, 4.6))
    im = ax.imshow(
        data,
        origin="lower",
        aspect="auto",
        cmap="gray",
        extent=(min(lambdas), max(lambdas), min(k_samples), max(k_samples)),
    )
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel("lambda")
    ax.set_ylabel("|k|")
    ax.set_title(title)
    return _finish(fig, path)


def save_history_png(path, times, norms, title="L2 norm history") -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(times, norms, "k-", lw=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("L2 norm")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    return _finish(fig, path)
