"""
Command-line front end.

Every data-producing command writes its outputs plus a JSON manifest
(parameters, SHA-256 of every produced file, wall time, diagnostics)
and, where a figure makes sense, a PNG rendering next to the delimited
output.  Exit codes: 0 on success, 2 on flagged-but-completed runs
(blow-up, non-convergence cells), 1 on errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import evolve as ev
from . import inverse as inv
from . import nvf
from . import plotting
from . import scan as scan_mod
from . import solutions as sols
from .grid import Field2D, PeriodicGrid
from .scatter import Potential, scattering_profile
from .errors import BlowupDetected  # noqa: F401  (re-exported for callers)

FLAGGED_EXIT = 2


# ----------------------------------------------------------------------
# Output helpers
# ----------------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


class Manifest:
    """Collects produced files and diagnostics for one command."""

    def __init__(self, command: str, parameters: dict):
        self.command = command
        self.parameters = parameters
        self.files: list[dict] = []
        self.diagnostics: dict = {}
        self.extras: dict = {}
        self._t0 = time.perf_counter()

    def add_file(self, path: Path, **meta) -> None:
        entry = {"path": str(path), "sha256": _sha256(path)}
        entry.update(meta)
        self.files.append(entry)

    def write(self, path: Path) -> None:
        doc = {
            "command": self.command,
            "parameters": self.parameters,
            "files": self.files,
            "diagnostics": self.diagnostics,
            "wall_time_s": time.perf_counter() - self._t0,
        }
        doc.update(self.extras)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_profile_csv(path: Path, data) -> None:
    """ScatteringData rows with 17-significant-digit fields."""
    lines = ["k_re,k_im,t_re,t_im,s_re,s_im,flag,iterations,residual"]
    for i, k in enumerate(data.k_points):
        t = data.t_values[i]
        s = data.s_values[i]
        lines.append(
            ",".join(
                [
                    _fmt(k.real),
                    _fmt(k.imag),
                    _fmt(np.real(t)),
                    _fmt(np.imag(t)),
                    _fmt(np.real(s)),
                    _fmt(np.imag(s)),
                    data.flags[i],
                    str(data.iterations[i]),
                    _fmt(float(data.residuals[i])),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_profile_csv(path: Path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """(k, t, flags) from a profile CSV."""
    rows = Path(path).read_text().strip().splitlines()[1:]
    ks, ts, flags = [], [], []
    for row in rows:
        p = row.split(",")
        ks.append(complex(float(p[0]), float(p[1])))
        ts.append(complex(float(p[2]), float(p[3])))
        flags.append(p[6])
    return np.asarray(ks), np.asarray(ts), flags


def write_scan_csv(path: Path, result: scan_mod.ScanResult) -> None:
    with_det = result.det2_values is not None
    header = "lambda,k,t_re,t_im,flag" + (",det2" if with_det else "")
    lines = [header]
    for il, lam in enumerate(result.lambdas):
        for ik, k in enumerate(result.k_samples):
            row = [
                _fmt(lam),
                _fmt(k),
                _fmt(result.t_profiles[il, ik].real),
                _fmt(result.t_profiles[il, ik].imag),
                str(result.flags[il, ik]),
            ]
            if with_det:
                row.append(_fmt(float(result.det2_values[il, ik])))
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_scan_csv(path: Path) -> scan_mod.ScanResult:
    rows = Path(path).read_text().strip().splitlines()
    with_det = rows[0].strip().endswith(",det2")
    lambdas: list[float] = []
    ks: list[float] = []
    cells = {}
    for row in rows[1:]:
        p = row.split(",")
        lam, k = float(p[0]), float(p[1])
        if lam not in lambdas:
            lambdas.append(lam)
        if k not in ks:
            ks.append(k)
        det = float(p[5]) if with_det else None
        cells[(lam, k)] = (complex(float(p[2]), float(p[3])), p[4], det)
    nl, nk = len(lambdas), len(ks)
    t = np.zeros((nl, nk), dtype=complex)
    flags = np.empty((nl, nk), dtype=object)
    det_vals = np.full((nl, nk), np.nan) if with_det else None
    for il, lam in enumerate(lambdas):
        for ik, k in enumerate(ks):
            t[il, ik], flags[il, ik], d = cells[(lam, k)]
            if with_det:
                det_vals[il, ik] = d
    radii = [scan_mod.detect_singularities(t[il], flags[il], ks) for il in range(nl)]
    return scan_mod.ScanResult(lambdas, ks, t, flags, radii, det_vals)


def write_pgm16(path: Path, data: np.ndarray) -> tuple[float, float]:
    """16-bit grayscale PGM (big-endian samples); returns the linear map."""
    lo = float(np.nanmin(data))
    hi = float(np.nanmax(data))
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((data - lo) / span * 65535.0, 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n65535\n".encode())
        fh.write(scaled.tobytes())
    return lo, hi


# ----------------------------------------------------------------------
# Builtin potentials
# ----------------------------------------------------------------------


def load_potential(spec: str, grid: PeriodicGrid | None = None) -> Potential:
    """
    A potential from 'builtin:NAME[:param]' or an NVF1 file path.

    Builtins: gaussian-sigma, lambda-bump:<lam>, ring.  Fields loaded
    from file are truncated at half the grid extent.
    """
    if spec.startswith("builtin:"):
        parts = spec.split(":")
        name = parts[1]
        if name == "gaussian-sigma":
            pot, _ = sols.conductivity_fixture(grid=grid or PeriodicGrid(2.0, 256))
            return pot
        if name == "lambda-bump":
            lam = float(parts[2]) if len(parts) > 2 else -5.0
            return sols.lambda_bump(
                sols.LambdaBumpSpec(lam=lam), grid=grid or PeriodicGrid(2.0, 256)
            )
        if name == "ring":
            return sols.ring_potential(grid or PeriodicGrid(90.0, 1024))
        raise ValueError(f"unknown builtin potential {name!r}")
    f = nvf.read_field(spec)
    return Potential.truncated(f, f.grid.half_side / 2.0)


def _builtin_solution(name: str, params: dict):
    if name == "1soliton":
        return sols.kdv_soliton(params.get("c", 1.0))
    if name == "hirota1":
        return sols.hirota(1, params)
    if name == "hirota2":
        return sols.hirota(2, params)
    if name == "ema-static":
        return sols.ema_solutions("static", params.get("C", 1.0))
    if name == "ema-breather":
        return sols.ema_solutions("breather", params.get("C", 1.0))
    return None


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------


def cmd_dispersion(args) -> int:
    k1, k2 = (float(v) for v in args.k.split(","))
    w = sols.dispersion(k1, k2)
    cg = sols.group_velocity(k1, k2)
    print(f"omega = {_fmt(w)}")
    if (k1, k2) != (0.0, 0.0):
        cp = sols.phase_velocity(k1, k2)
        print(f"phase_velocity = ({_fmt(cp[0])}, {_fmt(cp[1])})")
    else:
        print("phase_velocity = undefined at k = 0")
    print(f"group_velocity = ({_fmt(cg[0])}, {_fmt(cg[1])})")
    return 0


def cmd_solution(args) -> int:
    L, n = args.grid.split(",")
    grid = PeriodicGrid(float(L), int(n))
    params = {}
    for chunk in args.params or []:
        key, val = chunk.split("=")
        params[key] = float(val)
    out = Path(args.out)
    man = Manifest("solution", vars(args))
    name = args.name
    if name == "ring":
        field = sols.kdv_ring(grid)
    elif name == "gaussian-sigma":
        pot, _ = sols.conductivity_fixture(grid=grid, **params)
        field = pot.q
    elif name == "lambda-bump":
        field = sols.lambda_bump(
            sols.LambdaBumpSpec(lam=params.get("lam", -5.0)), grid=grid
        ).q
    else:
        sol = _builtin_solution(name, params)
        if sol is None:
            print(f"error: unknown solution {name!r}", file=sys.stderr)
            return 1
        if sol.planar_direction is not None:
            field = sols.periodized_planar_field(sol, grid, args.t)
        else:
            field = sol.q_field(grid, args.t)
    nvf.write_field(out, field)
    man.add_file(out, kind="nvf")
    png = out.with_suffix(".png")
    plotting.save_field_png(png, field, title=f"{name} at t={args.t}")
    man.add_file(png, kind="figure")
    if args.pgm:
        pgm = out.with_suffix(".pgm")
        lo, hi = write_pgm16(pgm, field.samples.real)
        man.add_file(pgm, kind="pgm", value_min=lo, value_max=hi)
    man.write(out.with_suffix(".manifest.json"))
    return 0


def cmd_evolve(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = PeriodicGrid(args.L, args.n)
    if args.init.startswith("builtin:"):
        name = args.init.split(":")[1]
        if name == "ring":
            q0 = sols.kdv_ring(grid)
        elif name == "gaussian-sigma":
            q0 = sols.conductivity_fixture(grid=grid)[0].q
        else:
            print(f"error: unknown builtin init {name!r}", file=sys.stderr)
            return 1
    else:
        q0 = nvf.read_field(args.init)
        q0 = Field2D(q0.grid, q0.samples.real.astype(complex), real_tagged=True)
    config = ev.EvolutionConfig(
        energy=args.E, dt=args.dt, t_end=args.tend, dealias=args.dealias
    )
    man = Manifest("evolve", vars(args))
    emitted = set()

    def checkpoint(state: ev.EvolutionState):
        tag = f"{state.time:012.6f}"
        if tag in emitted:
            return
        emitted.add(tag)
        path = outdir / f"checkpoint_t{tag}.nvf"
        nvf.write_field(path, state.q_field())
        man.add_file(path, kind="nvf", time=state.time)

    state = ev.run(
        q0, config, on_checkpoint=checkpoint, checkpoint_every=args.checkpoint_every
    )
    times = [d.time for d in state.history]
    norms = [d.l2_norm for d in state.history]
    man.diagnostics = {
        "steps": len(state.history) - 1,
        "final_time": state.time,
        "blowup_time": state.blowup_time,
        "blowup_reason": state.blowup_reason,
        "history": [
            {
                "time": d.time,
                "l2_norm": d.l2_norm,
                "zero_mode_re": d.zero_mode.real,
                "zero_mode_im": d.zero_mode.imag,
                "tail_fraction": d.tail_fraction,
                "blowup_flag": d.blowup_flag,
            }
            for d in state.history
        ],
    }
    png = outdir / "norm_history.png"
    plotting.save_history_png(png, times, norms)
    man.add_file(png, kind="figure")
    fpng = outdir / "final_field.png"
    plotting.save_field_png(fpng, state.q_field(), title=f"q at t={state.time:.3f}")
    man.add_file(fpng, kind="figure")
    man.write(outdir / "manifest.json")
    if state.blowup_time is not None:
        print(f"blow-up flagged at t = {state.blowup_time:.6g}: {state.blowup_reason}")
        return FLAGGED_EXIT
    return 0


def cmd_scatter(args) -> int:
    pot = load_potential(args.potential)
    ks = np.linspace(args.kmin, args.kmax, args.knum)
    out = Path(args.out)
    man = Manifest("scatter", vars(args))
    flagged = False
    if args.method in ("ls", "dn"):
        data = scattering_profile(pot, [complex(k) for k in ks], method=args.method,
                                  threads=args.threads)
        write_profile_csv(out, data)
        flagged = any(f != "ok" for f in data.flags)
        png = out.with_suffix(".png")
        plotting.save_profile_png(png, ks, data.t_values, data.flags,
                                  title=f"t(k), {args.method} route")
        man.add_file(out, kind="csv")
        man.add_file(png, kind="figure")
        man.diagnostics["flags"] = {f: data.flags.count(f) for f in set(data.flags)}
    else:  # both: one csv per route plus an overlay figure
        results = {}
        for method in ("ls", "dn"):
            data = scattering_profile(pot, [complex(k) for k in ks], method=method,
                                      threads=args.threads)
            path = out.with_name(out.stem + f".{method}" + out.suffix)
            write_profile_csv(path, data)
            man.add_file(path, kind="csv", method=method)
            results[method] = data
            flagged |= any(f != "ok" for f in data.flags)
        png = out.with_suffix(".png")
        plotting.save_profile_png(
            png, ks, results["ls"].t_values, results["ls"].flags, title="t(k), ls route"
        )
        man.add_file(png, kind="figure")
    man.write(out.with_suffix(".manifest.json"))
    return FLAGGED_EXIT if flagged else 0


def cmd_inverse(args) -> int:
    src = Path(args.tprofile)
    if src.suffix == ".csv":
        ks, ts, flags = read_profile_csv(src)
        okm = np.array([f == "ok" for f in flags])
        tsf = inv.TSharpField.from_profile(
            np.abs(ks[okm]), ts[okm], radius=args.radius
        )
    else:
        tsf = inv.TSharpField.from_t_field(nvf.read_field(src), radius=args.radius)
    zgrid = PeriodicGrid(args.zhalf, args.zgrid)
    man = Manifest("inverse", vars(args))
    if args.method == "q":
        rec = inv.reconstruct_q(tsf, zgrid, tau=args.tau, threads=args.threads)
    else:
        rec = inv.reconstruct_conductivity(tsf, zgrid, tau=args.tau, threads=args.threads)
    out = Path(args.out)
    nvf.write_field(out, rec.q)
    man.add_file(out, kind="nvf")
    png = out.with_suffix(".png")
    plotting.save_field_png(png, rec.q, title=f"reconstructed q ({rec.method})")
    man.add_file(png, kind="figure")
    mu0_path = out.with_name(out.stem + ".mu0" + out.suffix)
    nvf.write_field(mu0_path, rec.mu0)
    man.add_file(mu0_path, kind="nvf")
    holes = int((~rec.ok).sum())
    man.diagnostics = {"holes": holes, "method": rec.method,
                       "truncation_radius": tsf.truncation_radius}
    man.write(out.with_suffix(".manifest.json"))
    return FLAGGED_EXIT if holes else 0


def cmd_roundtrip(args) -> int:
    if args.fixture != "gaussian-sigma":
        print("error: only the gaussian-sigma fixture is wired", file=sys.stderr)
        return 1
    pot, sigma = sols.conductivity_fixture(grid=PeriodicGrid(2.0, 256))
    ks = np.linspace(0.05, 20.0, args.knum)
    data = scattering_profile(pot, [complex(k) for k in ks], threads=args.threads)
    okm = data.ok_mask()
    tsf = inv.TSharpField.from_profile(
        np.abs(np.asarray(data.k_points))[okm], np.asarray(data.t_values)[okm]
    )
    tsf = inv.evolve_scattering(tsf, args.tau)
    zgrid = PeriodicGrid(0.5, 32)
    rec = inv.reconstruct_q(tsf, zgrid, threads=args.threads)
    x, y = zgrid.meshgrid()
    qref = _bilinear(pot.q, x, y)
    err = float(
        np.max(np.abs(rec.q.samples.real - qref)[rec.ok]) / np.max(np.abs(qref))
    )
    print(f"roundtrip rel Linf error (q route, tau={args.tau}): {err:.4%}")
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        man = Manifest("roundtrip", vars(args))
        man.diagnostics = {"rel_linf_error": err}
        qpath = outdir / "reconstructed.nvf"
        nvf.write_field(qpath, rec.q)
        man.add_file(qpath, kind="nvf")
        png = outdir / "reconstructed.png"
        plotting.save_field_png(png, rec.q, title="roundtrip reconstruction")
        man.add_file(png, kind="figure")
        man.write(outdir / "manifest.json")
    return 0


def _bilinear(f: Field2D, x, y):
    L, h = f.grid.half_side, f.grid.spacing
    fx = (x + L) / h
    fy = (y + L) / h
    ix = np.clip(fx.astype(int), 0, f.grid.n - 2)
    iy = np.clip(fy.astype(int), 0, f.grid.n - 2)
    tx, ty = fx - ix, fy - iy
    s = f.samples.real
    return (
        s[iy, ix] * (1 - tx) * (1 - ty)
        + s[iy, ix + 1] * tx * (1 - ty)
        + s[iy + 1, ix] * (1 - tx) * ty
        + s[iy + 1, ix + 1] * tx * ty
    )


def cmd_scan(args) -> int:
    if args.family != "lambda-bump":
        print("error: only the lambda-bump family is wired", file=sys.stderr)
        return 1
    grid = PeriodicGrid(2.0, args.n)
    lambdas = np.linspace(args.lmin, args.lmax, args.lnum)
    ks = np.linspace(args.kmin, args.kmax, args.knum)

    def make(lam):
        return sols.lambda_bump(sols.LambdaBumpSpec(lam=float(lam)), grid=grid)

    result = scan_mod.lambda_sweep(
        make, lambdas, ks, with_det2=args.det2, threads=args.threads
    )
    out = Path(args.out)
    man = Manifest("scan", vars(args))
    write_scan_csv(out, result)
    man.add_file(out, kind="csv")
    png = out.with_suffix(".png")
    plotting.save_scan_png(png, result.lambdas, result.k_samples, result.t_profiles)
    man.add_file(png, kind="figure")
    man.diagnostics = {
        "singular_radii": {str(l): r for l, r in zip(result.lambdas, result.singular_radii)},
        "no_converge_cells": int(sum((result.flags == "no_converge").sum() for _ in [0])),
    }
    man.write(out.with_suffix(".manifest.json"))
    flagged = any(result.singular_radii[i] for i in range(len(result.lambdas))) or (
        result.flags == "no_converge"
    ).any()
    return FLAGGED_EXIT if flagged else 0


def cmd_conserved(args) -> int:
    from .scatter import conserved_quantities

    pot = load_potential(args.potential)
    vals = conserved_quantities(pot, j_max=2)
    for j, v in enumerate(vals):
        print(f"s{j} = {_fmt(v.real)} {'+' if v.imag >= 0 else '-'} {_fmt(abs(v.imag))}i")
    return 0


# ----------------------------------------------------------------------
# Dispatch
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nv",
        description="Solvers, scattering transforms and reference solutions "
        "for the zero-energy Novikov-Veselov equation.",
    )
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap for parallel sweeps (NV_THREADS also works)")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dispersion", help="dispersion relation and velocities")
    d.add_argument("--k", required=True, help="k1,k2")
    d.set_defaults(fn=cmd_dispersion)

    s = sub.add_parser("solution", help="sample a reference solution to NVF1")
    s.add_argument("--name", required=True,
                   choices=["1soliton", "ring", "hirota1", "hirota2", "ema-static",
                            "ema-breather", "gaussian-sigma", "lambda-bump"])
    s.add_argument("--params", nargs="*", help="key=value pairs")
    s.add_argument("--t", type=float, default=0.0)
    s.add_argument("--grid", required=True, help="L,n")
    s.add_argument("--out", required=True)
    s.add_argument("--pgm", action="store_true", help="also write a 16-bit PGM heat map")
    s.set_defaults(fn=cmd_solution)

    e = sub.add_parser("evolve", help="time-evolve an initial field")
    e.add_argument("--init", required=True, help="NVF1 path or builtin:{ring,gaussian-sigma}")
    e.add_argument("--E", type=float, default=0.0)
    e.add_argument("--L", type=float, required=True)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--dt", type=float, required=True)
    e.add_argument("--tend", type=float, required=True)
    e.add_argument("--dealias", choices=["two_thirds", "none"], default="two_thirds")
    e.add_argument("--checkpoint-every", type=float, default=None)
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(fn=cmd_evolve)

    sc = sub.add_parser("scatter", help="scattering profile t(k), s(k)")
    sc.add_argument("--potential", required=True,
                    help="NVF1 path or builtin:{gaussian-sigma,lambda-bump:<lam>,ring}")
    sc.add_argument("--method", choices=["ls", "dn", "both"], default="ls")
    sc.add_argument("--kmin", type=float, required=True)
    sc.add_argument("--kmax", type=float, required=True)
    sc.add_argument("--knum", type=int, required=True)
    sc.add_argument("--out", required=True)
    sc.set_defaults(fn=cmd_scatter)

    iv = sub.add_parser("inverse", help="reconstruct q from scattering data")
    iv.add_argument("--tprofile", required=True, help="profile CSV or t-field NVF1")
    iv.add_argument("--radius", type=float, default=None, help="truncation radius R")
    iv.add_argument("--zgrid", type=int, default=32)
    iv.add_argument("--zhalf", type=float, default=0.5, help="z lattice half extent")
    iv.add_argument("--tau", type=float, default=0.0)
    iv.add_argument("--method", choices=["q", "conductivity"], default="q")
    iv.add_argument("--out", required=True)
    iv.set_defaults(fn=cmd_inverse)

    rt = sub.add_parser("roundtrip", help="forward transform, evolve, invert")
    rt.add_argument("--fixture", default="gaussian-sigma")
    rt.add_argument("--tau", type=float, default=0.0)
    rt.add_argument("--knum", type=int, default=100)
    rt.add_argument("--out", default=None)
    rt.set_defaults(fn=cmd_roundtrip)

    sn = sub.add_parser("scan", help="lambda sweep of scattering profiles")
    sn.add_argument("--family", default="lambda-bump")
    sn.add_argument("--lmin", type=float, required=True)
    sn.add_argument("--lmax", type=float, required=True)
    sn.add_argument("--lnum", type=int, required=True)
    sn.add_argument("--kmin", type=float, required=True)
    sn.add_argument("--kmax", type=float, required=True)
    sn.add_argument("--knum", type=int, required=True)
    sn.add_argument("--n", type=int, default=128, help="potential grid resolution")
    sn.add_argument("--det2", action="store_true")
    sn.add_argument("--out", required=True)
    sn.set_defaults(fn=cmd_scan)

    cq = sub.add_parser("conserved", help="conserved quantities s0, s1, s2")
    cq.add_argument("--potential", required=True)
    cq.set_defaults(fn=cmd_conserved)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
