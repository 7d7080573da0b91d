"""Command line entry point: ``ptkrein run|verify|spectrum <config>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, build_config, load_config
from .continuation import ContinuationRun, sweep
from .errors import PTKreinError
from .grid import build_grid, inner_product, norm
from .krein import hamiltonian_orientation, krein_of, linear_limit_orientation, pt_phase_fix
from .linearization import ISOLATED, solve_spectrum
from .stationary import exact_scarf_solution, find_state, initial_guess, newton_solve

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_TRUNCATED = 2
EXIT_VERIFY = 3


def fmt(x) -> str:
    """17 significant digits, scientific notation."""
    if x is None:
        return "nan"
    return f"{float(x):.16e}"


def _sig(s) -> str:
    return "0" if s is None else f"{int(s):+d}"


def _write_csv(path: Path, header: list, rows, trailer: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
        if trailer:
            fh.write(trailer + "\n")


def _param_tag(p: float) -> str:
    return f"{p:+.6f}"


def write_run(run: ContinuationRun, cfg: RunConfig, out: Path, wall: float) -> list:
    """Persist a sweep; returns the list of files written."""
    out.mkdir(parents=True, exist_ok=True)
    axis = run.config.axis
    trailer = f"#truncated,{run.truncation}" if run.truncated else None
    written = []

    path = out / "branch.csv"
    _write_csv(path, [axis, "power", "stable"],
               ([fmt(s.param), fmt(s.power), "1" if s.stable else "0"] for s in run.steps), trailer)
    written.append(path)

    for p in cfg.snapshots:
        if not len(run.steps):
            break
        k = int(np.argmin([abs(s.param - p) for s in run.steps]))
        rec = run.steps[k]
        path = out / f"spectrum_{_param_tag(rec.param)}.csv"
        rows = ([fmt(l.real), fmt(l.imag), c] for l, c in zip(rec.eigenvalues, rec.classes))
        _write_csv(path, ["re_lambda", "im_lambda", "classification"], rows, trailer)
        written.append(path)

    rows = []
    for t in run.tracks:
        for s in t.samples:
            K = s.krein if s.krein is not None else complex("nan")
            rows.append([str(t.branch_id), fmt(s.param), fmt(s.lam.real), fmt(s.lam.imag),
                         fmt(K.real), fmt(K.imag), _sig(s.signature)])
    path = out / "tracks.csv"
    _write_csv(path, ["branch_id", axis, "re_lambda", "im_lambda", "re_K", "im_K", "signature"], rows, trailer)
    written.append(path)

    rows = []
    for e in run.events:
        rows.append([e.kind, fmt(e.param_at), ";".join(str(i) for i in e.branch_ids),
                     ";".join(_sig(s) for s in e.pre_signatures), fmt(e.exponent)])
    for ids, lo, hi, why in run.unresolved:
        rows.append(["unresolved", fmt(0.5 * (lo + hi)), ";".join(str(i) for i in ids), "", "nan"])
    path = out / "events.csv"
    _write_csv(path, ["kind", "param_at", "branch_ids", "pre_signatures", "exponent"], rows, trailer)
    written.append(path)

    for i, e in enumerate(run.events):
        ev = e.evidence
        if ev is None or not ev.params:
            continue
        path = out / f"coalescence_{i:02d}_{e.kind}.csv"
        rows = ([fmt(p), fmt(a), fmt(b), fmt(g)] for p, a, b, g in zip(ev.params, ev.d_vec, ev.d_adj, ev.gaps))
        _write_csv(path, [axis, "d_eigvec", "d_adjoint", "gap"], rows, trailer)
        written.append(path)

    manifest = {
        "version": __version__,
        "config": cfg.resolved(),
        "wall_clock_seconds": wall,
        "truncated": run.truncated,
        "truncation": run.truncation,
        "steps": [{"param": s.param, "iterations": s.iterations, "residual": s.residual, "power": s.power}
                  for s in run.steps],
        "unresolved": [{"branch_ids": list(ids), "lo": lo, "hi": hi, "reason": why}
                       for ids, lo, hi, why in run.unresolved],
    }
    path = out / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written


def report(run: ContinuationRun) -> str:
    lines = [f"{len(run.steps)} steps over {run.config.axis}, {len(run.tracks)} tracks"]
    for e in run.events:
        extra = f", exponent {e.exponent:.3f}" if e.exponent is not None else ""
        flag = " THEORY VIOLATION" if e.theory_violation else ""
        lines.append(f"  {e.kind:24s} at {e.param_at:.6f}  tracks {e.branch_ids}  "
                     f"signatures {tuple(_sig(s) for s in e.pre_signatures)}{extra}{flag}")
    for ids, lo, hi, why in run.unresolved:
        lines.append(f"  unresolved               in [{min(lo, hi):.6f}, {max(lo, hi):.6f}]  tracks {ids}: {why}")
    if run.truncated:
        lines.append(f"  run truncated: {run.truncation}")
    return "\n".join(lines)


def cmd_run(cfg: RunConfig) -> int:
    scfg = cfg.sweep_config()
    if len(scfg.values()) < 2:
        print("config error: sweep range holds fewer than two parameter values", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    run = sweep(scfg)
    wall = time.perf_counter() - t0
    write_run(run, cfg, Path(cfg.output_dir), wall)
    print(report(run))
    return EXIT_TRUNCATED if run.truncated else EXIT_OK


def verify_table(cfg: RunConfig) -> list:
    """Rows (n, error, reference, passed) for the exact Scarf II solution."""
    p = cfg.params
    rows = []
    for n in cfg.verify_n:
        grid = build_grid(n, cfg.scale)
        exact, mu = exact_scarf_solution(grid.x, p.potential.v0, p.gamma, p.g)
        guess = initial_guess("scarf-1", p, grid, amplitude=0.9 * float(np.max(np.abs(exact))))
        state = newton_solve(guess, p, grid)
        err = min(norm(state.phi - exact, grid), norm(state.phi + exact, grid)) ** 2
        ref = cfg.verify_reference.get(n)
        ok = ref is None or err <= cfg.verify_slack * ref
        rows.append((n, err, ref, ok))
    return rows


def cmd_verify(cfg: RunConfig) -> int:
    p = cfg.params
    if p.potential.kind != "scarf2" or p.potential.v0 != 1.0 or p.mu != -1.0 or p.gamma != -1.0 or p.g != 1.0:
        print("config error: verify needs problem.potential=scarf2, v0=1, mu=-1, gamma=-1, g=1", file=sys.stderr)
        return EXIT_CONFIG
    rows = verify_table(cfg)
    print(f"{'n':>6} {'|phi_exact - phi|^2':>22} {'reference':>12} {'limit':>12}  status")
    for n, err, ref, ok in rows:
        lim = "-" if ref is None else f"{cfg.verify_slack * ref:.3e}"
        refs = "-" if ref is None else f"{ref:.1e}"
        print(f"{n:>6} {err:>22.3e} {refs:>12} {lim:>12}  {'ok' if ok else 'FAIL'}")
    return EXIT_OK if all(r[3] for r in rows) else EXIT_VERIFY


def cmd_spectrum(cfg: RunConfig) -> int:
    grid = build_grid(cfg.n, cfg.scale)
    state = find_state(cfg.branch, cfg.params, grid)
    snap = solve_spectrum(state, grid, cfg.spectral_tolerances())
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for pr in snap.pairs:
        K = complex("nan")
        if pr.classification == ISOLATED and pr.adjoint_y is not None:
            try:
                y, z, _ = pt_phase_fix(pr.y, pr.z, grid)
                ya, za, _ = pt_phase_fix(pr.adjoint_y, pr.adjoint_z, grid)
                v = np.concatenate([y, z]) / norm(np.concatenate([y, z]), grid)
                va = np.concatenate([ya, za]) / norm(np.concatenate([ya, za]), grid)
                if cfg.params.gamma == 0:
                    s = hamiltonian_orientation(v, va, grid)
                else:
                    s, _ = linear_limit_orientation(v, va, grid)
                K = krein_of(v, s * va, grid)
            except PTKreinError:
                pass
        rows.append([fmt(pr.lam.real), fmt(pr.lam.imag), pr.classification, fmt(K.real), fmt(K.imag)])
    _write_csv(out / "spectrum.csv", ["re_lambda", "im_lambda", "classification", "re_K", "im_K"], rows)
    unstable = "unstable" if snap.unstable else "stable"
    print(f"power {state.power:.6f}, residual {state.residual_inf:.2e}, {unstable}, "
          f"{len(snap.of_class(ISOLATED))} isolated eigenvalues")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "spectrum": cmd_spectrum}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="ptkrein", description="Krein signatures along PT-symmetric NLS branches")
    ap.add_argument("verb", choices=sorted(COMMANDS))
    ap.add_argument("config")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, require_sweep=args.verb == "run")
        if args.verb == "run":
            cfg.sweep_config()
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.verb](cfg)
    except PTKreinError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_TRUNCATED if args.verb == "run" else EXIT_VERIFY if args.verb == "verify" else EXIT_TRUNCATED


__all__ = ["main", "build_config", "write_run", "report", "verify_table"]
