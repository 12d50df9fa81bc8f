"""Command-line interface: ``fracseg {eig,segregate,frequency,report}``.

Exit codes: 0 success, 2 usage, 3 data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .almgren import morrey_quotient, pohozaev_residual
from .analysis import (FreeBoundaryError, GammaPoint, analyze_partition, detect_self_segregation,
                       extract_free_boundary, limit_profile, point_diagnostics)
from .fields import HalfLineField, YPowerField
from .fraclap import assemble_form, smallest_eigenpair
from .runio import (RunConfig, densities_path, load_run, read_config_values, write_csv, write_densities,
                    write_ini)
from .segregation import (ContinuationSchedule, PenaltySpec, beta_continuation, euler_lagrange_residual,
                          gaussian_bumps, project_spheres)

log = logging.getLogger("fracseg")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class CLIError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracseg", description="Fractional segregation solver and diagnostics.")
    p.add_argument("--version", action="version", version=f"fracseg {__version__}")
    p.add_argument("--config", type=Path, help="INI config file")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    p.add_argument("--cache-dir", type=Path, help="stiffness-matrix cache directory")
    p.add_argument("--threads", type=int, help="BLAS thread limit")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eig", help="principal eigenpair of the interval or a mask")
    e.add_argument("--mask", type=Path, help="file with one 0/1 entry per grid node")

    s = sub.add_parser("segregate", help="beta-continuation of the penalized functional")
    s.add_argument("--anchored", metavar="RUN", help="anchor to the final densities of a prior run")

    f = sub.add_parser("frequency", help="frequency, Pohozaev and Morrey diagnostics")
    f.add_argument("run", nargs="?", type=Path, help="run directory (omit with --field)")
    f.add_argument("--points", default="auto", help="comma-separated x0 values, or 'auto' for Γ")
    f.add_argument("--field", choices=("yfield", "halfline"), help="built-in closed-form field")

    r = sub.add_parser("report", help="partition report with figures")
    r.add_argument("run", type=Path, help="run directory")
    return p


def _config(args) -> RunConfig:
    try:
        values = {}
        if args.config is not None:
            if not args.config.exists():
                raise CLIError(EXIT_DATA, f"config file {args.config} not found")
            values.update(read_config_values(args.config))
        for item in args.set:
            if "=" not in item:
                raise CLIError(EXIT_USAGE, f"--set expects KEY=VALUE, got {item!r}")
            key, val = item.split("=", 1)
            values[key.strip()] = val.strip()
        if args.seed is not None:
            values["seed"] = args.seed
        if getattr(args, "anchored", None):
            values["anchored"] = args.anchored
        return RunConfig.from_mapping(values)
    except (ValueError, TypeError) as exc:
        raise CLIError(EXIT_USAGE, f"invalid configuration: {exc}") from exc


def _out(args, default: Path) -> Path:
    out = args.out if args.out is not None else default
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands

def cmd_eig(args) -> int:
    cfg = _config(args)
    out = _out(args, Path("eig"))
    grid, params = cfg.grid, cfg.params
    mask = None
    if args.mask is not None:
        try:
            mask = np.loadtxt(args.mask, ndmin=1).astype(bool)
        except (OSError, ValueError) as exc:
            raise CLIError(EXIT_DATA, f"cannot read mask: {exc}") from exc
        if mask.shape != (grid.n,):
            raise CLIError(EXIT_DATA, f"mask has {mask.size} entries, grid has {grid.n} nodes")
        if not mask.any():
            raise CLIError(EXIT_DATA, "mask selects no nodes")
    form = assemble_form(grid, params, cache_dir=args.cache_dir)
    res = smallest_eigenpair(form, mask)
    cfg.save(out / "config")
    write_csv(out / "eig.csv", ["x", "phi"], zip(grid.nodes, res.phi))
    write_ini(out / "eig_summary", {"eig": {"lambda": res.lam, "residual_norm": res.residual_norm,
                                            "iterations": res.iterations, "converged": res.converged,
                                            "nodes": int(res.mask.sum())}})
    print(f"lambda = {res.lam:.17g}")
    if not res.converged:
        raise CLIError(EXIT_NUMERIC, "eigen solver did not converge (best iterate written)")
    return EXIT_OK


def cmd_segregate(args) -> int:
    cfg = _config(args)
    out = _out(args, Path("run"))
    grid, params = cfg.grid, cfg.params
    form = assemble_form(grid, params, cache_dir=args.cache_dir)
    anchor = None
    if cfg.anchored:
        try:
            prior = load_run(cfg.anchored)
        except (OSError, ValueError) as exc:
            raise CLIError(EXIT_DATA, f"cannot load anchor run: {exc}") from exc
        if prior.final_u.shape != (cfg.k, cfg.n):
            raise CLIError(EXIT_DATA, "anchor run has a different shape")
        anchor = prior.final_u
        u0 = project_spheres(anchor, grid.h)
    else:
        u0 = gaussian_bumps(form, cfg.k, cfg.jitter, np.random.default_rng(cfg.seed))
    betas = cfg.beta_list()
    spec = PenaltySpec(beta=betas[0], anchor=anchor, cubic=np.asarray(cfg.cubic) if cfg.cubic else None)
    schedule = ContinuationSchedule(betas=betas, tol=cfg.tol, max_iter=cfg.max_iter)
    for stale in out.glob("densities_*.csv"):
        stale.unlink()
    cfg.save(out / "config")

    trace_rows = []
    stage_no = [0]

    def record(rec):
        j = stage_no[0]
        write_densities(densities_path(out, j), grid.nodes, rec.u.u)
        for row in rec.diagnostics.history:
            trace_rows.append((j, rec.beta) + tuple(row))
        stage_no[0] += 1

    records = beta_continuation(schedule, spec, form, u0, callback=record)
    write_csv(out / "trace.csv", ["stage", "beta", "iteration", "energy", "overlap", "grad_norm", "step"],
              trace_rows)

    sections = {}
    prev = None
    for j, rec in enumerate(records):
        d = rec.diagnostics
        el, _ = euler_lagrange_residual(rec.u, spec.with_beta(rec.beta), form)
        drift = float(np.sqrt(grid.h * np.sum((rec.u.u - prev) ** 2))) if prev is not None else float("nan")
        prev = rec.u.u
        sections[f"stage.{j:02d}"] = {
            "beta": rec.beta, "energy": rec.energy, "overlap": rec.overlap, "iterations": d.iterations,
            "grad_norm": d.grad_norm, "converged": d.converged, "line_search_failed": d.line_search_failed,
            "drift": drift, "lambdas": " ".join(f"{v:.17g}" for v in d.lambdas),
            "el_residual": " ".join(f"{v:.17g}" for v in el)}
    last = records[-1]
    ok = all(r.diagnostics.converged for r in records)
    summary = {"summary": {
        "s": cfg.s, "k": cfg.k, "n": cfg.n, "stages": len(records), "final_beta": last.beta,
        "final_energy": last.energy, "final_overlap": last.overlap,
        "segregated": last.overlap <= cfg.segregation_tol,
        "lambdas": " ".join(f"{v:.17g}" for v in last.diagnostics.lambdas),
        "converged": ok}}
    summary.update(sections)
    write_ini(out / "summary", summary)
    print(f"final overlap = {last.overlap:.3e}, energy = {last.energy:.12g}")
    if not ok:
        raise CLIError(EXIT_NUMERIC, "some stages did not converge (see summary)")
    return EXIT_OK


def _parse_points(text: str) -> list | None:
    if text.strip().lower() == "auto":
        return None
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, f"--points: {exc}") from exc


def cmd_frequency(args) -> int:
    pts = _parse_points(args.points)
    if args.field is None and args.run is None:
        raise CLIError(EXIT_USAGE, "frequency needs a run directory or --field")
    if args.field is not None:
        cfg = _config(args)
        grid, params = cfg.grid, cfg.params
        evaluator = YPowerField(params) if args.field == "yfield" else HalfLineField(params, 0.0)
        reaction, h = None, grid.h
        points = [GammaPoint(x, None, None, "given") for x in (pts if pts is not None else [0.0])]
        out = _out(args, Path("frequency"))
    else:
        try:
            run = load_run(args.run)
        except (OSError, ValueError) as exc:
            raise CLIError(EXIT_DATA, f"cannot load run: {exc}") from exc
        cfg, grid, params = run.config, run.grid, run.params
        try:
            fb = extract_free_boundary(run.final_u, grid, cfg.eps_gamma)
            lp = limit_profile(fb, grid, params, cfg.k, cache_dir=args.cache_dir)
        except FreeBoundaryError as exc:
            raise CLIError(EXIT_NUMERIC, str(exc)) from exc
        evaluator, reaction, h = lp.evaluator, lp.reaction, lp.grid.h
        points = lp.points if pts is None else [GammaPoint(x, None, None, "given") for x in pts]
        out = _out(args, args.run)
    for p in points:
        if not grid.x_left < p.x < grid.x_right:
            raise CLIError(EXIT_DATA, f"point {p.x} lies outside the interval")
    freq_rows, poh_rows, mor_rows, diags = [], [], [], []
    for p in points:
        dist = min(p.x - grid.x_left, grid.x_right - p.x)
        try:
            d = point_diagnostics(evaluator, p, reaction, h, dist, cfg.n_ang, cfg.n_rad)
        except ValueError as exc:
            raise CLIError(EXIT_DATA, f"point {p.x}: {exc}") from exc
        diags.append(d)
        prof = d.profile
        for j, r in enumerate(prof.radii):
            freq_rows.append((p.x, r, prof.E[j], prof.H[j], prof.N[j], prof.psi[j], prof.Psi[j],
                              d.monotone.corrected[j], prof.mode))
            rep = pohozaev_residual(evaluator, p.x, r, reaction, cfg.n_ang, cfg.n_rad)
            poh_rows.append((p.x, r) + rep.terms + (rep.residual, rep.normalized))
            mor_rows.append((p.x, r, morrey_quotient(evaluator, (p.x, 0.0), r, n_ang=cfg.n_ang,
                                                     n_rad=cfg.n_rad)))
    detect_self_segregation(diags, params.s)
    write_csv(out / "frequency.csv", ["x0", "r", "E", "H", "N", "psi", "Psi", "corrected", "mode"], freq_rows)
    write_csv(out / "pohozaev.csv", ["x0", "r", "bulk", "sphere", "trace", "corner", "radial", "residual",
                                     "normalized"], poh_rows)
    write_csv(out / "morrey.csv", ["x0", "r", "Phi"], mor_rows)
    for d in diags:
        print(f"x0 = {d.point.x:.6g}: C = {d.monotone.C:.4g}, N(0+) = {d.N0:.4f}, "
              f"alpha = {d.holder.alpha:.4f}, verdict = {d.verdict}")
    if not all(d.monotone.success for d in diags):
        raise CLIError(EXIT_NUMERIC, "no monotone correction constant C within the cap")
    return EXIT_OK


def cmd_report(args) -> int:
    from .plotting import plot_densities, plot_frequency, plot_holder

    try:
        run = load_run(args.run)
    except (OSError, ValueError) as exc:
        raise CLIError(EXIT_DATA, f"cannot load run: {exc}") from exc
    cfg = run.config
    form = assemble_form(run.grid, run.params, cache_dir=args.cache_dir)
    try:
        res = analyze_partition(run.final_u, form, eps_rel=cfg.eps_gamma, cache_dir=args.cache_dir,
                                n_ang=cfg.n_ang, n_rad=cfg.n_rad, diagnostics=cfg.diagnostics)
    except FreeBoundaryError as exc:
        raise CLIError(EXIT_NUMERIC, str(exc)) from exc
    out = _out(args, args.run)
    rep = {"partition": {
        "s": cfg.s, "k": cfg.k, "alpha_star": run.params.alpha_star, "I": res.I, "J": res.J,
        "rayleigh_sum": res.rayleigh_sum, "equivalence_gap": res.equivalence_gap,
        "equivalent": res.equivalent, "lambdas": " ".join(f"{v:.17g}" for v in res.lambdas),
        "gamma_points": len(res.free_boundary), "dead_intervals": len(res.free_boundary.intervals),
        "limit_grid_n": res.limit_grid_n,
        "limit_lambdas": " ".join(f"{v:.17g}" for v in res.limit_lambdas)}}
    rows = []
    for j, d in enumerate(res.diagnostics):
        p = d.point
        rep[f"gamma.{j:02d}"] = {
            "x": p.x, "left": "" if p.left is None else p.left, "right": "" if p.right is None else p.right,
            "kind": p.kind, "alpha": d.holder.alpha, "r2": d.holder.r2,
            "window": f"{d.holder.window[0]:.17g} {d.holder.window[1]:.17g}", "N0": d.N0,
            "N0_slope": d.N0_slope, "C": d.monotone.C, "monotone": d.monotone.success,
            "verdict": d.verdict, "consistent": d.consistent, "note": d.note}
        rows.append((p.x, "" if p.left is None else p.left, "" if p.right is None else p.right, p.kind,
                     d.holder.alpha, d.holder.r2, d.N0, d.monotone.C, d.monotone.success, d.verdict,
                     d.consistent))
    write_ini(out / "report", rep)
    write_csv(out / "gamma_points.csv", ["x", "left", "right", "kind", "alpha", "r2", "N0", "C", "monotone",
                                         "verdict", "consistent"], rows)
    plot_densities(run.grid.nodes, run.final_u, [p.point.x for p in res.diagnostics], out / "densities.png")
    if res.diagnostics:
        plot_frequency(res.diagnostics, out / "frequency.png")
        plot_holder(res.diagnostics, out / "holder.png")
    print(f"I = {res.I:.12g}, J = {res.J:.12g}, gap = {res.equivalence_gap:.2e}, "
          f"Γ points = {len(res.free_boundary)}")
    return EXIT_OK


COMMANDS = {"eig": cmd_eig, "segregate": cmd_segregate, "frequency": cmd_frequency, "report": cmd_report}


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be positive")
    try:
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](args)
    except CLIError as exc:
        print(f"fracseg: {exc}", file=sys.stderr)
        return exc.code
    except np.linalg.LinAlgError as exc:
        print(f"fracseg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
