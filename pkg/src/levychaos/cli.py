"""Command-line front end: ``levychaos {basis,simulate,verify,project,report}``.

Exit codes: 0 on success, 1 when a check fails, 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .chaos import chaos_coefficients
from .config import SUITES, default_config, load_config
from .errors import ConfigInvalid, IoFailure, LevyChaosError
from .paths import simulate_levy
from .report import VerificationReport, build_system, emit_tables, run_suite
from .systems import export_basis_csv, gram_matrix

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment file (INI); without it --seed is required")
    p.add_argument("--seed", type=int)
    p.add_argument("--paths", type=int, help="Monte Carlo paths")
    p.add_argument("--order", type=int, help="chaos order cap (basis: number of generators)")
    p.add_argument("--grid", type=float, help="grid step")
    p.add_argument("--eps", type=float, help="jump truncation for densities")
    p.add_argument("--out", help="output directory")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levychaos", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("basis", help="build and orthonormalize the configured function system")
    _common(p)
    p = sub.add_parser("simulate", help="write seeded Levy paths as CSV")
    _common(p)
    p = sub.add_parser("verify", help="run verification suites")
    _common(p)
    p.add_argument("--suite", help="comma-separated suites (overrides the config)")
    p = sub.add_parser("project", help="chaos projection of a target functional")
    _common(p)
    p.add_argument("--target", help="expression such as 'Lbar**2' or 'W**2'")
    p.add_argument("--system", choices=["teugels", "indicator", "hermite", "haar", "monomial"])
    p = sub.add_parser("report", help="re-emit tables from a saved report.json")
    _common(p)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("report", nargs="?", help="path to report.json (default: <out>/report.json)")
    return ap


def _config(args):
    if args.config:
        cfg = load_config(args.config)
    elif args.seed is not None:
        cfg = default_config(args.seed)
    else:
        raise ConfigInvalid([("experiment.seed", "pass --config or --seed")])
    over = dict(seed=args.seed, n_paths=args.paths, grid_step=args.grid, truncation_eps=args.eps,
                output=args.out)
    if args.command == "basis":
        over["n_max"] = args.order
    else:
        over["order"] = args.order
    if getattr(args, "suite", None):
        over["suites"] = tuple(s.strip() for s in args.suite.split(","))
    if getattr(args, "target", None):
        over["target"] = args.target
    if getattr(args, "system", None):
        over["basis_kind"] = args.system
    cfg = cfg.with_overrides(**over)
    if "all" in cfg.suites:
        cfg = cfg.with_overrides(suites=SUITES)
    return cfg


def _outdir(cfg) -> Path:
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc.strerror}") from exc
    return out


def cmd_basis(cfg) -> int:
    triplet = cfg.triplet()
    system = build_system(cfg, triplet)
    G = gram_matrix(system, triplet.mu)
    out = _outdir(cfg) / "basis.csv"
    export_basis_csv(system, triplet.nu, out)
    for k, f in enumerate(system):
        print(f"{k:3d}  {f.label()}  |f|^2 = {G[k, k]:.12g}")
    print(f"members: {len(system)}  wrote {out}")
    return EXIT_OK


def cmd_simulate(cfg) -> int:
    triplet = cfg.triplet()
    out = _outdir(cfg) / "paths.csv"
    n = cfg.n_paths if cfg.n_paths <= 1000 else 1000
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "time", "levy"])
        for i in range(n):
            path = simulate_levy(triplet, cfg.horizon, cfg.grid_step, cfg.seed, i)
            tl, vals = path.levy_values(triplet)
            for t, v in zip(tl, vals):
                w.writerow([i, repr(float(t)), repr(float(v))])
    print(f"wrote {n} path(s) to {out}")
    return EXIT_OK


def cmd_verify(cfg) -> int:
    report = run_suite(cfg, log=print)
    out = _outdir(cfg)
    emit_tables(report, "json", out)
    emit_tables(report, "csv", out)
    bad = report.failures()
    print(f"{len(report.records) - len(bad)}/{len(report.records)} checks passed "
          f"in {report.total_runtime:.1f} s; report in {out}")
    return EXIT_OK if not bad else EXIT_FAIL


def cmd_project(cfg) -> int:
    triplet = cfg.triplet()
    system = build_system(cfg, triplet)
    rep = chaos_coefficients(cfg.target, system, triplet, cfg.horizon, cfg.order, cfg.n_paths,
                             cfg.seed, cfg.cell_depth, cfg.grid_step, cfg.workers)
    out = _outdir(cfg)
    rep.to_json(out / "projection.json")
    rep.to_csv(out / "coefficients.csv")
    rep.residual_csv(out / "residuals.csv")
    print("order  residual2        se        z")
    for r in rep.residuals:
        print(f"{r['order']:5d}  {r['residual2']:12.6g}  {r['se']:9.3g}  {r['z']:7.2f}")
    print(f"wrote {out}/projection.json, coefficients.csv, residuals.csv")
    return EXIT_OK


def cmd_report(cfg, args) -> int:
    src = Path(args.report) if args.report else Path(cfg.output) / "report.json"
    try:
        data = json.loads(src.read_text())
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot read {src}: {exc}") from exc
    report = VerificationReport.from_dict(data)
    for p in emit_tables(report, args.format, _outdir(cfg)):
        print(f"wrote {p}")
    return EXIT_OK if report.passed else EXIT_FAIL


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "report":
            return cmd_report(cfg, args)
        return {"basis": cmd_basis, "simulate": cmd_simulate, "verify": cmd_verify,
                "project": cmd_project}[args.command](cfg)
    except ConfigInvalid as exc:
        for field, msg in exc.problems:
            print(f"config error: {field}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except LevyChaosError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
