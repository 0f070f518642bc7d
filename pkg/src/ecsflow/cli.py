"""Command line interface: seed, run, verify, blowup, plot, pipeline."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .blowup import BlowupError, blowup_analysis
from .config import ConfigError, RunConfig, config_from_dict, parse_config
from .curve import CurveError, ProfileCurve
from .flow import run as run_flow
from .monitors import check_history
from .plots import emit_plots
from .seeds import build_seed, validate_ricci_condition

log = logging.getLogger("ecsflow")

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_STAGE = 0, 1, 2, 3


# -- stages -----------------------------------------------------------------


def stage_seed(cfg: RunConfig, out_dir) -> tuple[ProfileCurve, list[Path]]:
    out_dir = Path(out_dir)
    curve = build_seed(cfg.seed_spec())
    files = [io.write_curve(out_dir / "seed.csv", curve)]
    info = {"m": curve.m, "arc_kind": curve.arc_kind.value, "n_nodes": curve.n_nodes, "seed": dataclasses.asdict(cfg.seed)}
    if curve.is_lobe:
        info["ricci"] = validate_ricci_condition(curve, cfg.seed.ricci_constant or 0.0).as_dict()
    files.append(io.write_json(out_dir / "seed.json", info))
    return curve, files


def stage_run(cfg: RunConfig, seed: ProfileCurve, out_dir):
    history = run_flow(seed, cfg.flow_config(), progress=_progress)
    files = io.write_run(out_dir, history)
    return history, files


def stage_verify(run_dir, out_dir=None, history=None):
    run_dir = Path(run_dir)
    out_dir = run_dir if out_dir is None else Path(out_dir)
    history = io.load_run(run_dir) if history is None else history
    report = check_history(history)
    files = [
        io.write_text(out_dir / "report.json", report.to_json()),
        io.write_text(out_dir / "report.txt", report.to_text()),
    ]
    return report, files


def stage_blowup(run_dir, a0_factor: float, rho: float, window: float, out_dir=None, history=None):
    run_dir = Path(run_dir)
    out_dir = run_dir / "blowup" if out_dir is None else Path(out_dir)
    history = io.load_run(run_dir) if history is None else history
    a0 = a0_factor * float(history.series["maxk"][0])
    res = blowup_analysis(history, a0, rho, window)
    files = []
    entries = []
    ti = res["type"]
    for f, fit, ray, delta in zip(res["frames"], res["fits"], res["rays"], ti.delta):
        name = f"frames/{f.j:02d}.csv"
        rows = np.column_stack([np.arange(len(f.nodes)), f.nodes, f.k, f.nu, f.p])
        files.append(io.write_table(out_dir / name, io.FRAME_COLUMNS, rows))
        entries.append({
            "j": f.j, "file": name, "a": f.a, "t": f.t, "step": f.step, "center": f.center,
            "theta": fit.theta, "c": fit.c, "residual": fit.residual, "r": f.r, "delta": delta,
            "opening_integral": ray.opening_integral, "max_k": ray.max_k, "is_ray": ray.is_ray,
        })
    files.append(io.write_json(out_dir / "fits.json", {"frames": entries}))
    summary = {
        "a0": a0,
        "a0_factor": a0_factor,
        "rho": rho,
        "window": window,
        "n_frames": len(entries),
        "T_hat": ti.T_hat,
        "delta_growth": ti.growth,
        "r_growth": float(res["r"][-1] / res["r"][0]),
        "verdicts": res["verdicts"],
    }
    files.append(io.write_json(out_dir / "blowup.json", summary))
    return summary, files


def blowup_ok(summary: dict, cfg: RunConfig) -> bool:
    v = summary["verdicts"]
    checks = []
    if cfg.blowup.assert_type_ii:
        checks.append(v["type_ii"] is True)
    if cfg.blowup.assert_r_growth:
        checks.append(v["r_unbounded_trend"] is True)
    if cfg.blowup.assert_reaper:
        checks += [v["final_fit_residual_ok"], v["final_fit_speed_ok"], v["residual_nonincreasing_last4"] is True]
    return all(checks)


def _progress(step, t, maxA):
    log.info("step %d  t=%.8g  max|A|=%.6g", step, t, maxA)


# -- pipeline ---------------------------------------------------------------


def _hashes(files, root: Path) -> dict:
    return {str(Path(f).relative_to(root)).replace("\\", "/"): io.sha256(f) for f in sorted(set(map(Path, files)))}


def pipeline(cfg: RunConfig, out_dir, strict: bool = False) -> int:
    """seed -> run -> verify -> blowup -> plots; writes manifest.json, returns the exit status."""
    out = Path(out_dir)
    stages: dict[str, dict] = {}
    status = EXIT_OK
    history = None

    def record(name, files, ok=True, **extra):
        stages[name] = {"status": "ok" if ok else "failed", "files": _hashes(files, out), **extra}

    try:
        seed, files = stage_seed(cfg, out / "seed")
        record("seed", files)
        history, files = stage_run(cfg, seed, out / "run")
        ok = history.termination == "curvature_blowup"
        record("run", files, ok, termination=history.termination)
        if not ok:
            status = EXIT_VERDICT
    except (CurveError, ValueError) as exc:
        stages.setdefault("seed", {"status": "failed", "error": str(exc), "files": {}})
        stages.setdefault("run", {"status": "failed", "error": str(exc), "files": {}})
        status = EXIT_STAGE

    if history is not None:
        if cfg.monitors.enabled:
            report, files = stage_verify(out / "run", out / "verify", history)
            record("verify", files, report.ok)
            if not report.ok:
                status = max(status, EXIT_VERDICT)
        else:
            stages["verify"] = {"status": "skipped", "files": {}}
        if cfg.blowup.enabled:
            try:
                summary, files = stage_blowup(out / "run", cfg.blowup.a0_factor, cfg.blowup.rho,
                                              cfg.blowup.window, out / "blowup", history)
                ok = blowup_ok(summary, cfg)
                record("blowup", files, ok, verdicts=summary["verdicts"])
                if not ok:
                    status = max(status, EXIT_VERDICT)
            except BlowupError as exc:
                stages["blowup"] = {"status": "failed", "error": str(exc), "files": {}}
                status = EXIT_STAGE
        else:
            stages["blowup"] = {"status": "skipped", "files": {}}
    if cfg.plots.enabled and history is not None:
        files = emit_plots(out / "run", out / "plots", out / "blowup", cfg.plots.max_curves)
        ok = len(files) == 3 or not strict
        record("plots", files, ok)
        if not ok:
            status = max(status, EXIT_VERDICT)
    else:
        stages["plots"] = {"status": "skipped", "files": {}}

    manifest = {
        "schema_version": io.SCHEMA_VERSION,
        "csv_schemas": {
            "run/series.csv": list(history.series) if history is not None else [],
            "run/snapshots/*.csv": list(io.SNAPSHOT_COLUMNS),
            "seed/seed.csv": list(io.SNAPSHOT_COLUMNS),
            "blowup/frames/*.csv": list(io.FRAME_COLUMNS),
        },
        "config": cfg.to_dict(),
        "stages": stages,
        "exit_status": status,
    }
    io.write_json(out / "manifest.json", manifest)
    return status


def _sweep_one(path: str, out: str, strict: bool) -> int:
    return pipeline(parse_config(path), out, strict)


def sweep(paths, out_dir, strict: bool = False, workers: int | None = None) -> int:
    """Independent pipelines in parallel processes; returns the worst exit status."""
    out = Path(out_dir)
    for p in paths:  # validate everything before starting
        parse_config(p)
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) != len(stems):
        raise ConfigError("sweep config file names must be distinct")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        jobs = {s: pool.submit(_sweep_one, str(p), str(out / s), strict) for p, s in zip(paths, stems)}
        status = {s: j.result() for s, j in jobs.items()}
    io.write_json(out / "sweep.json", {"runs": status})
    return max(status.values(), default=EXIT_OK)


# -- argument parsing -------------------------------------------------------


def _common(p: argparse.ArgumentParser, top: bool):
    d = None if top else argparse.SUPPRESS
    p.add_argument("--config", metavar="PATH", default=d, help="JSON run configuration")
    p.add_argument("--out", metavar="DIR", default=d, help="output directory")
    p.add_argument("--strict", action="store_true", default=False if top else argparse.SUPPRESS,
                   help="treat skipped outputs as failures")
    p.add_argument("--dry-run", action="store_true", default=False if top else argparse.SUPPRESS,
                   help="validate the configuration and write nothing")
    p.add_argument("-v", "--verbose", action="store_true", default=False if top else argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecsflow", description="Equivariant curve shortening flow experiments.")
    _common(parser, True)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        _common(p, False)
        return p

    def seed_flags(p):
        p.add_argument("--seed", dest="seed_kind", choices=["whitney", "perturbed_whitney", "circle"])
        p.add_argument("--m", type=int)
        p.add_argument("--n-nodes", type=int)
        p.add_argument("--radius", type=float, help="circle radius")
        p.add_argument("--eps", type=float, help="perturbation amplitude")

    p = add("seed", "build and validate a seed curve")
    seed_flags(p)
    p = add("run", "evolve a seed until blow-up")
    seed_flags(p)
    p.add_argument("--cfl", type=float)
    p.add_argument("--a-stop", type=float, help="absolute max|A| stop threshold")
    p.add_argument("--a-stop-factor", type=float, help="stop threshold relative to the initial max|A|")
    p.add_argument("--t-max", type=float)
    p.add_argument("--out-dir", metavar="DIR")
    p.add_argument("--rho", type=float, help="capture spacing; snapshots are stored at a0 rho^j")
    p.add_argument("--a0", type=float, help="first capture level relative to the initial max k")
    p = add("verify", "check monotonicity and conservation laws on a run")
    p.add_argument("run_dir")
    p = add("blowup", "capture rescaled frames and fit grim reapers")
    p.add_argument("run_dir")
    p.add_argument("--window", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--a0", type=float, help="first capture level relative to the initial max k")
    p = add("plot", "write SVG figures for a run directory")
    p.add_argument("run_dir")
    p = add("pipeline", "seed, run, verify, blowup and plots with a manifest")
    p.add_argument("--sweep", nargs="+", metavar="CONFIG",
                   help="run several configs concurrently, each under OUT/<config stem>")
    return parser


def _overrides(args) -> dict:
    d: dict = {}
    pairs = [
        ("seed_kind", ("seed", "kind")), ("m", ("flow", "m")), ("n_nodes", ("seed", "N")),
        ("radius", ("seed", "R")), ("eps", ("seed", "eps")), ("cfl", ("flow", "cfl")),
        ("a_stop", ("flow", "a_stop")), ("a_stop_factor", ("flow", "a_stop_factor")),
        ("t_max", ("flow", "t_max")), ("window", ("blowup", "window")), ("rho", ("blowup", "rho")),
        ("a0", ("blowup", "a0_factor")),
    ]
    for attr, (section, key) in pairs:
        v = getattr(args, attr, None)
        if v is not None:
            d.setdefault(section, {})[key] = v
    return d


def resolve_config(args) -> RunConfig:
    base = parse_config(args.config).to_dict() if args.config else {}
    for section, values in _overrides(args).items():
        base.setdefault(section, {}).update(values)
    out = getattr(args, "out_dir", None) or args.out
    if out:
        base["out_dir"] = out
    return config_from_dict(base)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.dry_run:
        sys.stdout.write(cfg.to_json())
        return EXIT_OK
    out = Path(cfg.out_dir)
    try:
        if args.command == "seed":
            curve, files = stage_seed(cfg, out)
            print(f"wrote {len(files)} files to {out}")
            return EXIT_OK
        if args.command == "run":
            seed = build_seed(cfg.seed_spec())
            history, files = stage_run(cfg, seed, out)
            print(f"{history.termination}: {history.n_samples} samples, t = {history.series['t'][-1]:.10g}")
            return EXIT_OK if history.termination == "curvature_blowup" else EXIT_VERDICT
        if args.command == "verify":
            report, _ = stage_verify(args.run_dir, args.out)
            sys.stdout.write(report.to_text())
            return EXIT_OK if report.ok else EXIT_VERDICT
        if args.command == "blowup":
            summary, _ = stage_blowup(args.run_dir, cfg.blowup.a0_factor, cfg.blowup.rho, cfg.blowup.window,
                                      Path(args.out) if args.out else None)
            print(json.dumps(io.clean_json(summary["verdicts"]), indent=2, sort_keys=True))
            return EXIT_OK if blowup_ok(summary, cfg) else EXIT_VERDICT
        if args.command == "plot":
            files = emit_plots(args.run_dir, Path(args.out) if args.out else None)
            for f in files:
                print(f)
            return EXIT_VERDICT if (args.strict and len(files) < 3) else EXIT_OK
        if args.command == "pipeline":
            if getattr(args, "sweep", None):
                return sweep(args.sweep, out, strict=args.strict)
            return pipeline(cfg, out, strict=args.strict)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CurveError, BlowupError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
