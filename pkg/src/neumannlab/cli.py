"""Command line entry point.

::

    neumannlab run CONFIG [--jobs N] [--out DIR] [--seed S]
    neumannlab list [--json]
    neumannlab mesh BUILDER_CONFIG --out FILE

Exit codes: 0 all checks passed, 1 some check failed (or an experiment
raised), 2 invalid configuration or usage.  ``run`` writes
``DIR/<config digest>/`` containing ``summary.json``, one directory per
experiment with ``report.json`` and CSV tables, and ``metadata.json`` (the
only file with timestamps and wall times).
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import logging
import platform
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .assembly import ProblemError
from .config import ConfigError, build_mesh, load_config, validate_mesh_config
from .experiments.registry import EXPERIMENTS, REGISTRY, problem_specs
from .experiments.report import REPORT_SCHEMA, EstimateReport

log = logging.getLogger("neumannlab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _run_one(name: str, params: dict, tolerances: dict, seed: int, problem) -> EstimateReport:
    """Worker body; exceptions become a failed report so the run completes."""
    log.info("running %s", name)
    try:
        return REGISTRY[name].run(params, tolerances, seed, problem)
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        rep = EstimateReport(name=name)
        rep.check("completed", False)
        rep.notes.append(f"{type(exc).__name__}: {exc}")
        rep.notes.append(traceback.format_exc(limit=3))
        return rep


def _preflight(cfg) -> None:
    """Build every configured problem once so bad input fails before any experiment runs."""
    problem = cfg.problem_inputs()
    if not problem:
        return
    seen = set()
    for req in cfg.experiments:
        exp = REGISTRY[req.name]
        if not exp.takes_problem:
            continue
        levels = problem.get("levels") or req.params.get("levels") or exp.params.get("levels")
        levels = tuple(levels or [req.params.get("k", exp.params.get("k"))])
        if levels in seen:
            continue
        seen.add(levels)
        try:
            problem_specs(problem, levels=levels)
        except ProblemError as exc:
            raise ConfigError("coefficients", str(exc)) from None


def _write_report(dirpath: Path, rep: EstimateReport) -> None:
    dirpath.mkdir(parents=True, exist_ok=True)
    (dirpath / "report.json").write_text(rep.to_json())
    for fname, text in sorted(rep.tables.items()):
        (dirpath / fname).write_text(text)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, REGISTRY)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed", "must be a non-negative integer")
            cfg = dataclasses.replace(cfg, seed=args.seed)
        _preflight(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    jobs = max(1, int(args.jobs))
    root = Path(args.out if args.out is not None else cfg.output) / cfg.digest()
    problem = cfg.problem_inputs() or None
    started = _dt.datetime.now(_dt.timezone.utc)
    work = [(r.name, r.params, r.tolerances, cfg.seed, problem) for r in cfg.experiments]
    if jobs == 1 or len(work) == 1:
        reports = [_run_one(*w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            futures = [pool.submit(_run_one, *w) for w in work]
            reports = [f.result() for f in futures]
    finished = _dt.datetime.now(_dt.timezone.utc)
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.json").write_text(cfg.to_json() + "\n")
    summary = []
    for i, rep in enumerate(reports):
        sub = f"{i:02d}-{rep.name}"
        _write_report(root / sub, rep)
        summary.append({"experiment": rep.name, "directory": sub, "passed": rep.passed,
                        "failed_checks": rep.failed_checks()})
        print(rep.line())
    ok = all(r.passed for r in reports)
    doc = {"schema": REPORT_SCHEMA, "config_digest": cfg.digest(), "passed": ok, "experiments": summary}
    (root / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    meta = {"started": started.isoformat(), "finished": finished.isoformat(), "jobs": jobs,
            "version": __version__, "python": platform.python_version(),
            "runtime": {f"{i:02d}-{r.name}": round(r.runtime, 3) for i, r in enumerate(reports)}}
    (root / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"run directory: {root}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_list(args) -> int:
    if args.json:
        doc = [{k: v for k, v in e.describe().items()} for e in EXPERIMENTS]
        print(json.dumps(doc, indent=2, sort_keys=True, default=str))
        return EXIT_OK
    width = max(len(e.name) for e in EXPERIMENTS)
    for e in EXPERIMENTS:
        print(f"{e.name:<{width}}  {e.description}  [{e.anchor}]")
    return EXIT_OK


def cmd_mesh(args) -> int:
    try:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError("", f"cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"{args.config}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if isinstance(doc, dict) and "mesh" in doc:
            doc = doc["mesh"]
        validate_mesh_config(doc)
        mesh = build_mesh(doc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(mesh.to_json())
    print(f"{mesh.n_vertices} vertices, {mesh.n_cells} cells, volume {mesh.volume:.12g}, digest {mesh.digest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neumannlab", description="Neumann problem experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the experiments of a JSON config")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=1, help="parallel experiment workers")
    p.add_argument("--out", default=None, help="output root (default: the config's 'output')")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("list", help="list the registered experiments")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_list)
    p = sub.add_parser("mesh", help="build a mesh from a builder config and save it as JSON")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mesh)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
