"""Command line: ``entroflow run | study | list-scenarios``.

Exit codes: 0 all checks pass, 1 a check failed (or a warning under
--strict), 2 configuration error, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .catalog import bundled_scenarios, expand_batch, resolve
from .config import ConfigError, load_config
from .report import _jsonable, emit_outputs
from .runners import STUDY_KINDS, convergence_study, run_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
DEFAULT_OUT = "entroflow-out"


def _output_root(cfg, cli_out: str | None) -> Path:
    if cli_out:
        return Path(cli_out)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get("ENTROFLOW_OUT") or DEFAULT_OUT)


def _collect(args) -> list[Path]:
    refs = list(args.scenarios)
    if args.config:
        refs.append(args.config)
    if not refs:
        raise ConfigError(["give a scenario name or --config PATH"])
    paths = []
    for ref in refs:
        p = resolve(ref)
        batch = expand_batch(p)
        paths.extend(batch if batch is not None else [p])
    return paths


def study_problems(cfg) -> list[str]:
    out = []
    if cfg.flow_kind not in STUDY_KINDS:
        out.append(f"flow_kind: no convergence study for {cfg.flow_kind}")
    if len(cfg.ladder) < 3:
        out.append("ladder: a convergence study needs >= 3 levels")
    return out


def _run_one(job):
    path, overrides, out, strict = job
    cfg = load_config(path, overrides)
    rep = run_scenario(cfg)
    target = _output_root(cfg, out) / cfg.name
    emit_outputs(rep, target)
    return rep.summary_lines() + [f"  -> {target}"], rep.exit_code(strict)


def _study_one(job):
    path, overrides, out, strict = job
    cfg = load_config(path, overrides)
    res = convergence_study(cfg)
    target = _output_root(cfg, out) / cfg.name
    target.mkdir(parents=True, exist_ok=True)
    (target / "study.json").write_text(json.dumps(_jsonable(res), indent=2) + "\n")
    lines = [f"== study {cfg.name}"]
    for name, e in res["identities"].items():
        order = "-" if e.get("order") is None else f"{e['order']:.3f}"
        status = "PASS" if e["passed"] else "FAIL"
        nominal = "" if e["nominal"] is None else f" (nominal {e['nominal']})"
        errs = ", ".join(f"{v:.3e}" for v in e["errors"])
        lines.append(f"  {status} {name}: {e['status']}, order {order}{nominal}; errors [{errs}]")
    lines.append(f"  -> {target / 'study.json'}")
    code = EXIT_OK if res["passed"] else EXIT_FAIL
    if strict and any(e["status"] == "inconclusive" for e in res["identities"].values()):
        code = EXIT_FAIL
    return lines, code


def _dispatch(fn, args) -> int:
    try:
        paths = _collect(args)
        # validate everything up front so config errors are reported together
        errors = []
        for p in paths:
            try:
                cfg = load_config(p, args.override)
            except ConfigError as exc:
                errors += [f"{p}: {e}" for e in exc.errors]
                continue
            if fn is _study_one:
                errors += [f"{p}: {e}" for e in study_problems(cfg)]
        if errors:
            raise ConfigError(errors)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    jobs = [(p, tuple(args.override), args.out, args.strict) for p in paths]
    try:
        if args.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                results = list(pool.map(fn, jobs))
        else:
            results = [fn(j) for j in jobs]
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    codes = []
    for lines, code in results:
        print("\n".join(lines))
        codes.append(code)
    if EXIT_ABORT in codes:
        return EXIT_ABORT
    return EXIT_FAIL if EXIT_FAIL in codes else EXIT_OK


def _list(args) -> int:
    for name, path in bundled_scenarios().items():
        try:
            cfg = load_config(path)
            print(f"{name:22s} {cfg.flow_kind:20s} {cfg.description}")
        except ConfigError as exc:
            print(f"{name:22s} INVALID: {exc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entroflow", description="Entropy checks on moving domains.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run scenarios and write series/report files"),
                        ("study", "run the resolution-ladder convergence study")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("scenarios", nargs="*", help="bundled scenario names or YAML paths")
        p.add_argument("--config", metavar="PATH", help="scenario or batch YAML file")
        p.add_argument("--out", metavar="DIR", help="output root (default $ENTROFLOW_OUT or ./entroflow-out)")
        p.add_argument("--workers", type=int, default=1, metavar="N", help="scenarios run concurrently")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted config override, value parsed as YAML (repeatable)")
        p.add_argument("--strict", action="store_true", help="treat warnings as failures")
    sub.add_parser("list-scenarios", help="list bundled scenarios")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        return _list(args)
    if args.workers < 1:
        print("--workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return _dispatch(_run_one if args.command == "run" else _study_one, args)


if __name__ == "__main__":
    sys.exit(main())
