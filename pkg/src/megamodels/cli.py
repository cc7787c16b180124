"""Command-line front end.

Subcommands:

* ``validate FILE...`` prints one diagnostic per line
  (``CODE file:line:col message``); exit 0 iff the files are clean.
* ``run FILE... --megamodel M --entry E [--runs N] [--scenario script.json]
  [--clock wall|logical] [--trace out.jsonl] [--seed K]`` executes the
  megamodel against the mock managed system and prints one summary line
  per run (``run <i>: <final|FAULT code>``).
* ``dump-canonical FILE...`` prints the canonical serialization.
* ``serve [--host H] [--port P]`` starts the HTTP service.

Exit codes: 0 success, 1 semantic or runtime failure, 2 usage/load failure.
The batch subcommands run fully in-process on a fresh engine, so trace
files are reproducible byte for byte under the logical clock.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import harness, textio
from .errors import ERR_DUP_NAME, Diagnostic, MegamodelError, ParseError, SourceSpan
from .interpreter import export_trace
from .metamodel import MegamodelDef, validate

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


@dataclass
class RunConfig:
    files: list[str]
    megamodel: str
    entry: str
    runs: int = 1
    scenario: str | None = None
    clock: str = "wall"
    trace_out: str | None = None
    seed: int = 0
    max_steps: int | None = field(default=100_000)


def _load_files(paths: list[str]) -> list[MegamodelDef]:
    defs: list[MegamodelDef] = []
    seen: set[str] = set()
    for path in paths:
        text = Path(path).read_text(encoding="utf-8")
        for def_ in textio.parse_megamodel(text, path):
            if def_.name in seen:
                raise ParseError(ERR_DUP_NAME, f"megamodel {def_.name!r} defined in more than one file", def_.span)
            seen.add(def_.name)
            defs.append(def_)
    return defs


def _span_of(defs: list[MegamodelDef], diagnostic: Diagnostic) -> SourceSpan | None:
    for def_ in defs:
        if def_.name != diagnostic.megamodel:
            continue
        element = (
            def_.model(diagnostic.element)
            or def_.operation(diagnostic.element)
            or def_.transition(diagnostic.element)
        )
        if element is not None and element.span is not None:
            return element.span
        return def_.span
    return None


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        defs = _load_files(args.files)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"{exc.code} {exc.span or '<input>'} {exc.raw_message}", file=sys.stderr)
        return EXIT_USAGE
    registry = {d.name: d for d in defs}
    clean = True
    for def_ in defs:
        for diagnostic in validate(def_, registry):
            clean = False
            span = _span_of(defs, diagnostic) or SourceSpan("<input>", 1, 1)
            print(f"{diagnostic.code} {span} {diagnostic.megamodel}/{diagnostic.element}: {diagnostic.message}")
    return EXIT_OK if clean else EXIT_FAILURE


def cmd_run(config: RunConfig) -> int:
    try:
        defs = _load_files(config.files)
        script = harness.load_script(config.scenario) if config.scenario else []
        env, mock = harness.build_runtime(defs, clock=config.clock, seed=config.seed)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, MegamodelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        for diagnostic in getattr(exc, "diagnostics", []):
            print(str(diagnostic), file=sys.stderr)
        return EXIT_USAGE

    trace_lines: list[str] = []
    failed = False
    for i in range(1, config.runs + 1):
        harness.apply_script_events(script, i, mock, env)
        try:
            result = env.run(config.megamodel, config.entry, max_steps=config.max_steps)
        except MegamodelError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        if result.ok:
            print(f"run {i}: {result.final}")
        else:
            failed = True
            print(f"run {i}: FAULT {result.fault}")
        trace_lines.append(export_trace(result))

    if config.trace_out:
        Path(config.trace_out).write_text("".join(trace_lines), encoding="utf-8")
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_dump_canonical(args: argparse.Namespace) -> int:
    try:
        defs = _load_files(args.files)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"{exc.code} {exc.span or '<input>'} {exc.raw_message}", file=sys.stderr)
        return EXIT_USAGE
    registry = {d.name: d for d in defs}
    diagnostics = [d for def_ in defs for d in validate(def_, registry)]
    if diagnostics:
        for diagnostic in diagnostics:
            print(str(diagnostic), file=sys.stderr)
        return EXIT_FAILURE
    sys.stdout.write(textio.serialize(defs))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="megamodels", description="Executable megamodel engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate .mm files")
    p_validate.add_argument("files", nargs="+")

    p_run = sub.add_parser("run", help="run a megamodel against the mock managed system")
    p_run.add_argument("files", nargs="+")
    p_run.add_argument("--megamodel", required=True)
    p_run.add_argument("--entry", required=True)
    p_run.add_argument("--runs", type=int, default=1)
    p_run.add_argument("--scenario", help="JSON event script")
    p_run.add_argument("--clock", choices=("wall", "logical"), default="wall")
    p_run.add_argument("--trace", dest="trace_out", help="write the JSONL trace here")
    p_run.add_argument("--seed", type=int, default=0)

    p_dump = sub.add_parser("dump-canonical", help="print the canonical form of .mm files")
    p_dump.add_argument("files", nargs="+")

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args)
    if args.command == "run":
        if args.runs < 1:
            parser.error("--runs must be at least 1")
        config = RunConfig(
            files=args.files,
            megamodel=args.megamodel,
            entry=args.entry,
            runs=args.runs,
            scenario=args.scenario,
            clock=args.clock,
            trace_out=args.trace_out,
            seed=args.seed,
        )
        return cmd_run(config)
    if args.command == "dump-canonical":
        return cmd_dump_canonical(args)
    if args.command == "serve":
        return cmd_serve(args)
    parser.error(f"unknown command {args.command!r}")
    return EXIT_USAGE  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
