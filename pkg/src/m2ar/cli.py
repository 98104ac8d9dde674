"""``m2ar`` command line: validate, run, fixture, inspect, step.

Exit codes: 0 success, 1 validation errors, 2 parse or usage errors,
3 internal runtime error, 4 workflow did not complete by stop time.
Data files go to the paths given on the command line; stdout only carries
human-readable summaries. ``M2AR_LOG`` (error, warn, info, debug) sets the
stderr log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence, TextIO

from . import engine
from .arwfml import validate
from .bundle_io import read_bundle_file, serialize_bundle
from .engine import Advance, Click, Detect, Observe, Phase
from .errors import BundleFormatError, IoFailure, M2arError, ScenarioError, TimeRegression, ValidationFailed
from .fixtures import FIXTURES
from .geometry import Pose
from .meta2 import Bundle, InstanceRef, resolve
from .scenario import read_scenario_file, scenario_to_json

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3
EXIT_INCOMPLETE = 4

log = logging.getLogger("m2ar")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("M2AR_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s", force=True)


def _read_bundle(path) -> Optional[Bundle]:
    try:
        return read_bundle_file(path)
    except (BundleFormatError, IoFailure) as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return None


def _print_diagnostics(diags, out: TextIO) -> None:
    for d in diags:
        print(d.format(), file=out)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    bundle = _read_bundle(args.bundle)
    if bundle is None:
        return EXIT_USAGE
    diags = validate(bundle)
    _print_diagnostics(diags, sys.stdout)
    errors = sum(d.is_error for d in diags)
    print(f"{errors} error(s), {len(diags) - errors} warning(s)")
    return EXIT_INVALID if errors else EXIT_OK


def cmd_run(args) -> int:
    started = time.perf_counter()
    bundle = _read_bundle(args.bundle)
    if bundle is None:
        return EXIT_USAGE
    try:
        scenario = read_scenario_file(args.scenario)
    except ScenarioError as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.stop_t is not None:
        scenario = scenario.truncated(args.stop_t)

    try:
        result = engine.run(bundle, scenario.events, scenario.stop_t, args.flowscene)
    except ValidationFailed as exc:
        _print_diagnostics(exc.diagnostics, sys.stdout)
        return EXIT_INVALID
    except M2arError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        log.exception("engine crashed")
        return EXIT_INTERNAL

    try:
        Path(args.trace).write_text(engine.trace_to_jsonl(result.trace), encoding="utf-8", newline="\n")
        Path(args.snapshot).write_text(engine.snapshot_to_json(result.snapshot), encoding="utf-8", newline="\n")
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

    phase = result.state.phase
    print(f"trace: {args.trace}")
    print(f"snapshot: {args.snapshot}")
    print(f"phase: {phase.value} at t={result.state.clock}")
    print(f"records: {len(result.trace)}  duration: {time.perf_counter() - started:.3f}s")
    for note in result.state.notes:
        print(f"note: {note}")
    if phase is Phase.COMPLETED:
        return EXIT_OK
    if phase is Phase.FAILED:
        return EXIT_INTERNAL
    if phase is Phase.AWAIT_ORIGIN:
        print("stuck: awaiting origin")
    else:
        print(f"stuck: workflow still running ({len(result.state.tokens)} token(s) pending)")
    return EXIT_INCOMPLETE


def cmd_fixture(args) -> int:
    if args.name not in FIXTURES:
        print(f"error: unknown fixture {args.name!r}; known: {', '.join(sorted(FIXTURES))}", file=sys.stderr)
        return EXIT_USAGE
    make_bundle, make_scenario = FIXTURES[args.name]
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        bundle_path = out / f"{args.name}.m2ar.json"
        scenario_path = out / f"{args.name}.scenario.json"
        bundle_path.write_bytes(serialize_bundle(make_bundle()))
        scenario_path.write_bytes(scenario_to_json(make_scenario()).encode("utf-8"))
    except OSError as exc:
        print(f"error: cannot write fixture: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    print(f"bundle: {bundle_path}")
    print(f"scenario: {scenario_path}")
    return EXIT_OK


def _refs(model):
    for inst in (*model.class_instances, *model.relationclass_instances):
        for name in sorted(inst.attributes):
            value = inst.attributes[name]
            if isinstance(value, InstanceRef):
                yield inst.id, name, value
    for port in model.port_instances:
        if port.target is not None:
            yield port.id, port.port, port.target


def _resolves(bundle, ref) -> bool:
    try:
        resolve(bundle, ref)
        return True
    except M2arError:
        return False


def cmd_inspect(args) -> int:
    bundle = _read_bundle(args.bundle)
    if bundle is None:
        return EXIT_USAGE
    models = bundle.models
    if args.model is not None:
        models = tuple(m for m in models if m.id == args.model)
        if not models:
            print(f"error: no model {args.model!r}", file=sys.stderr)
            return EXIT_USAGE
    print(f"metamodel: {bundle.metamodel_name} (format {bundle.format_version})")
    print(f"{len(bundle.models)} models, {len(bundle.assets)} assets")
    for model in models:
        refs = list(_refs(model))
        ok = sum(_resolves(bundle, r) for _, _, r in refs)
        print(
            f"{model.id}  {model.scene_type}  {model.name!r}  classes={len(model.class_instances)}"
            f" relations={len(model.relationclass_instances)} ports={len(model.port_instances)}"
            f" refs resolved={ok} unresolved={len(refs) - ok}"
        )
        if args.model is not None:
            for inst in model.class_instances:
                print(f"  class     {inst.id}  {inst.metaclass}  {inst.display_name!r}")
            for rel in model.relationclass_instances:
                print(f"  relation  {rel.id}  {rel.relationclass}  {rel.from_instance} -> {rel.to_instance}")
            for port in model.port_instances:
                print(f"  port      {port.id}  {port.port}  owner={port.owner}")
            for owner, name, ref in refs:
                status = "ok" if _resolves(bundle, ref) else "UNRESOLVED"
                print(f"  ref       {owner}.{name} -> {ref}  [{status}]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# interactive stepping
# ---------------------------------------------------------------------------

STEP_HELP = (
    "commands: detect <id> [x y z [qx qy qz qw [sx sy sz]]] | click <id> | observer <key> <value>"
    " | advance <t> | snapshot | trace | help | quit"
)


def _parse_pose(numbers: Sequence[str]) -> Optional[Pose]:
    if not numbers:
        return None
    values = [float(x) for x in numbers]
    if len(values) not in (3, 7, 10):
        raise ValueError("pose takes 3, 7 or 10 numbers")
    position = tuple(values[:3])
    rotation = tuple(values[3:7]) if len(values) >= 7 else (0.0, 0.0, 0.0, 1.0)
    scale = tuple(values[7:10]) if len(values) == 10 else (1.0, 1.0, 1.0)
    return Pose(position, rotation, scale)


def _event_from_command(words: list[str], clock: float, seq: int):
    cmd, rest = words[0], words[1:]
    if cmd == "detect" and rest:
        return Detect(clock, rest[0], _parse_pose(rest[1:]), seq)
    if cmd == "click" and len(rest) == 1:
        return Click(clock, rest[0], seq)
    if cmd == "observer" and len(rest) == 2:
        return Observe(clock, rest[0], rest[1], seq)
    if cmd == "advance" and len(rest) == 1:
        return Advance(float(rest[0]), seq)
    raise ValueError(f"bad arguments for {cmd!r}")


def step_session(state: engine.EngineState, lines, out: TextIO, interactive: bool = False) -> engine.EngineState:
    """Drive ``state`` from text commands; usable with any iterable of lines."""
    seq = 0
    if interactive:
        print(STEP_HELP, file=out)
    print(f"phase: {state.phase.value}", file=out)
    for line in lines:
        words = line.split()
        if not words or words[0].startswith("#"):
            continue
        cmd = words[0]
        if cmd in ("quit", "exit"):
            break
        if cmd == "help":
            print(STEP_HELP, file=out)
        elif cmd == "trace":
            out.write(engine.trace_to_jsonl(state.trace))
        elif cmd == "snapshot":
            out.write(engine.snapshot_to_json(engine.snapshot(state)))
        elif cmd in ("detect", "click", "observer", "advance"):
            try:
                event = _event_from_command(words, state.clock, seq)
                seen = len(state.trace)
                state = engine.inject(state, event)
            except (ValueError, TimeRegression) as exc:
                print(f"error: {exc}", file=out)
                continue
            seq += 1
            for rec in state.trace[seen:]:
                print(f"  t={rec.t} {rec.kind.value} {rec.subject} {rec.details}".rstrip(), file=out)
            if state.phase is Phase.AWAIT_ORIGIN:
                print(f"awaiting origin detection ({state.program.origin_id})", file=out)
            print(f"phase: {state.phase.value}  clock: {state.clock}", file=out)
        else:
            print(f"unknown command {cmd!r}; {STEP_HELP}", file=out)
    return state


def cmd_step(args) -> int:
    bundle = _read_bundle(args.bundle)
    if bundle is None:
        return EXIT_USAGE
    try:
        state = engine.load(bundle, args.flowscene)
    except ValidationFailed as exc:
        _print_diagnostics(exc.diagnostics, sys.stdout)
        return EXIT_INVALID
    except M2arError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    step_session(state, sys.stdin, sys.stdout, interactive=sys.stdin.isatty())
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="m2ar", description="ARWFML bundle validator and workflow simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a bundle against the ARWFML rules")
    p.add_argument("bundle")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="execute a FlowScene against a scenario")
    p.add_argument("bundle")
    p.add_argument("--scenario", required=True)
    p.add_argument("--flowscene")
    p.add_argument("--trace", required=True, help="output path for the JSON Lines trace")
    p.add_argument("--snapshot", required=True, help="output path for the final scene snapshot")
    p.add_argument("--stop-t", type=float, dest="stop_t", help="override the scenario stop time")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fixture", help="write a built-in bundle and its scenario")
    p.add_argument("name")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("inspect", help="list models, instance counts and references")
    p.add_argument("bundle")
    p.add_argument("--model")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("step", help="drive a FlowScene with line commands from stdin")
    p.add_argument("bundle")
    p.add_argument("--flowscene")
    p.set_defaults(func=cmd_step)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
