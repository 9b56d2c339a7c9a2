"""Command-line entry point: check, translate, analyze, verify, repair, list-rules."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import tomli

from .analysis import DEFAULT_STATE_BUDGET, StateBudgetExceeded, analyze_space, explore
from .checker import check, errors_to_json, list_rules
from .diagnostics import VerdictReport, finding_to_json
from .expr import value_to_json
from .repair import (
    BackendUnavailable,
    BudgetExhausted,
    LoopConfig,
    ReplayBackend,
    backend_from_descriptor,
    run_loop,
)
from .translate import translate
from .verify import load_text, verify_artifact

EXIT_OK, EXIT_STATIC, EXIT_BUG, EXIT_GOAL, EXIT_FAILURE, EXIT_USAGE = 0, 2, 3, 4, 5, 64
CONFIG_NAME = "cvnverify.toml"
CONFIG_KEYS = {"format", "state_budget", "goals_only", "replay", "backend", "generation_budget",
               "repair_budget", "timings", "verbose"}

log = logging.getLogger("cvnverify")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "text", "dot"))
    common.add_argument("--state-budget", type=int)
    common.add_argument("--goals-only", action="store_true", default=None)
    common.add_argument("--replay", metavar="DIR")
    common.add_argument("--backend", metavar="URL|CMD")
    common.add_argument("--config", metavar="PATH", help=f"defaults to ./{CONFIG_NAME} when present")
    common.add_argument("--timings", action="store_true", default=None, help="include stage timings in JSON")
    common.add_argument("-v", "--verbose", action="store_true", default=None)

    p = _Parser(prog="cvnverify", description="Verify and repair concurrency models written in CIR.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("check", "static checks only"),
                        ("translate", "emit the verification net"),
                        ("analyze", "explore the net and report bugs"),
                        ("verify", "check, translate, analyze and test goals"),
                        ("repair", "run the generate-verify-repair loop")):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("file", help="CIR file ('-' for stdin)")
        if name == "repair":
            sp.add_argument("--generation-budget", type=int)
            sp.add_argument("--repair-budget", type=int)
            sp.add_argument("--requirement", metavar="FILE",
                            help="generate the first artifact from this text instead of FILE")
    sub.add_parser("list-rules", parents=[common], help="print the rule catalogue")
    return p


def load_config(args) -> dict:
    path = Path(args.config) if args.config else Path(CONFIG_NAME)
    if not path.exists():
        if args.config:
            raise UsageError(f"config file {path} not found")
        return {}
    try:
        data = tomli.loads(path.read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    out = {}
    for k, v in data.items():
        key = k.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}: unknown key {k!r}")
        out[key] = v
    return out


def _settings(args) -> dict:
    conf = load_config(args)
    merged = {
        "format": "json", "state_budget": DEFAULT_STATE_BUDGET, "goals_only": False, "replay": None,
        "backend": None, "generation_budget": 5, "repair_budget": 5, "timings": False, "verbose": False,
    }
    merged.update(conf)
    for key in merged:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    if merged["format"] not in ("json", "text", "dot"):
        raise UsageError(f"unknown format {merged['format']!r}")
    if merged["format"] == "dot" and args.command != "translate":
        raise UsageError("--format dot is only available for translate")
    if merged["state_budget"] < 1:
        raise UsageError("--state-budget must be positive")
    return merged


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _emit(obj, text: str, fmt: str):
    if fmt == "json":
        sys.stdout.write(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(text)


def _errors_text(errors) -> str:
    if not errors:
        return "no static errors\n"
    return "".join(f"{e.anchor}: {e.code} [{e.severity}] {e.message}\n" for e in errors)


def cmd_check(args, s) -> int:
    artifact, errors = load_text(_read(args.file))
    if artifact is not None:
        errors = check(artifact)
    _emit({"errors": errors_to_json(errors)}, _errors_text(errors), s["format"])
    return EXIT_STATIC if errors else EXIT_OK


def cmd_translate(args, s) -> int:
    artifact, errors = load_text(_read(args.file))
    if artifact is not None:
        errors = check(artifact)
    if errors:
        _emit({"errors": errors_to_json(errors)}, _errors_text(errors), "text" if s["format"] == "dot" else s["format"])
        return EXIT_STATIC
    net, queries = translate(artifact)
    if s["format"] == "dot":
        sys.stdout.write(net.to_dot())
    else:
        obj = net.to_json()
        obj["goals"] = [{"id": q.goal_id, "completion": dict(q.completion), "availability": dict(q.availability),
                         "variables": {v: value_to_json(x) for v, x in q.variables}} for q in queries]
        text = "".join(f"{t.id}: {' + '.join(p for p, _ in t.inputs)} -> {' + '.join(p for p, _ in t.outputs)}\n"
                       for t in net.transitions)
        _emit(obj, f"places: {len(net.places)}\ntransitions: {len(net.transitions)}\n" + text, s["format"])
    return EXIT_OK


def cmd_analyze(args, s) -> int:
    artifact, errors = load_text(_read(args.file))
    if artifact is not None:
        errors = check(artifact)
    if errors:
        _emit({"errors": errors_to_json(errors)}, _errors_text(errors), s["format"])
        return EXIT_STATIC
    net, _ = translate(artifact)
    synthetic = tuple(f.name for f in artifact.functions.values() if f.synthetic)
    try:
        space = explore(net, s["state_budget"])
    except StateBudgetExceeded as exc:
        _emit({"failure": str(exc)}, f"failure: {exc}\n", s["format"])
        return EXIT_FAILURE
    a = analyze_space(space, synthetic)
    obj = {
        "states": len(space.states),
        "places": len(net.places),
        "transitions": len(net.transitions),
        "findings": [finding_to_json(f, net, synthetic) for f in a.findings],
        "livelock_immune": a.livelock_immune,
        "notes": a.notes,
    }
    text = f"states: {obj['states']}\n" + "".join(
        f"{f['kind']}: [{', '.join(f['trace'])}]\n" for f in obj["findings"]) + (
        "no findings\n" if not a.findings else "")
    _emit(obj, text, s["format"])
    return EXIT_BUG if a.definite else EXIT_OK


def cmd_verify(args, s) -> int:
    artifact, errors = load_text(_read(args.file))
    if artifact is None:
        report = VerdictReport(static_errors=errors)
    else:
        report = verify_artifact(artifact, s["state_budget"], s["goals_only"])
    _emit(report.to_json(timings=s["timings"]), report.to_text(), s["format"])
    if report.static_errors:
        return EXIT_STATIC
    if report.failure is not None:
        return EXIT_FAILURE
    if report.definite:
        return EXIT_BUG
    if report.unreachable_goals:
        return EXIT_GOAL
    return EXIT_OK


def cmd_repair(args, s) -> int:
    if s["replay"]:
        backend = ReplayBackend(s["replay"])
    else:
        backend = backend_from_descriptor(s["backend"])
    cfg = LoopConfig(s["generation_budget"], s["repair_budget"], s["state_budget"], backend)
    if args.requirement:
        transcript = run_loop(None, cfg, requirement=_read(args.requirement))
    else:
        transcript = run_loop(_read(args.file), cfg)
    _emit(transcript.to_json(), transcript.to_text(), s["format"])
    return EXIT_OK


def cmd_list_rules(args, s) -> int:
    rules = list_rules()
    obj = [{"code": r.code, "category": r.category, "description": r.description,
            "autofixable": r.autofixable, "stage": r.stage} for r in rules]
    text = "".join(f"{r.code}  {'fix' if r.autofixable else '   '}  {r.description}\n" for r in rules)
    _emit(obj, text, s["format"])
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "translate": cmd_translate,
    "analyze": cmd_analyze,
    "verify": cmd_verify,
    "repair": cmd_repair,
    "list-rules": cmd_list_rules,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        s = _settings(args)
    except UsageError as exc:
        sys.stderr.write(f"cvnverify: {exc}\n")
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if s["verbose"] else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, s)
    except UsageError as exc:
        sys.stderr.write(f"cvnverify: {exc}\n")
        return EXIT_USAGE
    except BudgetExhausted as exc:
        _emit(exc.transcript.to_json(), exc.transcript.to_text(), s["format"])
        log.error("%s", exc)
        return EXIT_FAILURE
    except BackendUnavailable as exc:
        log.error("backend unavailable: %s", exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
