"""One verification pass: parse, check, translate, explore, analyze, then goals."""

from __future__ import annotations

import time
from typing import List, Optional, Tuple

from .analysis import DEFAULT_STATE_BUDGET, StateBudgetExceeded, analyze_space, check_goals, explore
from .checker import CheckError, check
from .cir import CirArtifact
from .cirtext import CirParseError, parse_cir
from .diagnostics import VerdictReport, build_diag, render_goal_violation, select_bug
from .translate import translate


def parse_errors(exc: CirParseError) -> List[CheckError]:
    return [CheckError(e.code, "error", f"line {e.line}", e.message) for e in exc.errors]


def load_text(text: str) -> Tuple[Optional[CirArtifact], List[CheckError]]:
    """Parse leniently so duplicate sids reach the checker (where they are autofixable)."""
    try:
        return parse_cir(text, strict=False), []
    except CirParseError as exc:
        return None, parse_errors(exc)


def statement_count(artifact: CirArtifact) -> int:
    return sum(len(f.body) for f in artifact.user_functions())


def verify_artifact(artifact: CirArtifact, state_budget: int = DEFAULT_STATE_BUDGET,
                    goals_only: bool = False, round_no: Optional[int] = None) -> VerdictReport:
    clock = time.perf_counter
    timings = {}
    t0 = clock()
    errors = check(artifact)
    timings["check_ms"] = (clock() - t0) * 1000
    if errors:
        return VerdictReport(static_errors=errors, timings=timings)

    t0 = clock()
    net, queries = translate(artifact)
    timings["translate_ms"] = (clock() - t0) * 1000
    synthetic = tuple(f.name for f in artifact.functions.values() if f.synthetic)
    report = VerdictReport(net=net, synthetic=synthetic, timings=timings, bug_analysis=not goals_only)
    report.stats = {"statements": statement_count(artifact), "places": len(net.places),
                    "transitions": len(net.transitions)}

    t0 = clock()
    try:
        space = explore(net, state_budget)
    except StateBudgetExceeded as exc:
        report.failure = str(exc)
        report.stats = {}
        return report
    timings["explore_ms"] = (clock() - t0) * 1000
    report.stats["states"] = len(space.states)

    if not goals_only:
        t0 = clock()
        analysis = analyze_space(space, synthetic)
        timings["analyze_ms"] = (clock() - t0) * 1000
        report.findings = analysis.findings
        report.notes = analysis.notes
        report.livelock_immune = analysis.livelock_immune
        if analysis.definite:
            chosen = select_bug(analysis.definite, net)
            report.diagnostic = build_diag(chosen, space, artifact, queries)

    t0 = clock()
    report.goal_results = check_goals(space, queries)
    timings["goals_ms"] = (clock() - t0) * 1000
    # goal feedback only once the bug set is empty
    if not report.definite and report.unreachable_goals:
        missing = [q for q in queries if q.goal_id in report.unreachable_goals]
        report.goal_violation = render_goal_violation(missing, artifact, space, round_no)
    report.space = space
    return report


def verify_text(text: str, state_budget: int = DEFAULT_STATE_BUDGET, goals_only: bool = False,
                round_no: Optional[int] = None) -> Tuple[Optional[CirArtifact], VerdictReport]:
    artifact, errors = load_text(text)
    if artifact is None:
        return None, VerdictReport(static_errors=errors)
    return artifact, verify_artifact(artifact, state_budget, goals_only, round_no)
