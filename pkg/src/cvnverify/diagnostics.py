"""Turning analysis findings into sid-anchored diagnostics, prompts and reports."""

from __future__ import annotations

import textwrap
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .analysis import (
    DEFINITE,
    LOST_TAGS,
    Analysis,
    BugFinding,
    GoalResult,
    StateSpace,
)
from .cir import SID_BOTTOM, CirArtifact
from .cvn import AUX, CONTROL, RESOURCE, Cvn, CvnState, wp
from .expr import format_value
from .translate import GoalQuery

PRIORITY = ("deadlock", "signal_loss", "channel_block", "livelock_warning", "starvation_warning")

KIND_NAMES = {
    "deadlock": "Deadlock",
    "signal_loss": "SignalLoss",
    "channel_block": "ChannelBlock",
    "livelock_warning": "Livelock",
    "starvation_warning": "Starvation",
}

HINTS = {
    "deadlock": "enforce a consistent lock order",
    "signal_loss": "update the predicate before notification",
    "channel_block": "do not block on a channel while holding the lock its sender needs",
    "livelock_warning": "give the retry cycle a way out that does not depend on a stuck thread",
    "starvation_warning": "let the starved thread obtain what it waits for",
}

RESOURCE_WORDS = {
    "Mutex": "mutex",
    "RwLock": "rwlock",
    "Condvar": "condvar",
    "Semaphore": "semaphore",
    "Channel": "channel",
    "Var": "variable",
    "Atomic": "atomic",
}

ACQUIRE_TAGS = {"Lock", "Acquire", "ReadLock", "WriteLock", "Reacquire"}
RELEASE_TAGS = {"Unlock", "Release", "ReadUnlock", "WriteUnlock", "WaitEnter"}


def _function_of(tid: str) -> str:
    return tid.split(".", 1)[0]


def _anchors(net: Cvn, f: BugFinding) -> Tuple[str, ...]:
    return tuple(net.by_id[t].anchor for t in f.transitions if net.by_id[t].anchor != SID_BOTTOM)


def select_bug(findings: Sequence[BugFinding], net: Optional[Cvn] = None) -> BugFinding:
    """One finding per round: kind priority, then shortest witness, then sid order."""
    if not findings:
        raise ValueError("select_bug needs at least one finding")

    def key(f: BugFinding):
        anchors = _anchors(net, f) if net is not None else f.transitions
        return (PRIORITY.index(f.kind), len(f.witness), anchors, f.transitions, f.thread or "")

    return min(findings, key=key)


@dataclass
class Diagnostic:
    kind: str
    witness: Tuple[str, ...]
    blame: Tuple[str, ...]
    threads: Dict[str, dict]  # thread -> {"at": ..., "blocked": bool}
    variables: Dict[str, str]
    resources: Dict[str, int]
    held: Dict[str, List[str]]
    waiting: List[dict]  # {"thread", "on", "reason"}
    slice: Tuple[Tuple[str, str], ...]
    relevant_resources: Tuple[str, ...]
    constraints: Dict[str, List[str]]
    hint: str
    diagnosis: str
    repair_suggestion: str
    goal_check: List[dict] = field(default_factory=list)
    end_state: Dict[str, object] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def kind_name(self) -> str:
        return KIND_NAMES[self.kind]

    def to_json(self) -> dict:
        return {
            "bug_kind": self.kind,
            "blame": list(self.blame),
            "end_state": self.end_state,
            "trace": list(self.witness),
            "diagnosis": self.diagnosis,
            "repair_suggestion": self.repair_suggestion,
            "goal_check": self.goal_check,
        }


# ---------------------------------------------------------------------------
# state reading
# ---------------------------------------------------------------------------


def _positions(net: Cvn, s: CvnState, synthetic) -> Dict[str, List]:
    out: Dict[str, List] = {}
    for i, p in enumerate(net.places):
        if s.marking[i] and p.cls in (CONTROL, AUX) and p.function not in synthetic:
            out.setdefault(p.function, []).append(p)
    return out


def _describe_position(p) -> str:
    if p.cls == AUX:
        return f"{p.sid} ({'in wait' if p.aux == 'wait' else 'reacquiring'})"
    if p.sid == "ret":
        return "ret"
    if p.sid.endswith("'"):
        return f"{p.sid[:-1]} (executed, transfer pending)"
    return p.sid


def _thread_blocked(net: Cvn, s: CvnState, place) -> bool:
    pid = place.id
    for t in net.transitions:
        if pid in dict(t.inputs) and net.enabled(t, s):
            return False
    return place.sid != "ret" or place.cls == AUX


def _waits(net: Cvn, s: CvnState, place, artifact: CirArtifact) -> List[Tuple[str, str]]:
    """What a blocked thread token at ``place`` is waiting for: (target, reason)."""
    out = []
    for t in net.transitions:
        inputs = dict(t.inputs)
        if place.id not in inputs:
            continue
        own_ready = all(s.marking[net.place_index(p)] >= w for p, w in t.inputs
                        if net.place_by_id[p].cls != RESOURCE and net.place_by_id[p].function
                        == place.function)
        if not own_ready:
            continue
        for p, w in t.inputs:
            pl = net.place_by_id[p]
            if s.marking[net.place_index(p)] >= w:
                continue
            if pl.cls == RESOURCE:
                kind = pl.kind
                if kind == "Condvar":
                    out.append((pl.resource, f"notification on {pl.resource}"))
                elif kind == "Channel":
                    out.append((pl.resource, f"message on {pl.resource}"))
                else:
                    out.append((pl.resource, f"{RESOURCE_WORDS[kind]} {pl.resource} (needs {w})"))
            elif pl.cls == CONTROL and pl.sid == "ret":
                out.append((pl.function, f"join of {pl.function}"))
        if t.tag == "WakeA" and not out:
            out.append((t.anchor, "notify_all broadcast"))
    seen = []
    for x in out:
        if x not in seen:
            seen.append(x)
    return seen


def _held(net: Cvn, witness) -> Dict[str, List[str]]:
    counts: Dict[str, Dict[str, int]] = {}
    for _, tid, _ in witness:
        t = net.by_id[tid]
        if t.tag not in ACQUIRE_TAGS and t.tag not in RELEASE_TAGS:
            continue
        fn = _function_of(tid)
        if t.tag in ("WaitEnter", "Reacquire"):
            res = [net.place_by_id[p].resource for p, _ in (t.outputs if t.tag == "WaitEnter" else t.inputs)
                   if net.place_by_id[p].cls == RESOURCE]
        else:
            res = [net.place_by_id[p].resource for p, _ in t.inputs + t.outputs
                   if net.place_by_id[p].cls == RESOURCE]
        for r in res:
            if net.place_by_id[f"rp({r})"].kind in ("Channel", "Condvar"):
                continue
            delta = 1 if t.tag in ACQUIRE_TAGS else -1
            c = counts.setdefault(fn, {})
            c[r] = c.get(r, 0) + delta
    return {fn: sorted(r for r, k in c.items() if k > 0) for fn, c in counts.items() if any(k > 0 for k in c.values())}


def witness_labels(net: Cvn, witness, bug_state: Optional[CvnState], synthetic) -> List[Tuple[str, str]]:
    """Annotated sids for a witness: (label, transition id), consecutive repeats of a statement merged."""
    entries: List[List[str]] = []
    last: Dict[str, str] = {}
    for _, tid, _ in witness:
        t = net.by_id[tid]
        fn = _function_of(tid)
        if t.anchor == SID_BOTTOM or fn in synthetic:
            continue
        if last.get(fn) == t.anchor and t.tag not in LOST_TAGS:
            continue
        last[fn] = t.anchor
        label = t.anchor + ("(lost)" if t.tag in LOST_TAGS else "")
        entries.append([label, tid])
    if bug_state is not None:
        done = set()
        for e in reversed(entries):
            t = net.by_id[e[1]]
            fn = _function_of(e[1])
            if fn in done:
                continue
            done.add(fn)
            if t.tag == "WaitEnter" and bug_state.marking[net.place_index(wp(t.anchor))]:
                e[0] = t.anchor + "(blocked)"
    return [(a, b) for a, b in entries]


def _slice(artifact: CirArtifact, blame: Sequence[str], window: int = 2):
    picked: Dict[str, set] = {}
    for sid in blame:
        loc = artifact.locate(sid)
        if loc is None:
            continue
        fn, i = loc
        picked.setdefault(fn.name, set()).update(range(max(0, i - window), min(len(fn.body), i + window + 1)))
    out = []
    for fn in artifact.functions.values():
        for i in sorted(picked.get(fn.name, ())):
            s = fn.body[i]
            out.append((s.sid, str(s.op)))
    return tuple(out)


def _goal_check(space: StateSpace, state_idx: int, queries: Sequence[GoalQuery]) -> List[dict]:
    reach = space.forward_closure([state_idx])
    out = []
    for q in queries:
        ok = any(q.satisfied(space.net, space.states[i]) for i in reach)
        out.append({
            "goal": q.goal_id,
            "critical_outcome": q.description,
            "status": "reachable from the bug state" if ok else "UNREACHABLE from the bug state",
        })
    return out


# ---------------------------------------------------------------------------
# building the diagnostic
# ---------------------------------------------------------------------------


def build_diag(finding: BugFinding, space: StateSpace, artifact: CirArtifact,
               queries: Sequence[GoalQuery] = ()) -> Diagnostic:
    net = space.net
    synthetic = {f.name for f in artifact.functions.values() if f.synthetic}
    state = space.states[finding.state]
    definite = finding.kind in DEFINITE
    labels = witness_labels(net, finding.witness, state if definite else None, synthetic)
    witness = tuple(label for label, _ in labels)

    positions = _positions(net, state, synthetic)
    threads, waiting = {}, []
    for fn in artifact.functions:
        for p in positions.get(fn, ()):
            blocked = _thread_blocked(net, state, p)
            threads.setdefault(fn, {"at": _describe_position(p), "blocked": blocked})
            if blocked and not (p.cls == CONTROL and p.sid == "ret"):
                for target, reason in _waits(net, state, p, artifact):
                    waiting.append({"thread": fn, "on": target, "reason": reason})
    held = _held(net, finding.witness)
    variables = {r.name: format_value(net.value(state, r.name))
                 for r in artifact.resources.values() if r.kind in ("Var", "Atomic")}
    resources = {p.resource: state.marking[i] for i, p in enumerate(net.places) if p.cls == RESOURCE}

    # blame
    blame: List[str] = []
    real = [(s, t, d) for s, t, d in finding.witness
            if net.by_id[t].anchor != SID_BOTTOM and _function_of(t) not in synthetic]
    if finding.kind == "signal_loss":
        blame.append(net.by_id[finding.witness[finding.lost_at][1]].anchor)
        for p in net.places:
            if p.cls == AUX and p.aux == "wait" and state.marking[net.place_index(p.id)]:
                enter = net.by_id.get(f"{p.function}.{p.sid}.WaitEnter")
                if enter is not None and dict(enter.outputs).get(f"rp({finding.condvar})") is None:
                    cv = next(q.resource for q in (net.place_by_id[x] for x, _ in
                              net.by_id[f"{p.function}.{p.sid}.Wake1"].inputs) if q.cls == RESOURCE)
                    if cv == finding.condvar:
                        blame.append(p.sid)
    if definite and real:
        blame.append(net.by_id[real[-1][1]].anchor)
    if finding.kind in ("deadlock", "channel_block"):
        for fn, ps in positions.items():
            for p in ps:
                if p.cls == CONTROL and p.sid != "ret" and not p.sid.endswith("'"):
                    blame.append(p.sid)
                elif p.cls == AUX:
                    blame.append(p.sid)
    if not definite:
        for tid in finding.scc_transitions:
            if _function_of(tid) not in synthetic and net.by_id[tid].anchor != SID_BOTTOM:
                blame.append(net.by_id[tid].anchor)
        if finding.thread:
            for p in positions.get(finding.thread, ()):
                if p.cls != CONTROL or p.sid != "ret":
                    blame.append(p.sid.rstrip("'"))
    blame_t = tuple(dict.fromkeys(b for b in blame if artifact.locate(b) is not None))

    sl = _slice(artifact, blame_t)
    mentioned = set()
    for sid, _ in sl:
        fn, i = artifact.locate(sid)
        mentioned.update(n for n in fn.body[i].op.names() if n in artifact.resources)
    for w in waiting:
        if w["on"] in artifact.resources:
            mentioned.add(w["on"])
    relevant = tuple(f"{RESOURCE_WORDS[r.kind]} {r.name}" for r in artifact.resources.values()
                     if r.name in mentioned)
    constraints = {
        "resources": list(artifact.resources),
        "threads": [f.name for f in artifact.user_functions()],
        "goals": [g.id for g in artifact.goals],
    }

    # end-state block in the report layout
    end_state: Dict[str, object] = {}
    for fn, ps in positions.items():
        for p in ps:
            if p.cls == AUX and p.aux == "wait":
                cv = next(net.place_by_id[x].resource for x, _ in net.by_id[f"{fn}.{p.sid}.Wake1"].inputs
                          if net.place_by_id[x].cls == RESOURCE)
                end_state[f"V[{cv}_{fn}]"] = "waiting"
    for k, v in variables.items():
        end_state[f"V[{k}]"] = v
    end_state["held"] = held
    end_state["waiting"] = sorted({w["thread"] for w in waiting}, key=list(artifact.functions).index)

    diagnosis, suggestion = _narrative(finding, artifact, net, blame_t, positions, waiting, held, state)
    goal_check = _goal_check(space, finding.state, queries) if definite else []
    return Diagnostic(
        finding.kind, witness, blame_t, threads, variables, resources, held, waiting, sl, relevant,
        constraints, HINTS[finding.kind], diagnosis, suggestion, goal_check, end_state,
    )


def _predicate_vars(artifact: CirArtifact, mutex: str) -> List[str]:
    return [v for v, locks in artifact.protection.items() if mutex in locks]


def _narrative(f, artifact, net, blame, positions, waiting, held, state):
    if f.kind == "signal_loss":
        lost = net.by_id[f.witness[f.lost_at][1]]
        cv = f.condvar
        mutex = artifact.resources[cv].paired_with if cv in artifact.resources else None
        waiters = [b for b in blame if b != lost.anchor]
        sites = ", ".join(f"sid={w}" for w in waiters) or "a wait site"
        who = ", ".join(sorted({w["thread"] for w in waiting})) or "a waiter"
        op = "notify_one" if lost.tag == "NotifyLost" else "notify_all"
        diagnosis = (f"{op} at sid={lost.anchor} fires when no thread is waiting on {cv}; "
                     f"{who} enters wait at {sites} with no loop guard and no future notification.")
        preds = _predicate_vars(artifact, mutex) if mutex else []
        pred = preds[0] if len(preds) == 1 else "the predicate"
        first = waiters[0] if waiters else "the wait"
        suggestion = (f"Insert read({pred}) with branch before {first}; add back-edge from post-wakeup "
                      f"to the condition check, forming a while(!{pred}) loop around wait({cv}, {mutex}). "
                      f"Write {pred} before notifying at {lost.anchor}.")
        return diagnosis, suggestion
    if f.kind in ("deadlock", "channel_block"):
        parts = []
        for w in waiting:
            h = held.get(w["thread"], [])
            hold = f"holds {', '.join(h)} and " if h else ""
            parts.append(f"{w['thread']} {hold}waits for {w['reason']}")
        what = "; ".join(parts) or "every thread is blocked"
        if f.kind == "deadlock":
            diagnosis = f"No transition is enabled: {what}."
            suggestion = ("Acquire locks in one global order in every thread, or release the held lock "
                          "before acquiring the next one; edit the statements at " + ", ".join(blame) + ".")
        else:
            diagnosis = f"A thread blocks on an empty channel that can no longer be filled: {what}."
            suggestion = ("Move the send so that it cannot be blocked by the receiver, or drop the lock "
                          "before recv; edit the statements at " + ", ".join(blame) + ".")
        return diagnosis, suggestion
    cycle = ", ".join(blame) or "the cycle"
    if f.kind == "livelock_warning":
        return (f"Execution can enter a cycle through {cycle} that never lets all threads return.",
                "Make sure the cycle can be left: the condition it polls must become true on some path.")
    return (f"{f.thread} makes no progress while other threads cycle through {cycle}.",
            f"Let {f.thread} obtain the resource it waits for inside the cycle.")


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _wrap(text: str, indent: str = "  ", width: int = 50) -> List[str]:
    return textwrap.wrap(text, width=width, initial_indent=indent, subsequent_indent=indent) or [indent]


def _held_text(held: Dict[str, List[str]]) -> str:
    if not held:
        return "{}"
    return "{" + ", ".join(f"{t}: {', '.join(rs)}" for t, rs in held.items()) + "}"


def render_report_text(d: Diagnostic) -> str:
    """Report in the block layout used for bug findings."""
    lines = [f"bug_kind:  {d.kind}", f"blame:     [{', '.join(d.blame)}]", "end_state:"]
    rows = []
    for k, v in d.end_state.items():
        if k == "held":
            rows.append(("held:", _held_text(v)))
        elif k == "waiting":
            rows.append(("waiting:", f"[{', '.join(v)}]"))
        else:
            rows.append((f"{k}:", str(v)))
    width = max((len(k) for k, _ in rows), default=0) + 1
    lines += [f"  {k.ljust(width)}{v}".rstrip() for k, v in rows]
    lines.append(f"trace:     [{', '.join(d.witness)}]")
    lines.append("diagnosis:")
    lines += _wrap(d.diagnosis)
    lines.append("repair_suggestion:")
    lines += _wrap(d.repair_suggestion)
    if d.goal_check:
        lines.append("goal_check:")
        for g in d.goal_check:
            lines.append(f"  {g['goal']}:")
            lines.append(f'    critical_outcome: "{g["critical_outcome"]}"')
            lines.append(f"    status: {g['status']}")
    return "\n".join(lines) + "\n"


def render_repair_prompt(d: Diagnostic) -> str:
    """Structured repair request; field order is fixed."""
    lines = ["Repair task: revise the CIR locally.", "", f"Bug kind: {d.kind_name}"]
    lines.append("Witness trace (sid): " + (" -> ".join(d.witness) if d.witness else "<initial state>"))
    lines += ["", "Bug-state summary:"]
    for fn, info in d.threads.items():
        lines.append(f"  {fn} at sid {info['at']}" + (" (blocked)" if info["blocked"] else ""))
    for k, v in d.variables.items():
        lines.append(f"  {k} = {v}")
    lines += ["", "Held resources:"]
    lines += [f"  {t}: {', '.join(rs)}" for t, rs in d.held.items()] or ["  none"]
    lines += ["", "Waiting relations:"]
    lines += [f"  {w['thread']} waits for {w['reason']}" for w in d.waiting] or ["  none"]
    lines += ["", "Relevant resources:", "  " + (", ".join(d.relevant_resources) or "none")]
    lines += ["", "Relevant CIR slice:"]
    lines += [f"  {sid}: {op}" for sid, op in d.slice] or ["  none"]
    lines += ["", "Preserve:", "  resource names, thread structure, goals"]
    lines.append(f"  resources: {', '.join(d.constraints['resources']) or 'none'}")
    lines.append(f"  threads: {', '.join(d.constraints['threads']) or 'none'}")
    lines.append(f"  goals: {', '.join(d.constraints['goals']) or 'none'}")
    lines += ["", "Suggested direction:", f"  {d.hint}"]
    lines += _wrap(d.repair_suggestion, width=72)
    lines += ["", "Output: the complete revised CIR artifact"]
    return "\n".join(lines) + "\n"


def _requirements(q: GoalQuery):
    for name, (pid, k) in zip(q.completion_names, q.completion):
        yield f"{name} completed", (lambda net, s, pid=pid, k=k: s.marking[net.place_index(pid)] >= k), ("completion", name)
    for name, (pid, k) in zip(q.availability_names, q.availability):
        yield f"{name} available", (lambda net, s, pid=pid, k=k: s.marking[net.place_index(pid)] >= k), ("availability", name)
    for var, lit in q.variables:
        yield f"V[{var}] = {format_value(lit)}", (lambda net, s, var=var, lit=lit: net.value(s, var) == lit), ("variable", var, lit)


def missing_requirement(q: GoalQuery, space: StateSpace) -> Tuple[str, tuple]:
    """The first requirement no reachable state satisfies, or the conjunction if each is satisfiable."""
    net = space.net
    for text, pred, info in _requirements(q):
        if not any(pred(net, s) for s in space.states):
            return text, info
    return "all requirements together", ("joint",)


def _goal_hint(info: tuple, artifact: CirArtifact) -> str:
    if info[0] == "variable":
        var, lit = info[1], info[2]
        op = "store" if artifact.resource_kind(var) == "Atomic" else "write"
        return f"Ensure that a {op}({var}, {format_value(lit)}) operation exists on a reachable path."
    if info[0] == "completion":
        return f"Ensure that {info[1]} can reach its return on some path."
    if info[0] == "availability":
        return f"Ensure that every acquisition of {info[1]} is released on some path."
    return "Ensure that one execution can satisfy every requirement at the same time."


def render_goal_violation(unreachable: Sequence[GoalQuery], artifact: CirArtifact, space: StateSpace,
                          round_no: Optional[int] = None) -> str:
    head = f"=== Goal Violation (Round {round_no}) ===" if round_no is not None else "=== Goal Violation ==="
    lines = [head, "Status: No concurrency bugs detected."]
    for q in unreachable:
        text, info = missing_requirement(q, space)
        lines += ["", f"UNREACHABLE GOAL: {q.goal_id}"]
        if q.description:
            lines.append(f'  desc: "{q.description}"')
        lines.append(f"  Missing: {text}")
        lines.append(f"  No reachable state satisfies {text}.")
        lines.append(f"  Hint: {_goal_hint(info, artifact)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


def finding_to_json(f: BugFinding, net: Cvn, synthetic=()) -> dict:
    labels = witness_labels(net, f.witness, None, synthetic)
    out = {"kind": f.kind, "witness_length": len(f.witness), "trace": [l for l, _ in labels]}
    if f.scc is not None:
        out["scc_states"] = len(f.scc)
        out["scc_transitions"] = list(f.scc_transitions)
    if f.thread:
        out["thread"] = f.thread
    return out


@dataclass
class VerdictReport:
    static_errors: list = field(default_factory=list)
    findings: List[BugFinding] = field(default_factory=list)
    goal_results: List[GoalResult] = field(default_factory=list)
    diagnostic: Optional[Diagnostic] = None
    goal_violation: Optional[str] = None
    livelock_immune: Optional[bool] = None
    notes: List[str] = field(default_factory=list)
    stats: Dict[str, int] = field(default_factory=dict)
    rounds_used: int = 1
    timings: Dict[str, float] = field(default_factory=dict)
    failure: Optional[str] = None
    net: Optional[Cvn] = None
    synthetic: Tuple[str, ...] = ()
    space: Optional[StateSpace] = None
    bug_analysis: bool = True

    @property
    def definite(self) -> List[BugFinding]:
        return [f for f in self.findings if f.kind in DEFINITE]

    @property
    def unreachable_goals(self) -> List[str]:
        return [g.goal_id for g in self.goal_results if not g.reachable]

    @property
    def accepted(self) -> bool:
        return (not self.static_errors and not self.definite and self.failure is None
                and bool(self.stats) and not self.unreachable_goals)

    @property
    def status(self) -> str:
        if self.accepted:
            return "accepted"
        if self.failure is not None:
            return "failure"
        if self.static_errors:
            return "static_errors"
        if self.definite:
            return "bug"
        return "goal_unreachable"

    def to_json(self, timings: bool = False) -> dict:
        out = {
            "status": self.status,
            "accepted": self.accepted,
            "static_errors": [e.to_json() for e in self.static_errors],
        }
        if self.diagnostic is not None:
            out.update(self.diagnostic.to_json())
        else:
            out.update({"bug_kind": None, "blame": [], "end_state": {}, "trace": [],
                        "diagnosis": None, "repair_suggestion": None, "goal_check": []})
        syn = self.synthetic
        out["findings"] = [finding_to_json(f, self.net, syn) for f in self.findings if f.kind in DEFINITE]
        out["warnings"] = [finding_to_json(f, self.net, syn) for f in self.findings if f.kind not in DEFINITE]
        out["goals"] = [{"id": g.goal_id, "reachable": g.reachable} for g in self.goal_results]
        out["goal_violation"] = self.goal_violation
        out["livelock_immune"] = self.livelock_immune
        out["notes"] = list(self.notes)
        out["stats"] = dict(self.stats)
        out["rounds_used"] = self.rounds_used
        if not self.bug_analysis:
            out["bug_analysis"] = "skipped"
        if self.failure is not None:
            out["failure"] = self.failure
        if timings:
            out["timings"] = dict(self.timings)
        return out

    def to_text(self) -> str:
        if self.failure is not None:
            return f"failure: {self.failure}\n"
        if self.static_errors:
            return "".join(f"{e.anchor}: {e.code} [{e.severity}] {e.message}\n" for e in self.static_errors)
        parts = []
        if self.diagnostic is not None:
            parts.append(render_report_text(self.diagnostic))
        elif self.goal_violation:
            parts.append(self.goal_violation)
        else:
            parts.append("status: accepted\n")
        for f in self.findings:
            if f.kind not in DEFINITE:
                extra = f" ({f.thread})" if f.thread else ""
                parts.append(f"warning: {f.kind}{extra}\n")
        if self.livelock_immune:
            parts.append("livelock: immune (no cycle without a way out)\n")
        for g in self.goal_results:
            parts.append(f"goal {g.goal_id}: {'reachable' if g.reachable else 'UNREACHABLE'}\n")
        return "".join(parts)
