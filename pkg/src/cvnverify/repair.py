"""Generate, verify, repair: the goal-aware loop and its text-generation backends."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import shlex
import subprocess
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

from .analysis import DEFAULT_STATE_BUDGET, DEFINITE
from .checker import AUTOFIXABLE, FixConflict, autofix
from .cirtext import serialize_cir
from .diagnostics import VerdictReport, render_repair_prompt
from .verify import load_text, verify_artifact

log = logging.getLogger(__name__)

BACKEND_ENV = "CVNVERIFY_BACKEND"

TIER1, TIER2, TIER3, GOAL, ACCEPT = "tier1", "tier2", "tier3", "goal", "accept"
OUTPUT_LINE = "Output: the complete revised CIR artifact"


class BackendUnavailable(RuntimeError):
    pass


class BudgetExhausted(RuntimeError):
    def __init__(self, transcript: "LoopTranscript"):
        super().__init__(f"no accepted artifact after {len(transcript.rounds)} rounds")
        self.transcript = transcript


# ---------------------------------------------------------------------------
# backends
# ---------------------------------------------------------------------------


class Backend:
    """Role-tagged prompt in, candidate CIR document out."""

    name = "backend"

    def complete(self, role: str, prompt: str) -> str:
        raise NotImplementedError


class SubprocessBackend(Backend):
    name = "process"

    def __init__(self, command: str, timeout: float = 600):
        self.argv = shlex.split(command)
        self.timeout = timeout

    def complete(self, role, prompt):
        env = dict(os.environ, CVNVERIFY_ROLE=role)
        try:
            proc = subprocess.run(self.argv, input=prompt, capture_output=True, text=True,
                                  timeout=self.timeout, env=env)
        except (OSError, subprocess.SubprocessError) as exc:
            raise BackendUnavailable(f"{self.argv[0]}: {exc}") from exc
        if proc.returncode != 0:
            raise BackendUnavailable(f"{self.argv[0]} exited with {proc.returncode}: {proc.stderr.strip()}")
        return proc.stdout


class HttpBackend(Backend):
    name = "http"

    def __init__(self, url: str, timeout: float = 600):
        self.url = url
        self.timeout = timeout

    def complete(self, role, prompt):
        body = json.dumps({"prompt": prompt, "role": role}).encode()
        req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise BackendUnavailable(f"{self.url}: {exc}") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("artifact"), str):
            raise BackendUnavailable(f"{self.url}: response has no 'artifact' string")
        return payload["artifact"]


class ReplayBackend(Backend):
    """Canned responses from a directory of numbered files, consumed in order."""

    name = "replay"

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise BackendUnavailable(f"replay directory {self.directory} does not exist")
        numbered = []
        for p in self.directory.iterdir():
            m = re.match(r"(\d+)", p.name)
            if m and p.is_file():
                numbered.append((int(m.group(1)), p.name, p))
        self.files = [p for _, _, p in sorted(numbered)]
        self.calls = 0

    def complete(self, role, prompt):
        if self.calls >= len(self.files):
            raise BackendUnavailable(f"replay directory {self.directory} has no response #{self.calls + 1}")
        path = self.files[self.calls]
        self.calls += 1
        return path.read_text(encoding="utf-8")


def backend_from_descriptor(desc: Optional[str]) -> Optional[Backend]:
    """``replay:<dir>``, an http(s) URL, or a command line (optionally ``cmd:``-prefixed)."""
    desc = desc if desc is not None else os.environ.get(BACKEND_ENV)
    if not desc:
        return None
    if desc.startswith("replay:"):
        return ReplayBackend(desc[len("replay:"):])
    if desc.startswith(("http://", "https://")):
        return HttpBackend(desc)
    if desc.startswith("cmd:"):
        desc = desc[4:]
    return SubprocessBackend(desc)


def extract_artifact(response: str) -> str:
    """Strip a surrounding code fence if the backend added one."""
    m = re.search(r"```[^\n]*\n(.*?)```", response, re.S)
    return m.group(1) if m else response


# ---------------------------------------------------------------------------
# loop
# ---------------------------------------------------------------------------


@dataclass
class LoopConfig:
    generation_budget: int = 5
    repair_budget: int = 5
    state_budget: int = DEFAULT_STATE_BUDGET
    backend: Optional[Backend] = None

    def __post_init__(self):
        if self.generation_budget < 1 or self.repair_budget < 1:
            raise ValueError("round budgets must be at least 1")


@dataclass
class RoundRecord:
    round: int
    stage: str  # static | analysis | goals
    tier: str
    errors: List[str] = field(default_factory=list)
    finding: Optional[dict] = None
    unreachable: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    fixes: List[str] = field(default_factory=list)
    prompt: Optional[str] = None
    response_digest: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "stage": self.stage,
            "tier": self.tier,
            "errors": self.errors,
            "finding": self.finding,
            "unreachable_goals": self.unreachable,
            "warnings": self.warnings,
            "fixes": self.fixes,
            "prompt": self.prompt,
            "response_sha256": self.response_digest,
        }


@dataclass
class LoopTranscript:
    rounds: List[RoundRecord] = field(default_factory=list)
    report: Optional[VerdictReport] = None
    artifact_text: Optional[str] = None
    backend_calls: int = 0
    outcome: str = "failure"

    @property
    def tiers(self) -> List[str]:
        return [r.tier for r in self.rounds if r.tier != ACCEPT]

    @property
    def accepted(self) -> bool:
        return self.outcome == "accepted"

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome,
            "rounds": [r.to_json() for r in self.rounds],
            "tiers": self.tiers,
            "backend_calls": self.backend_calls,
            "report": self.report.to_json() if self.report is not None else None,
            "artifact": self.artifact_text,
        }

    def dumps(self) -> str:
        """Deterministic serialization; timings are left out on purpose."""
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        lines = []
        for r in self.rounds:
            detail = ""
            if r.errors:
                detail = " " + ", ".join(r.errors)
            elif r.finding:
                detail = f" {r.finding['kind']} blame [{', '.join(r.finding['blame'])}]"
            elif r.unreachable:
                detail = " unreachable " + ", ".join(r.unreachable)
            lines.append(f"round {r.round}: {r.stage} -> {r.tier}{detail}")
            for w in r.warnings:
                lines.append(f"  warning: {w}")
        lines.append(f"outcome: {self.outcome}")
        return "\n".join(lines) + "\n"


def route_tier(errors: Sequence, findings: Sequence, unreachable: Sequence[str] = ()) -> str:
    """Which repair tier a round's results call for."""
    if errors:
        return TIER1 if all(e.code in AUTOFIXABLE for e in errors) else TIER2
    if any(f.kind in DEFINITE for f in findings):
        return TIER3
    return GOAL if unreachable else ACCEPT


def generation_prompt(requirement: str) -> str:
    return ("Generation task: write a CIR artifact for the requirement below, including its goals.\n\n"
            f"Requirement:\n{requirement.rstrip()}\n\n{OUTPUT_LINE}\n")


def regeneration_prompt(errors, current: str) -> str:
    lines = ["Repair task: fix the static errors in the CIR.", "", "Static errors:"]
    for e in errors:
        lines.append(f"  {e.anchor}: {e.code} {e.message}" + (f" ({e.suggestion})" if e.suggestion else ""))
    lines += ["", "Current CIR:", current.rstrip(), "", OUTPUT_LINE]
    return "\n".join(lines) + "\n"


def with_current(prompt: str, current: str) -> str:
    body = prompt.rstrip("\n")
    if body.endswith(OUTPUT_LINE):
        body = body[: -len(OUTPUT_LINE)].rstrip("\n")
    return f"{body}\n\nCurrent CIR:\n{current.rstrip()}\n\n{OUTPUT_LINE}\n"


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def run_loop(seed: Optional[str], cfg: LoopConfig, requirement: Optional[str] = None) -> LoopTranscript:
    """Drive one artifact to acceptance; raises BudgetExhausted when the rounds run out.

    ``seed`` is CIR text used as the first candidate; without it the backend
    generates one from ``requirement``.
    """
    tr = LoopTranscript()
    backend = cfg.backend

    def ask(role, prompt):
        if backend is None:
            raise BackendUnavailable("no backend configured")
        tr.backend_calls += 1
        return extract_artifact(backend.complete(role, prompt))

    if seed is None:
        if requirement is None:
            raise ValueError("run_loop needs a seed artifact or a requirement")
        seed = ask("generate", generation_prompt(requirement))
    text = seed
    gen_used = rep_used = 0
    round_no = 0
    while gen_used < cfg.generation_budget and rep_used < cfg.repair_budget:
        round_no += 1
        artifact, errors = load_text(text)
        report = None
        if artifact is not None:
            report = verify_artifact(artifact, cfg.state_budget, round_no=round_no)
            errors = report.static_errors
        if errors:
            tier = route_tier(errors, [])
            rec = RoundRecord(round_no, "static", tier, [f"{e.code}@{e.anchor}" for e in errors])
            tr.rounds.append(rec)
            gen_used += 1
            if tier == TIER1:
                try:
                    fixed, fixes = autofix(artifact, errors)
                    text = serialize_cir(fixed)
                    rec.fixes = [f"{f.code}@{f.anchor}: {f.description}" for f in fixes]
                    continue
                except FixConflict as exc:
                    log.info("autofix conflict (%s), regenerating instead", exc)
                    rec.tier = TIER2
            rec.prompt = regeneration_prompt(errors, text)
            text = ask("regenerate", rec.prompt)
            rec.response_digest = _digest(text)
            continue

        tr.report = report
        warnings = [f.kind + (f" ({f.thread})" if f.thread else "") for f in report.findings
                    if f.kind not in DEFINITE]
        if report.failure is not None:
            tr.rounds.append(RoundRecord(round_no, "analysis", "failure", [report.failure]))
            tr.outcome = "failure"
            tr.artifact_text = text
            raise BudgetExhausted(tr)
        tier = route_tier([], report.findings, report.unreachable_goals)
        if tier == TIER3:
            d = report.diagnostic
            rec = RoundRecord(round_no, "analysis", tier, warnings=warnings,
                              finding={"kind": d.kind, "blame": list(d.blame), "trace": list(d.witness)})
            rec.prompt = with_current(render_repair_prompt(d), text)
        elif tier == GOAL:
            rec = RoundRecord(round_no, "goals", tier, unreachable=report.unreachable_goals, warnings=warnings)
            rec.prompt = with_current(report.goal_violation, text)
        else:
            tr.rounds.append(RoundRecord(round_no, "goals", ACCEPT, warnings=warnings))
            report.rounds_used = round_no
            tr.outcome = "accepted"
            tr.artifact_text = serialize_cir(artifact)
            return tr
        tr.rounds.append(rec)
        rep_used += 1
        text = ask("repair", rec.prompt)
        rec.response_digest = _digest(text)

    tr.artifact_text = text
    tr.outcome = "failure"
    raise BudgetExhausted(tr)
