from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from conftest import FIXED, FIXTURES, PATTERNS, REGRESSIONS, fixture_text
from cvnverify.analysis import BugFinding
from cvnverify.checker import CheckError
from cvnverify.repair import (
    ACCEPT,
    GOAL,
    OUTPUT_LINE,
    TIER1,
    TIER2,
    TIER3,
    Backend,
    BackendUnavailable,
    BudgetExhausted,
    HttpBackend,
    LoopConfig,
    ReplayBackend,
    SubprocessBackend,
    backend_from_descriptor,
    extract_artifact,
    route_tier,
    run_loop,
)

REPLAY = FIXTURES / "replay"


def replay(name):
    return LoopConfig(backend=ReplayBackend(REPLAY / name))


class Recording(Backend):
    """Answers every request with the same text and remembers what it was asked."""

    def __init__(self, answer):
        self.answer = answer
        self.seen = []

    def complete(self, role, prompt):
        self.seen.append((role, prompt))
        return self.answer


# -- tier routing -------------------------------------------------------------

def err(code):
    return CheckError(code, "error", "x", "msg")


def test_route_tier():
    assert route_tier([err("E005"), err("E101")], []) == TIER1
    assert route_tier([err("E005"), err("E102")], []) == TIER2
    assert route_tier([], [BugFinding("deadlock", (), 0)]) == TIER3
    assert route_tier([], [BugFinding("livelock_warning", (), 0)], ["G1"]) == GOAL
    assert route_tier([], [BugFinding("starvation_warning", (), 0)]) == ACCEPT
    assert route_tier([], []) == ACCEPT


# -- replayed runs ------------------------------------------------------------

@pytest.mark.parametrize("k,directory", [(1, "p1"), (2, "p2")])
def test_replay_bug_repaired_in_one_round(k, directory):
    tr = run_loop(fixture_text(PATTERNS[k]), replay(directory))
    assert tr.accepted
    assert tr.tiers == [TIER3]
    assert tr.backend_calls == 1
    assert tr.report.accepted and not tr.report.definite and not tr.report.unreachable_goals


def test_replay_transcripts_are_byte_identical():
    a = run_loop(fixture_text(PATTERNS[2]), replay("p2")).dumps()
    b = run_loop(fixture_text(PATTERNS[2]), replay("p2")).dumps()
    assert a == b
    assert "elapsed" not in a and "seconds" not in a


def test_repair_prompt_carries_the_current_artifact():
    tr = run_loop(fixture_text(PATTERNS[2]), replay("p2"))
    prompt = tr.rounds[0].prompt
    assert prompt.startswith("Repair task")
    assert "Bug kind: SignalLoss" in prompt
    assert "Current CIR:\n" + fixture_text(PATTERNS[2]).rstrip() in prompt
    assert prompt.rstrip().endswith(OUTPUT_LINE)


def test_goal_stage_after_bug_fix():
    tr = run_loop(fixture_text(PATTERNS[2]), replay("p2_goal"))
    assert tr.tiers == [TIER3, GOAL]
    assert tr.rounds[1].unreachable == ["G1"]
    assert "Missing: V[ready] = true" in tr.rounds[1].prompt
    assert tr.accepted


def test_tier1_needs_no_backend():
    tr = run_loop(fixture_text("static_missing_unlock.cir"), LoopConfig())
    assert tr.tiers == [TIER1]
    assert tr.backend_calls == 0
    assert tr.rounds[0].fixes and tr.accepted


def test_tier2_regenerates():
    tr = run_loop(fixture_text("static_undeclared.cir"), replay("static"))
    assert tr.tiers == [TIER2]
    assert tr.backend_calls == 1
    assert tr.rounds[0].prompt.startswith("Repair task: fix the static errors")


@pytest.mark.parametrize("name", [FIXED[1], FIXED[2], PATTERNS[5], PATTERNS[7]])
def test_valid_seed_is_accepted_without_backend(name):
    tr = run_loop(fixture_text(name), LoopConfig())
    assert tr.accepted and tr.backend_calls == 0 and tr.tiers == []


def test_warnings_are_recorded_not_repaired():
    tr = run_loop(fixture_text(PATTERNS[5]), LoopConfig())
    assert tr.rounds[-1].warnings.count("livelock_warning") == 1


def test_generation_from_requirement():
    backend = Recording(fixture_text(FIXED[1]))
    tr = run_loop(None, LoopConfig(backend=backend), requirement="two threads, two locks")
    assert tr.accepted and tr.backend_calls == 1
    role, prompt = backend.seen[0]
    assert role == "generate" and "two threads, two locks" in prompt


def test_code_fence_is_stripped():
    assert extract_artifact("Here:\n```yaml\nresources:\n```\n") == "resources:\n"
    assert extract_artifact("resources:\n") == "resources:\n"


# -- budgets and failures -----------------------------------------------------

def test_repair_budget_exhausted():
    stuck = Recording(fixture_text(PATTERNS[1]))
    with pytest.raises(BudgetExhausted) as info:
        run_loop(fixture_text(PATTERNS[1]), LoopConfig(repair_budget=2, backend=stuck))
    tr = info.value.transcript
    assert tr.tiers == [TIER3, TIER3]
    assert not tr.accepted and len(stuck.seen) == 2


@pytest.mark.parametrize("name", REGRESSIONS)
def test_goal_regressions_never_accepted(name):
    stuck = Recording(fixture_text(name))
    with pytest.raises(BudgetExhausted) as info:
        run_loop(fixture_text(name), LoopConfig(repair_budget=3, backend=stuck))
    assert info.value.transcript.tiers == [GOAL] * 3


def test_generation_budget_exhausted():
    broken = Recording(fixture_text("static_undeclared.cir"))
    with pytest.raises(BudgetExhausted) as info:
        run_loop(fixture_text("static_undeclared.cir"), LoopConfig(generation_budget=2, backend=broken))
    assert info.value.transcript.tiers == [TIER2, TIER2]


def test_state_budget_overflow_ends_the_loop():
    with pytest.raises(BudgetExhausted) as info:
        run_loop(fixture_text(PATTERNS[4]), LoopConfig(state_budget=10))
    assert info.value.transcript.rounds[-1].tier == "failure"


def test_budgets_must_be_positive():
    with pytest.raises(ValueError):
        LoopConfig(repair_budget=0)


def test_missing_backend():
    with pytest.raises(BackendUnavailable):
        run_loop(fixture_text(PATTERNS[1]), LoopConfig())


def test_missing_replay_directory(tmp_path):
    with pytest.raises(BackendUnavailable):
        ReplayBackend(tmp_path / "nope")


def test_replay_runs_out(tmp_path):
    (tmp_path / "1.cir").write_text(fixture_text(PATTERNS[1]))
    with pytest.raises(BackendUnavailable):
        run_loop(fixture_text(PATTERNS[1]), LoopConfig(backend=ReplayBackend(tmp_path)))


def test_replay_orders_numerically(tmp_path):
    for n in (10, 2, 1):
        (tmp_path / f"{n}.cir").write_text(str(n))
    b = ReplayBackend(tmp_path)
    assert [b.complete("repair", "") for _ in range(3)] == ["1", "2", "10"]


# -- process and HTTP backends ------------------------------------------------

def test_subprocess_backend_failure():
    with pytest.raises(BackendUnavailable):
        SubprocessBackend("false").complete("repair", "x")
    with pytest.raises(BackendUnavailable):
        SubprocessBackend("/nonexistent/tool").complete("repair", "x")


def test_subprocess_backend_round_trip(tmp_path):
    script = tmp_path / "echo_fixed.py"
    script.write_text(
        "import os, sys\n"
        "sys.stdin.read()\n"
        f"sys.stdout.write(open({str(FIXTURES / FIXED[1])!r}).read())\n"
        "sys.stderr.write(os.environ['CVNVERIFY_ROLE'])\n"
    )
    backend = SubprocessBackend(f"{sys.executable} {script}")
    tr = run_loop(fixture_text(PATTERNS[1]), LoopConfig(backend=backend))
    assert tr.accepted and tr.backend_calls == 1


@pytest.fixture
def http_server():
    seen = []

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            seen.append(body)
            out = json.dumps({"artifact": fixture_text(FIXED[2])}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)

        def log_message(self, *args):
            pass

    srv = HTTPServer(("127.0.0.1", 0), Handler)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}/complete", seen
    srv.shutdown()
    srv.server_close()


def test_http_backend(http_server):
    url, seen = http_server
    tr = run_loop(fixture_text(PATTERNS[2]), LoopConfig(backend=HttpBackend(url)))
    assert tr.accepted
    assert seen[0]["role"] == "repair" and "Bug kind: SignalLoss" in seen[0]["prompt"]


def test_http_backend_unreachable():
    with pytest.raises(BackendUnavailable):
        HttpBackend("http://127.0.0.1:9/none", timeout=2).complete("repair", "x")


def test_descriptors(monkeypatch, tmp_path):
    assert isinstance(backend_from_descriptor(f"replay:{REPLAY / 'p1'}"), ReplayBackend)
    assert isinstance(backend_from_descriptor("https://example.invalid/x"), HttpBackend)
    assert backend_from_descriptor("cmd:my-tool --flag").argv == ["my-tool", "--flag"]
    monkeypatch.delenv("CVNVERIFY_BACKEND", raising=False)
    assert backend_from_descriptor(None) is None
    monkeypatch.setenv("CVNVERIFY_BACKEND", "tool")
    assert isinstance(backend_from_descriptor(None), SubprocessBackend)


# -- acceptance is never premature ---------------------------------------------

@pytest.mark.parametrize("name", list(PATTERNS.values()) + list(REGRESSIONS))
def test_accepted_transcripts_have_clean_reports(name):
    try:
        tr = run_loop(fixture_text(name), LoopConfig(repair_budget=1, backend=Recording(fixture_text(name))))
    except BudgetExhausted as exc:
        assert not exc.transcript.accepted
        return
    assert tr.report.definite == [] and tr.report.unreachable_goals == []


def test_raising_the_budget_keeps_acceptance():
    # a repair round is counted when its candidate is verified, so the two replayed
    # responses need three rounds: bug, goal miss, accept
    outcomes = []
    for k in range(1, 6):
        try:
            tr = run_loop(fixture_text(PATTERNS[2]), LoopConfig(repair_budget=k, backend=ReplayBackend(REPLAY / "p2_goal")))
            outcomes.append(tr.accepted)
        except BudgetExhausted:
            outcomes.append(False)
    assert outcomes == [False, False, True, True, True]
