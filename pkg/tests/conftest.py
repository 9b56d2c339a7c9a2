from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"

sys.path.insert(0, str(Path(__file__).resolve().parent))

PATTERNS = {
    1: "pattern1_two_mutex_deadlock.cir",
    2: "pattern2_signal_loss.cir",
    3: "pattern3_channel_mutex_deadlock.cir",
    4: "pattern4_three_lock_cycle.cir",
    5: "pattern5_partial_deadlock.cir",
    6: "pattern6_dual_condvar_cross.cir",
    7: "pattern7_semaphore_throttle.cir",
    8: "pattern8_cas_contention.cir",
    9: "pattern9_summary_propagation.cir",
}
FIXED = {1: "pattern1_fixed.cir", 2: "pattern2_fixed.cir", 3: "pattern3_fixed.cir", 6: "pattern6_fixed.cir"}
REGRESSIONS = ("regression_locked_send.cir", "regression_dead_notify.cir")


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")


@pytest.fixture
def load():
    from cvnverify.cirtext import load_cir

    return lambda name: load_cir(fixture_path(name))


# acceptance criteria report: one line per criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
