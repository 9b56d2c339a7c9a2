"""Walk the condition-variable example from detection to an accepted repair.

Run from the repository root:  python3 demos/running_example.py
"""

from pathlib import Path

from cvnverify.diagnostics import render_repair_prompt, render_report_text
from cvnverify.repair import LoopConfig, ReplayBackend, run_loop
from cvnverify.verify import verify_text

ROOT = Path(__file__).resolve().parent.parent
buggy = (ROOT / "fixtures" / "pattern2_signal_loss.cir").read_text()

print("== 1. verify the buggy artifact")
_, report = verify_text(buggy)
print(render_report_text(report.diagnostic))

print("== 2. the prompt a repair backend would receive")
print(render_repair_prompt(report.diagnostic))

print("== 3. one replayed repair round")
tr = run_loop(buggy, LoopConfig(backend=ReplayBackend(ROOT / "fixtures" / "replay" / "p2")))
print(tr.to_text())
print(tr.artifact_text)
