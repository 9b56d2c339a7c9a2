"""Two artifacts that are bug-free yet lose required behaviour; only the goal check rejects them."""

from pathlib import Path

from cvnverify.verify import verify_text

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

for name in ("regression_locked_send.cir", "regression_dead_notify.cir"):
    _, report = verify_text((FIXTURES / name).read_text())
    print(f"### {name}")
    print(f"static errors: {len(report.static_errors)}, definite bugs: {len(report.definite)}")
    print(report.goal_violation)
