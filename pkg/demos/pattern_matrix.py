"""Net size, state count and verdict for every bundled pattern."""

from pathlib import Path

from cvnverify.verify import verify_text

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

print(f"{'pattern':40} {'|P|':>4} {'|T|':>4} {'states':>7}  result")
for path in sorted(FIXTURES.glob("pattern[0-9]_*.cir")):
    if path.stem.endswith("_fixed"):
        continue
    _, r = verify_text(path.read_text())
    kinds = sorted({f.kind for f in r.findings}) or ["verified"]
    print(f"{path.stem:40} {r.stats['places']:>4} {r.stats['transitions']:>4} {r.stats['states']:>7}  {', '.join(kinds)}")
