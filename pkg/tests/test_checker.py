from __future__ import annotations

import pytest

from conftest import FIXED, PATTERNS, REGRESSIONS, fixture_text
from cvnverify.checker import AUTOFIXABLE, RULES, FixConflict, autofix, check
from cvnverify.cir import Next, Return
from cvnverify.cirtext import CirParseError, parse_cir, serialize_cir

RESOURCES = """\
resources:
  m0:  { kind: Mutex }
  m1:  { kind: Mutex }
  cv0: { kind: Condvar, paired_with: m0 }
  s0:  { kind: Semaphore, count: 1 }
  ch:  { kind: Channel }
  rw:  { kind: RwLock }
  x:   { kind: Var, type: Int, init: 0 }
  flag: { kind: Var, type: Bool, init: false }
  at:  { kind: Atomic, type: Int, init: 0 }
  col: { kind: Var, type: Enum, values: [red, green], init: red }
"""

OK_BODY = """\
    - { sid: a1, op: lock(m0), next: a2 }
    - { sid: a2, op: unlock(m0) }
"""


def doc(body=OK_BODY, resources="", tail="", base=RESOURCES):
    """One thread ``t`` with the given body, plus extra resources and trailing sections."""
    return f"{base}{resources}threads:\n  t:\n    body:\n{body}{tail}"


def funcs(functions, entry="main", resources="", tail=""):
    return f"{RESOURCES}{resources}functions:\n{functions}entry: {entry}\n{tail}"


MAIN_SPAWNS_T = """\
  main:
    body:
    - { sid: m1s, op: spawn(t), next: m2s }
    - { sid: m2s, op: join(t) }
  t:
    body:
    - { sid: a1, op: nop() }
"""

PARSE_CASES = {
    "E000": "resources:\n\tm0: { kind: Mutex }\nthreads:\n",
    "E001": "resources:\n  m0: { count: 1 }\nthreads:\n",
    "E002": "resources:\n  m0: { kind: Spinlock }\nthreads:\n",
    "E003": doc("    - { op: nop() }\n"),
    "E004": doc("    - { sid: a1 }\n"),
    "E008": doc(resources="  y: { kind: Var, type: Int, init: 1.2.3 }\n"),
    "E009": doc(tail="goals:\n  - desc: nothing\n"),
    "E010": doc("    - { sid: a1, op: frobnicate(m0) }\n"),
    "E011": doc("    - { sid: a1, op: lock(m0, m1) }\n"),
    "E012": doc("    - { sid: a1, op: write(x, 1 +) }\n"),
    "E013": doc("    - { sid: a1, op: nop(), colour: red }\n"),
    "E103": doc(resources="  m0: { kind: Mutex }\n"),
}

CHECK_CASES = {
    "E005": doc("    - { sid: a1, op: lock(m0) }\n    - { sid: a2, op: unlock(m0) }\n"),
    "E007": f"{RESOURCES}threads:\n",
    "E101": doc(tail="  u:\n    body:\n    - { sid: a1, op: nop() }\n"),
    "E102": doc("    - { sid: a1, op: lock(mz), next: a2 }\n    - { sid: a2, op: unlock(mz) }\n"),
    "E104": funcs("  main:\n    body:\n    - { sid: a1, op: spawn(nope), next: a2 }\n"
                  "    - { sid: a2, op: join(nope) }\n"),
    "E105": funcs("  main:\n    body:\n    - { sid: a1, op: nop() }\n", entry="nope"),
    "E106": doc(tail="protection:\n  zz: [m0]\n"),
    "E107": doc(tail="protection:\n  x: [mz]\n"),
    "E108": doc(resources="  cv9: { kind: Condvar, paired_with: nope }\n"),
    "E109": doc(tail="goals:\n  - id: G1\n    completion:\n      - [nope, completed]\n"),
    "E110": doc(tail="goals:\n  - id: G1\n    availability:\n      - [x, available]\n"),
    "E111": doc(tail="goals:\n  - id: G1\n    variables:\n      m0: 1\n"),
    "E112": doc(tail="  m0:\n    body:\n    - { sid: b1, op: nop() }\n"),
    "E113": doc("    - { sid: ret, op: nop() }\n"),
    "E114": doc("    - { sid: a1, op: read(x), branch: [zz == 1, a2, a2] }\n    - { sid: a2, op: nop() }\n"),
    "E115": doc(tail="goals:\n  - id: G1\n    completion:\n      - [t, completed]\n"
                     "  - id: G1\n    completion:\n      - [t, completed]\n"),
    "E201": doc("    - { sid: a1, op: read(flag), branch: [flag, a2, a2] }\n    - { sid: a2, op: nop() }\n"),
    "E202": doc("    - { sid: a1, op: write(flag, 3) }\n"),
    "E203": doc(resources="  y: { kind: Var, type: Int, init: true }\n"),
    "E204": doc("    - { sid: a1, op: read(x), switch: [x, { true: a2 }, a2] }\n    - { sid: a2, op: nop() }\n"),
    "E205": doc("    - { sid: a1, op: cas(at, true, 1), branch: [at == 1, a2, a2] }\n"
                "    - { sid: a2, op: nop() }\n"),
    "E206": doc("    - { sid: a1, op: read(x), branch: [x == true, a2, a2] }\n    - { sid: a2, op: nop() }\n"),
    "E207": doc("    - { sid: a1, op: write(x, flag + 1) }\n"),
    "E208": doc(tail="goals:\n  - id: G1\n    variables:\n      x: true\n"),
    "E209": doc(tail="goals:\n  - id: G1\n    variables:\n      col: blue\n"),
    "E210": doc(resources="  y: { kind: Var, type: Complex, init: 0 }\n"),
    "E301": doc("    - { sid: a1, op: lock(s0), next: a2 }\n    - { sid: a2, op: unlock(s0) }\n"),
    "E302": doc("    - { sid: a1, op: read_lock(m0), next: a2 }\n    - { sid: a2, op: unlock(m0) }\n"),
    "E303": doc("    - { sid: a1, op: notify_one(m0) }\n"),
    "E304": doc("    - { sid: a1, op: lock(m1), next: a2 }\n    - { sid: a2, op: wait(cv0, m1), next: a3 }\n"
                "    - { sid: a3, op: unlock(m1) }\n"),
    "E305": doc("    - { sid: a1, op: acquire(m0) }\n"),
    "E306": doc("    - { sid: a1, op: send(m0) }\n"),
    "E307": doc("    - { sid: a1, op: read(at) }\n"),
    "E308": doc("    - { sid: a1, op: load(x) }\n"),
    "E309": doc("    - { sid: a1, op: write(x, 1) }\n", tail="protection:\n  x: [m0]\n"),
    "E310": doc("    - { sid: a1, op: wait(cv0, m0) }\n"),
    "E311": doc("    - { sid: a1, op: cas(at, 0, 1), next: a2 }\n    - { sid: a2, op: nop() }\n"),
    "E312": doc(resources="  cv9: { kind: Condvar, paired_with: s0 }\n"),
    "E401": funcs("  main:\n    body:\n    - { sid: a1, op: spawn(t) }\n  t:\n    body:\n    - { sid: b1, op: nop() }\n"),
    "E402": funcs("  main:\n    body:\n    - { sid: a1, op: join(t) }\n  t:\n    body:\n    - { sid: b1, op: nop() }\n"),
    "E403": funcs("  main:\n    body:\n    - { sid: a1, op: spawn(t), next: a2 }\n"
                  "    - { sid: a2, op: read(flag), branch: [flag == true, a3, a1] }\n"
                  "    - { sid: a3, op: join(t) }\n  t:\n    body:\n    - { sid: b1, op: nop() }\n"),
    "E404": funcs("  main:\n    body:\n    - { sid: a1, op: spawn(main), next: a2 }\n"
                  "    - { sid: a2, op: join(main) }\n"),
    "E405": funcs("  main:\n    body:\n    - { sid: a1, op: spawn(t), next: a2 }\n    - { sid: a2, op: join(t) }\n"
                  "  t:\n    body:\n    - { sid: b1, op: spawn(t), next: b2 }\n    - { sid: b2, op: join(t) }\n"),
    "E406": funcs("  main:\n    body:\n    - { sid: a1, op: spawn(t), next: a2 }\n    - { sid: a2, op: join(t), next: a3 }\n"
                  "    - { sid: a3, op: join(t) }\n  t:\n    body:\n    - { sid: b1, op: nop() }\n"),
    "E501": doc("    - { sid: a1, op: lock(m0) }\n"),
    "E502": doc("    - { sid: a1, op: lock(m0), next: a2 }\n    - { sid: a2, op: lock(m0), next: a3 }\n"
                "    - { sid: a3, op: unlock(m0) }\n"),
    "E503": doc("    - { sid: a1, op: unlock(m0) }\n"),
    "E504": doc("    - { sid: a1, op: read(flag), branch: [flag == true, a2, a3] }\n"
                "    - { sid: a2, op: read_lock(rw), next: a4 }\n"
                "    - { sid: a3, op: write_lock(rw), next: a4 }\n"
                "    - { sid: a4, op: drop(rw) }\n"),
    "E601": doc("    - { sid: a1, op: nop(), next: a3 }\n    - { sid: a2, op: nop(), next: a3 }\n"
                "    - { sid: a3, op: nop() }\n"),
    "E602": doc("    - { sid: a1, op: nop(), next: a1 }\n"),
    "E603": doc("    - { sid: a1, op: read(x), switch: [x, { 0: a2, 0: a2 }, a2] }\n    - { sid: a2, op: nop() }\n"),
    "E604": doc("    - { sid: a1, op: nop(), next: zz }\n"),
    "E701": doc(tail="protection:\n  at: [m0]\n"),
    "E702": doc(tail="protection:\n  s0: [m0]\n"),
    "E703": doc(tail="protection:\n  x: [s0]\n"),
    "E704": doc(tail="protection:\n  x: []\n"),
    "E801": doc("    - { sid: a1, op: call(bump) }\n",
                tail="  bump:\n    body:\n    - { sid: b1, op: write(x, 1) }\n"
                     "summaries:\n  bump: { reads: [], writes: [], calls: [], has_concurrency: false }\n"),
    "E802": doc("    - { sid: a1, op: call(ext) }\n",
                tail="summaries:\n  ext: { reads: [zz], writes: [], calls: [], has_concurrency: false }\n"),
    "E803": doc("    - { sid: a1, op: call(ext) }\n",
                tail="summaries:\n  ext: { reads: [], writes: [], calls: [zz], has_concurrency: false }\n"),
    "E804": doc("    - { sid: a1, op: call(helper) }\n",
                tail="  helper:\n    body:\n    - { sid: b1, op: lock(m0), next: b2 }\n"
                     "    - { sid: b2, op: unlock(m0) }\n"
                     "summaries:\n  helper: { reads: [], writes: [], calls: [], has_concurrency: false }\n"),
    "E805": doc("    - { sid: a1, op: call(zz) }\n"),
    "E806": funcs(MAIN_SPAWNS_T,
                  tail="summaries:\n  t: { reads: [], writes: [], calls: [], has_concurrency: false }\n"),
    "E807": doc("    - { sid: a1, op: call(ext) }\n",
                tail="summaries:\n  ext: { reads: [], writes: [m0], calls: [], has_concurrency: false }\n"),
}
CHECK_CASES["E006"] = doc("").replace("    body:\n", "    body: []\n")


def test_every_rule_has_a_case():
    assert {r.code for r in RULES} == set(PARSE_CASES) | set(CHECK_CASES)
    assert {r.code for r in RULES if r.stage == "parse"} == set(PARSE_CASES)
    assert len(RULES) == 76


def test_baseline_documents_are_clean():
    assert check(parse_cir(doc())) == []
    assert check(parse_cir(funcs(MAIN_SPAWNS_T))) == []


@pytest.mark.parametrize("code", sorted(PARSE_CASES))
def test_parse_rule(code):
    with pytest.raises(CirParseError) as info:
        parse_cir(PARSE_CASES[code])
    assert code in [e.code for e in info.value.errors]


@pytest.mark.parametrize("code", sorted(CHECK_CASES))
def test_check_rule(code):
    artifact = parse_cir(CHECK_CASES[code], strict=False)
    codes = [e.code for e in check(artifact)]
    assert code in codes


@pytest.mark.parametrize("code", sorted(CHECK_CASES))
def test_severity_follows_catalogue(code):
    artifact = parse_cir(CHECK_CASES[code], strict=False)
    for e in check(artifact):
        if e.severity == "autofixable":
            assert e.code in AUTOFIXABLE


@pytest.mark.parametrize("name", list(PATTERNS.values()) + list(FIXED.values()) + list(REGRESSIONS))
def test_fixtures_are_check_clean(name):
    assert check(parse_cir(fixture_text(name))) == []


def test_errors_are_sorted_and_deterministic():
    a = parse_cir(fixture_text("static_undeclared.cir"), strict=False)
    first = check(a)
    assert first == check(a)
    assert first == sorted(first, key=lambda e: (e.anchor, e.code, e.message))
    assert {e.code for e in first} == {"E102", "E503", "E501"}


# -- auto-fix ----------------------------------------------------------------

RUNNING = fixture_text("pattern2_signal_loss.cir")


def test_missing_unlock_gets_a_drop():
    text = RUNNING.replace("wait(cv0, m0),   next: w3 }", "wait(cv0, m0) }").replace(
        "    - { sid: w3, op: unlock(m0) }\n", "")
    a = parse_cir(text)
    errors = check(a)
    assert [(e.code, e.anchor, e.severity) for e in errors] == [("E501", "w2", "autofixable")]
    fixed, fixes = autofix(a, errors)
    body = fixed.functions["worker"].body
    assert [s.sid for s in body] == ["w1", "w2", "w3_fix0"]
    assert str(body[2].op) == "drop(m0)"
    assert body[1].transfer == Next("w3_fix0")
    assert [f.code for f in fixes] == ["E501"]
    assert check(fixed) == []


def test_duplicate_sid_renamed():
    text = RUNNING.replace("notify_one(cv0),     next: n3", "notify_one(cv0),     next: n2").replace(
        "sid: n3,", "sid: n2,")
    a = parse_cir(text, strict=False)
    errors = check(a)
    assert [(e.code, e.anchor) for e in errors] == [("E101", "n2")]
    fixed, _ = autofix(a, errors)
    body = fixed.functions["notifier"].body
    assert [s.sid for s in body] == ["n1", "n2", "n2__1", "n4"]
    assert body[1].transfer == Next("n2__1")
    assert check(fixed) == []


def test_missing_transfer_gets_next():
    a = parse_cir(CHECK_CASES["E005"], strict=False)
    errors = check(a)
    fixed, fixes = autofix(a, errors)
    assert fixed.functions["t"].body[0].transfer == Next("a2")
    assert check(fixed) == []


def test_fix_with_no_errors_is_identity():
    a = parse_cir(RUNNING)
    fixed, fixes = autofix(a, [])
    assert fixed is a and fixes == []


def test_non_fixable_errors_are_left_alone():
    a = parse_cir(CHECK_CASES["E102"], strict=False)
    fixed, fixes = autofix(a, check(a))
    assert fixed == a and fixes == []


def test_conflicting_fixes_are_refused():
    # a1 is both duplicated and missing its transfer
    text = doc("    - { sid: a1, op: lock(m0) }\n    - { sid: a1, op: unlock(m0) }\n")
    a = parse_cir(text, strict=False)
    errors = check(a)
    anchors = [e.anchor for e in errors if e.severity == "autofixable"]
    assert len(anchors) != len(set(anchors))
    with pytest.raises(FixConflict):
        autofix(a, errors)


def test_fix_is_deterministic():
    a = parse_cir(fixture_text("static_missing_unlock.cir"))
    one, _ = autofix(a, check(a))
    two, _ = autofix(a, check(a))
    assert serialize_cir(one) == serialize_cir(two)


def test_drop_fix_on_a_returning_statement():
    text = doc("    - { sid: a1, op: lock(m0), next: a2 }\n    - { sid: a2, op: nop(), next: return }\n"
               "    - { sid: a3, op: nop() }\n")
    a = parse_cir(text, strict=False)
    errors = [e for e in check(a) if e.code == "E501"]
    assert [e.anchor for e in errors] == ["a2"]
    fixed, _ = autofix(a, errors)
    body = fixed.functions["t"].body
    assert [s.sid for s in body][:3] == ["a1", "a2", "a3_fix0"]
    assert body[2].transfer == Return()
