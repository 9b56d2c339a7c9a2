"""Deterministic well-formedness checking of CIR artifacts, plus mechanical auto-fixes.

Codes are grouped by category:

    E0 structural      E1 name resolution   E2 types
    E3 resource usage  E4 thread lifecycle  E5 lock discipline
    E6 control flow    E7 protection map    E8 summaries

Rules flagged autofixable are handled by :func:`autofix` (tier 1); every
other error needs the artifact to be regenerated (tier 2).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, List, Optional, Tuple

from .cir import (
    DATA_KINDS,
    LOCK_KINDS,
    OP_TARGET_KINDS,
    RESERVED_SIDS,
    SYNC_KINDS,
    Branch,
    CirArtifact,
    FunctionDef,
    Next,
    Op,
    Return,
    Statement,
    Switch,
    transfer_targets,
)
from .expr import (
    BASE_TYPES,
    BOOL_TYPES,
    And,
    BFalse,
    BinOp,
    BTrue,
    Cmp,
    Concrete,
    Lit,
    Not,
    Or,
    Ref,
)


@dataclass(frozen=True)
class Rule:
    code: str
    category: str
    description: str
    autofixable: bool = False
    stage: str = "check"  # "parse" rules are raised by the reader


_R = Rule
RULES: Tuple[Rule, ...] = (
    _R("E000", "E0", "malformed document syntax (indentation, brackets, key lines)", stage="parse"),
    _R("E001", "E0", "resource declaration is missing a required field", stage="parse"),
    _R("E002", "E0", "unknown resource kind", stage="parse"),
    _R("E003", "E0", "statement is missing 'sid'", stage="parse"),
    _R("E004", "E0", "statement is missing 'op'", stage="parse"),
    _R("E005", "E0", "non-final statement omits its transfer", autofixable=True),
    _R("E006", "E0", "function body is empty"),
    _R("E007", "E0", "artifact declares no functions"),
    _R("E008", "E0", "invalid literal", stage="parse"),
    _R("E009", "E0", "goal is missing 'id'", stage="parse"),
    _R("E010", "E0", "unknown operation name", stage="parse"),
    _R("E011", "E0", "operation has wrong arity or malformed arguments", stage="parse"),
    _R("E012", "E0", "invalid expression syntax", stage="parse"),
    _R("E013", "E0", "unexpected key or conflicting sections", stage="parse"),
    _R("E101", "E1", "duplicate sid", autofixable=True),
    _R("E102", "E1", "operation names an undeclared resource"),
    _R("E103", "E1", "duplicate resource name", stage="parse"),
    _R("E104", "E1", "spawn/join/await names an undefined function"),
    _R("E105", "E1", "entry function is undefined"),
    _R("E106", "E1", "protection key is undeclared"),
    _R("E107", "E1", "protection lock is undeclared"),
    _R("E108", "E1", "condvar is paired with an undeclared resource"),
    _R("E109", "E1", "goal completion names an undefined function"),
    _R("E110", "E1", "goal availability names an undeclared or non-synchronisation resource"),
    _R("E111", "E1", "goal variable is not a declared Var or Atomic"),
    _R("E112", "E1", "function name duplicates or clashes with a resource"),
    _R("E113", "E1", "statement uses a reserved sid"),
    _R("E114", "E1", "expression references an undeclared variable"),
    _R("E115", "E1", "duplicate goal id"),
    _R("E201", "E2", "branch condition is not boolean"),
    _R("E202", "E2", "written value does not match the variable type"),
    _R("E203", "E2", "initial value does not match the declared type"),
    _R("E204", "E2", "switch arm literal does not match the switch variable"),
    _R("E205", "E2", "cas operands do not match the atomic type"),
    _R("E206", "E2", "comparison between incompatible types"),
    _R("E207", "E2", "arithmetic on a non-numeric operand"),
    _R("E208", "E2", "goal variable literal does not match the variable type"),
    _R("E209", "E2", "enum literal is not a declared value of the variable"),
    _R("E210", "E2", "unknown base type"),
    _R("E301", "E3", "lock/drop target is not a lock"),
    _R("E302", "E3", "read_lock/write_lock target is not an RwLock"),
    _R("E303", "E3", "wait/notify target is not a Condvar"),
    _R("E304", "E3", "wait names a mutex other than the condvar's pair"),
    _R("E305", "E3", "acquire/release target is not a Semaphore"),
    _R("E306", "E3", "send/recv target is not a Channel"),
    _R("E307", "E3", "read/write target is not a Var"),
    _R("E308", "E3", "load/store/cas target is not an Atomic"),
    _R("E309", "E3", "access to a protected Var without holding a protecting lock"),
    _R("E310", "E3", "wait without holding the paired mutex"),
    _R("E311", "E3", "cas must use a branch transfer"),
    _R("E312", "E3", "condvar is paired with a non-Mutex resource"),
    _R("E401", "E4", "thread spawned but never joined"),
    _R("E402", "E4", "join of a thread that is never spawned"),
    _R("E403", "E4", "spawn inside a loop"),
    _R("E404", "E4", "spawn of the entry function"),
    _R("E405", "E4", "recursive spawn"),
    _R("E406", "E4", "thread joined more often than spawned"),
    _R("E501", "E5", "lock still held at function exit", autofixable=True),
    _R("E502", "E5", "double lock on some path"),
    _R("E503", "E5", "drop of a lock that is not held on some path"),
    _R("E504", "E5", "RwLock drop with ambiguous read/write mode"),
    _R("E601", "E6", "unreachable statement"),
    _R("E602", "E6", "no path to return"),
    _R("E603", "E6", "duplicate switch arm"),
    _R("E604", "E6", "transfer target is not a statement of the same function"),
    _R("E701", "E7", "Atomic in the protection map"),
    _R("E702", "E7", "protection key is not a Var"),
    _R("E703", "E7", "protector is not a lock"),
    _R("E704", "E7", "empty protection set"),
    _R("E801", "E8", "summary conflicts with the function body"),
    _R("E802", "E8", "summary names an undeclared resource"),
    _R("E803", "E8", "summary names an undefined callee"),
    _R("E804", "E8", "summary claims no concurrency but the body synchronises"),
    _R("E805", "E8", "call target has neither a body nor a summary"),
    _R("E806", "E8", "summary given for a spawned function"),
    _R("E807", "E8", "summary writes a non-data resource"),
)

RULE_INDEX: Dict[str, Rule] = {r.code: r for r in RULES}
AUTOFIXABLE = frozenset(r.code for r in RULES if r.autofixable)


@dataclass(frozen=True)
class CheckError:
    code: str
    severity: str  # "error" or "autofixable"
    anchor: str
    message: str
    suggestion: Optional[str] = None

    @property
    def category(self) -> str:
        return self.code[:2]

    def to_json(self) -> dict:
        out = {"code": self.code, "severity": self.severity, "anchor": self.anchor, "message": self.message}
        if self.suggestion:
            out["suggestion"] = self.suggestion
        return out


@dataclass(frozen=True)
class AppliedFix:
    code: str
    anchor: str
    description: str


class FixConflict(Exception):
    """Two auto-fixes want to rewrite the same statement."""


def errors_to_json(errors) -> list:
    return [e.to_json() for e in errors]


# ---------------------------------------------------------------------------
# control flow and lock-set helpers, shared with the translator
# ---------------------------------------------------------------------------

Held = FrozenSet[Tuple[str, str]]  # (lock, mode) with mode in {"x", "r", "w"}


def _acquire_mode(op: Op, artifact: CirArtifact) -> Optional[str]:
    if op.kind == "lock":
        return "w" if artifact.resource_kind(op.target) == "RwLock" else "x"
    if op.kind == "read_lock":
        return "r"
    if op.kind == "write_lock":
        return "w"
    return None


def _step_held(op: Op, held: Held, artifact: CirArtifact) -> Held:
    mode = _acquire_mode(op, artifact)
    if mode is not None:
        return held | {(op.target, mode)}
    if op.kind == "drop":
        return frozenset(h for h in held if h[0] != op.target)
    return held


def _local_successors(fn: FunctionDef, index: int, sids) -> List[str]:
    return [s for s in fn.successors(index) if s in sids or s == "ret"]


def held_sets(fn: FunctionDef, artifact: CirArtifact) -> Dict[str, set]:
    """Every lock set that can be held on entry to each statement (path-sensitive)."""
    index = {s.sid: i for i, s in enumerate(fn.body)}
    if not fn.body or len(index) != len(fn.body):
        return {}
    inn: Dict[str, set] = {sid: set() for sid in index}
    inn[fn.body[0].sid].add(frozenset())
    work = [fn.body[0].sid]
    while work:
        sid = work.pop()
        i = index[sid]
        outs = {_step_held(fn.body[i].op, h, artifact) for h in inn[sid]}
        for succ in _local_successors(fn, i, index):
            if succ == "ret":
                continue
            new = outs - inn[succ]
            if new:
                inn[succ] |= new
                work.append(succ)
    return inn


def exit_held(fn: FunctionDef, artifact: CirArtifact) -> Dict[str, set]:
    """Lock sets held just after each statement that returns."""
    inn = held_sets(fn, artifact)
    out = {}
    for i, s in enumerate(fn.body):
        if "ret" in fn.successors(i) and inn.get(s.sid):
            out[s.sid] = {_step_held(s.op, h, artifact) for h in inn[s.sid]}
    return out


def drop_modes(fn: FunctionDef, artifact: CirArtifact) -> Dict[str, str]:
    """For every RwLock drop, the unique mode ("r" or "w") it releases."""
    inn = held_sets(fn, artifact)
    out = {}
    for s in fn.body:
        if s.op.kind == "drop" and artifact.resource_kind(s.op.target) == "RwLock":
            modes = {m for h in inn.get(s.sid, ()) for (l, m) in h if l == s.op.target}
            if len(modes) == 1:
                out[s.sid] = modes.pop()
    return out


def reachable_sids(fn: FunctionDef) -> set:
    index = {s.sid: i for i, s in enumerate(fn.body)}
    if not fn.body:
        return set()
    seen = {fn.body[0].sid}
    stack = [fn.body[0].sid]
    while stack:
        i = index[stack.pop()]
        for succ in fn.successors(i):
            if succ in index and succ not in seen:
                seen.add(succ)
                stack.append(succ)
    return seen


def _on_cycle(fn: FunctionDef, sid: str) -> bool:
    index = {s.sid: i for i, s in enumerate(fn.body)}
    stack = [s for s in fn.successors(index[sid]) if s in index]
    seen = set()
    while stack:
        cur = stack.pop()
        if cur == sid:
            return True
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(s for s in fn.successors(index[cur]) if s in index)
    return False


def _sync_ops(fn: FunctionDef) -> bool:
    return any(s.op.kind in OP_TARGET_KINDS and s.op.kind not in ("read", "write", "load", "store")
               or s.op.kind in ("spawn", "join", "spawn_async", "await") for s in fn.body)


# ---------------------------------------------------------------------------
# the checker
# ---------------------------------------------------------------------------

_NUMERIC = ("Int", "Float")


class _Checker:
    def __init__(self, a: CirArtifact):
        self.a = a
        self.errors: List[CheckError] = []

    def add(self, code, anchor, message, suggestion=None, fixable=None):
        rule = RULE_INDEX[code]
        fixable = rule.autofixable if fixable is None else fixable
        self.errors.append(CheckError(code, "autofixable" if fixable else "error", anchor, message, suggestion))

    def kind(self, name):
        return self.a.resource_kind(name)

    # -- types ------------------------------------------------------------

    def var_decl(self, name):
        r = self.a.resources.get(name)
        return r if r is not None and r.kind in DATA_KINDS else None

    def lit_fits(self, lit: Concrete, decl) -> bool:
        if decl.type == "Float" and lit.type == "Int":
            return True
        if lit.type != decl.type:
            return False
        return lit.type != "Enum" or lit.value in decl.values

    def lit_error(self, lit: Concrete, decl, code, anchor, what):
        if lit.type == "Enum" and decl.type == "Enum":
            self.add("E209", anchor, f"{what}: {lit.value} is not a value of {decl.name}")
        else:
            self.add(code, anchor, f"{what}: {lit.type} literal for {decl.type} {decl.name}")

    def expr_type(self, e, anchor) -> Optional[str]:
        if isinstance(e, Lit):
            return e.value.type
        if isinstance(e, Ref):
            d = self.var_decl(e.name)
            if d is None:
                self.add("E114", anchor, f"undeclared variable {e.name!r} in expression")
                return None
            return d.type
        if isinstance(e, BinOp):
            lt, rt = self.expr_type(e.left, anchor), self.expr_type(e.right, anchor)
            if lt is None or rt is None:
                return None
            if e.op == "+" and lt == rt == "String":
                return "String"
            if lt in _NUMERIC and rt in _NUMERIC:
                return "Int" if lt == rt == "Int" else "Float"
            self.add("E207", anchor, f"operator {e.op} applied to {lt} and {rt}")
            return None
        if isinstance(e, BOOL_TYPES):
            self.cond(e, anchor)
            return "Bool"
        return None

    def enum_side(self, ref, lit, anchor):
        if isinstance(ref, Ref) and isinstance(lit, Lit) and lit.value.type == "Enum":
            d = self.var_decl(ref.name)
            if d is not None and d.type == "Enum" and lit.value.value not in d.values:
                self.add("E209", anchor, f"{lit.value.value} is not a value of {d.name}")

    def cond(self, c, anchor):
        if isinstance(c, (BTrue, BFalse)):
            return
        if isinstance(c, Cmp):
            lt, rt = self.expr_type(c.left, anchor), self.expr_type(c.right, anchor)
            if lt is not None and rt is not None:
                same = lt == rt or (lt in _NUMERIC and rt in _NUMERIC)
                ordered = c.op in ("==", "!=") or (lt in _NUMERIC + ("String",))
                if not same or not ordered:
                    self.add("E206", anchor, f"cannot compare {lt} {c.op} {rt}")
            self.enum_side(c.left, c.right, anchor)
            self.enum_side(c.right, c.left, anchor)
            return
        if isinstance(c, (And, Or)):
            self.cond(c.left, anchor)
            self.cond(c.right, anchor)
            return
        if isinstance(c, Not):
            self.cond(c.arg, anchor)
            return
        self.add("E201", anchor, "condition must be a comparison or boolean connective")

    # -- sections ---------------------------------------------------------

    def resources(self):
        for name, r in self.a.resources.items():
            anchor = f"resource:{name}"
            if r.kind == "Condvar":
                pk = self.kind(r.paired_with)
                if pk is None:
                    self.add("E108", anchor, f"condvar {name} is paired with undeclared {r.paired_with!r}")
                elif pk != "Mutex":
                    self.add("E312", anchor, f"condvar {name} is paired with {pk} {r.paired_with}")
            if r.kind in DATA_KINDS:
                if r.type not in BASE_TYPES:
                    self.add("E210", anchor, f"unknown base type {r.type!r}")
                    continue
                if r.type == "Enum" and not r.values:
                    self.add("E209", anchor, f"Enum {name} declares no values")
                if r.init is not None and not self.lit_fits(r.init, r):
                    self.lit_error(r.init, r, "E203", anchor, "init")
            if name in self.a.functions:
                self.add("E112", anchor, f"{name!r} is both a resource and a function")

    def protection(self):
        for var, locks in self.a.protection.items():
            anchor = f"protection:{var}"
            k = self.kind(var)
            if k is None:
                self.add("E106", anchor, f"protection key {var!r} is undeclared")
            elif k == "Atomic":
                self.add("E701", anchor, f"Atomic {var} does not need a protecting lock")
            elif k != "Var":
                self.add("E702", anchor, f"protection key {var} is a {k}, not a Var")
            if not locks:
                self.add("E704", anchor, f"protection set of {var} is empty")
            for lock in locks:
                lk = self.kind(lock)
                if lk is None:
                    self.add("E107", anchor, f"protection lock {lock!r} is undeclared")
                elif lk not in LOCK_KINDS:
                    self.add("E703", anchor, f"protector {lock} is a {lk}, not a lock")

    def structure(self):
        a = self.a
        if not a.functions:
            self.add("E007", "artifact", "no functions are defined")
        if a.entry is None or a.entry not in a.functions:
            self.add("E105", "artifact", f"entry function {a.entry!r} is undefined")
        seen: Dict[str, str] = {}
        for fn in a.functions.values():
            if not fn.body:
                self.add("E006", f"function:{fn.name}", f"function {fn.name} has an empty body")
            for s in fn.body:
                if s.sid in RESERVED_SIDS:
                    self.add("E113", s.sid, f"sid {s.sid!r} is reserved")
                if s.sid in seen:
                    self.add("E101", s.sid, f"duplicate sid {s.sid!r} (first in {seen[s.sid]})",
                             suggestion=f"rename to {_fresh_dup(s.sid, a)}")
                else:
                    seen[s.sid] = fn.name

    def statements(self):
        for fn in self.a.functions.values():
            sids = {s.sid for s in fn.body}
            for i, s in enumerate(fn.body):
                self.statement(fn, i, s, sids)

    def statement(self, fn, i, s: Statement, sids):
        a, anchor, op = self.a, s.sid, s.op
        if s.transfer is None and i + 1 < len(fn.body):
            self.add("E005", anchor, f"{s.sid} has no transfer but is not the last statement",
                     suggestion=f"next: {fn.body[i + 1].sid}")
        for t in transfer_targets(s.transfer):
            if t not in sids:
                self.add("E604", anchor, f"transfer target {t!r} is not in function {fn.name}")
        k = op.kind
        if k in OP_TARGET_KINDS:
            target = op.target
            tk = self.kind(target)
            if tk is None:
                self.add("E102", anchor, f"undeclared resource {target!r} in {op}")
            elif tk not in OP_TARGET_KINDS[k]:
                code = {
                    "lock": "E301", "drop": "E301", "read_lock": "E302", "write_lock": "E302",
                    "wait": "E303", "notify_one": "E303", "notify_all": "E303",
                    "acquire": "E305", "release": "E305", "send": "E306", "recv": "E306",
                    "read": "E307", "write": "E307", "load": "E308", "store": "E308", "cas": "E308",
                }[k]
                self.add(code, anchor, f"{op.name} cannot target {tk} {target}")
            if k == "wait":
                m = op.args[1]
                mk = self.kind(m)
                if mk is None:
                    self.add("E102", anchor, f"undeclared resource {m!r} in {op}")
                elif tk == "Condvar" and a.resources[target].paired_with != m:
                    self.add("E304", anchor, f"{target} is paired with {a.resources[target].paired_with}, not {m}")
            decl = self.var_decl(target) if tk in DATA_KINDS else None
            if k in ("write", "store") and decl is not None:
                self.value_fits(op.args[1], decl, "E202", anchor, op.name)
            if k == "cas":
                if decl is not None:
                    self.value_fits(op.args[1], decl, "E205", anchor, "cas expected")
                    self.value_fits(op.args[2], decl, "E205", anchor, "cas new")
                if not isinstance(s.transfer, Branch):
                    self.add("E311", anchor, "cas needs 'branch: [cond, on_success, on_failure]'")
        elif k in ("spawn", "join", "spawn_async", "await"):
            if op.target not in a.functions:
                self.add("E104", anchor, f"{op.name} names undefined function {op.target!r}")
        elif k == "call":
            if op.target not in a.functions and op.target not in a.summaries:
                self.add("E805", anchor, f"call target {op.target!r} has neither a body nor a summary")
        if isinstance(s.transfer, Branch):
            self.cond(s.transfer.cond, anchor)
        if isinstance(s.transfer, Switch):
            d = self.var_decl(s.transfer.var)
            if d is None:
                self.add("E114", anchor, f"switch on undeclared variable {s.transfer.var!r}")
            values = [v for v, _ in s.transfer.arms]
            for j, v in enumerate(values):
                if v in values[:j]:
                    self.add("E603", anchor, f"duplicate switch arm {v}")
                if d is not None and not self.lit_fits(v, d):
                    self.lit_error(v, d, "E204", anchor, "switch arm")

    def value_fits(self, e, decl, code, anchor, what):
        t = self.expr_type(e, anchor)
        if t is None:
            return
        ok = t == decl.type or (decl.type == "Float" and t == "Int")
        if not ok:
            self.add(code, anchor, f"{what}: {t} value for {decl.type} {decl.name}")
        elif isinstance(e, Lit) and e.value.type == "Enum" and e.value.value not in decl.values:
            self.add("E209", anchor, f"{e.value.value} is not a value of {decl.name}")

    def control_flow(self):
        for fn in self.a.functions.values():
            if not fn.body or len({s.sid for s in fn.body}) != len(fn.body):
                continue
            reach = reachable_sids(fn)
            for s in fn.body:
                if s.sid not in reach:
                    self.add("E601", s.sid, f"{s.sid} is unreachable from the start of {fn.name}")
            # backwards reachability from ret
            index = {s.sid: i for i, s in enumerate(fn.body)}
            can_ret = set()
            changed = True
            while changed:
                changed = False
                for i, s in enumerate(fn.body):
                    if s.sid in can_ret:
                        continue
                    succ = fn.successors(i)
                    if "ret" in succ or any(x in can_ret for x in succ if x in index):
                        can_ret.add(s.sid)
                        changed = True
            stuck = [s.sid for s in fn.body if s.sid in reach and s.sid not in can_ret]
            if stuck:
                self.add("E602", stuck[0], f"no path from {stuck[0]} to the return of {fn.name}")

    def locks(self):
        a = self.a
        for fn in a.functions.values():
            inn = held_sets(fn, a)
            if not inn:
                continue
            for i, s in enumerate(fn.body):
                hs = inn[s.sid]
                if not hs:
                    continue
                op, anchor = s.op, s.sid
                if _acquire_mode(op, a) is not None and self.kind(op.target) in LOCK_KINDS:
                    if any(any(l == op.target for l, _ in h) for h in hs):
                        self.add("E502", anchor, f"{op.target} may already be held at {s.sid}")
                if op.kind == "drop" and self.kind(op.target) in LOCK_KINDS:
                    if any(all(l != op.target for l, _ in h) for h in hs):
                        self.add("E503", anchor, f"{op.target} may not be held at {s.sid}")
                    if self.kind(op.target) == "RwLock":
                        modes = {m for h in hs for l, m in h if l == op.target}
                        if len(modes) > 1:
                            self.add("E504", anchor, f"drop of {op.target} may release a read or a write lock")
                if op.kind == "wait" and self.kind(op.args[1]) in LOCK_KINDS:
                    if any(all(l != op.args[1] for l, _ in h) for h in hs):
                        self.add("E310", anchor, f"wait at {s.sid} may run without holding {op.args[1]}")
                if op.kind in ("read", "write") and self.kind(op.target) == "Var":
                    guards = set(a.protection.get(op.target, ()))
                    if guards and any(not guards & {l for l, _ in h} for h in hs):
                        self.add("E309", anchor,
                                 f"{op.kind} of {op.target} at {s.sid} may run without holding "
                                 f"{' or '.join(sorted(guards))}")
            for sid, outs in exit_held(fn, a).items():
                held = {l for h in outs for l, _ in h}
                if held:
                    unanimous = len(outs) == 1
                    self.add("E501", sid,
                             f"{', '.join(sorted(held))} still held when {fn.name} returns after {sid}",
                             suggestion=f"insert drop({', '.join(sorted(held))}) after {sid}" if unanimous else None,
                             fixable=unanimous)

    def threads(self):
        a = self.a
        spawns: Dict[str, List[Tuple[str, str]]] = {}
        joins: Dict[str, List[str]] = {}
        edges: Dict[str, set] = {}
        for fn in a.functions.values():
            for s in fn.body:
                if s.op.kind in ("spawn", "spawn_async") and s.op.target in a.functions:
                    edges.setdefault(fn.name, set()).add(s.op.target)
                    if s.op.kind == "spawn":
                        spawns.setdefault(s.op.target, []).append((fn.name, s.sid))
                    if s.op.target == a.entry:
                        self.add("E404", s.sid, f"{s.sid} spawns the entry function")
                    if fn.body and len({x.sid for x in fn.body}) == len(fn.body) and _on_cycle(fn, s.sid):
                        self.add("E403", s.sid, f"{s.sid} spawns inside a loop")
                if s.op.kind == "join" and s.op.target in a.functions:
                    joins.setdefault(s.op.target, []).append(s.sid)
        for target, sites in spawns.items():
            if target not in joins:
                self.add("E401", sites[0][1], f"{target} is spawned but never joined")
            elif len(joins[target]) > len(sites):
                self.add("E406", joins[target][-1], f"{target} is joined {len(joins[target])} times "
                                                    f"but spawned {len(sites)}")
        for target, sites in joins.items():
            if target not in spawns:
                self.add("E402", sites[0], f"join of {target}, which is never spawned")
        # recursion in the spawn graph
        for start in sorted(edges):
            stack = list(edges[start])
            seen = set()
            while stack:
                cur = stack.pop()
                if cur == start:
                    self.add("E405", f"function:{start}", f"{start} (transitively) spawns itself")
                    break
                if cur not in seen:
                    seen.add(cur)
                    stack.extend(edges.get(cur, ()))

    def summaries(self):
        a = self.a
        spawned = {s.op.target for fn in a.functions.values() for s in fn.body
                   if s.op.kind in ("spawn", "spawn_async")}
        for name, summ in a.summaries.items():
            anchor = f"summary:{name}"
            for r in summ.reads + summ.writes:
                if r not in a.resources:
                    self.add("E802", anchor, f"summary of {name} names undeclared {r!r}")
            for r in summ.writes:
                if self.kind(r) is not None and self.kind(r) not in DATA_KINDS:
                    self.add("E807", anchor, f"summary of {name} writes {self.kind(r)} {r}")
            for c in summ.calls:
                if c not in a.functions and c not in a.summaries:
                    self.add("E803", anchor, f"summary of {name} calls undefined {c!r}")
            if name in spawned:
                self.add("E806", anchor, f"{name} is spawned, so it needs a body rather than a summary")
            fn = a.functions.get(name)
            if fn is not None:
                written = {s.op.target for s in fn.body if s.op.kind in ("write", "store", "cas")}
                missing = written - set(summ.writes)
                if missing:
                    self.add("E801", anchor, f"body of {name} writes {', '.join(sorted(missing))} "
                                             f"missing from its summary")
                if not summ.has_concurrency and _sync_ops(fn):
                    self.add("E804", anchor, f"body of {name} synchronises but has_concurrency is false")

    def goals(self):
        a = self.a
        seen = set()
        for g in a.goals:
            anchor = f"goal:{g.id}"
            if g.id in seen:
                self.add("E115", anchor, f"duplicate goal id {g.id}")
            seen.add(g.id)
            for f in g.completion:
                if f not in a.functions:
                    self.add("E109", anchor, f"goal {g.id} requires undefined function {f!r}")
            for r in g.availability:
                if self.kind(r) not in SYNC_KINDS:
                    self.add("E110", anchor, f"goal {g.id} requires availability of {r!r}")
            for var, lit in g.variables:
                d = self.var_decl(var)
                if d is None:
                    self.add("E111", anchor, f"goal {g.id} constrains undeclared variable {var!r}")
                elif d.type in BASE_TYPES and not self.lit_fits(lit, d):
                    self.lit_error(lit, d, "E208", anchor, f"goal {g.id}")

    def run(self) -> List[CheckError]:
        self.structure()
        self.resources()
        self.protection()
        self.statements()
        self.control_flow()
        self.locks()
        self.threads()
        self.summaries()
        self.goals()
        unique = list(dict.fromkeys(self.errors))
        return sorted(unique, key=lambda e: (e.anchor, e.code, e.message))


def check(artifact: CirArtifact) -> List[CheckError]:
    """All rule violations, sorted by anchor then code; empty iff the artifact is accepted."""
    return _Checker(artifact).run()


def list_rules() -> Tuple[Rule, ...]:
    return RULES


# ---------------------------------------------------------------------------
# auto-fix
# ---------------------------------------------------------------------------


def _fresh_dup(sid: str, artifact: CirArtifact, taken=None) -> str:
    taken = set(artifact.all_sids()) if taken is None else taken
    k = 1
    while f"{sid}__{k}" in taken:
        k += 1
    return f"{sid}__{k}"


def _fix_sid(sid: str, taken) -> str:
    head = sid.rstrip("0123456789")
    base = f"{head}{int(sid[len(head):]) + 1}" if head != sid else sid
    k = 0
    while f"{base}_fix{k}" in taken:
        k += 1
    return f"{base}_fix{k}"


def _retarget(t, old, new):
    def swap(x):
        return new if x == old else x

    if isinstance(t, Next):
        return Next(swap(t.sid))
    if isinstance(t, Branch):
        return Branch(t.cond, swap(t.then), swap(t.orelse))
    if isinstance(t, Switch):
        return Switch(t.var, tuple((v, swap(s)) for v, s in t.arms), swap(t.default))
    return t


def autofix(artifact: CirArtifact, errors) -> Tuple[CirArtifact, List[AppliedFix]]:
    """Apply the mechanical rewrites for autofixable errors; others are left alone."""
    todo = [e for e in errors if e.severity == "autofixable"]
    if not todo:
        return artifact, []
    targets = [e.anchor for e in todo]
    dup = {t for t in targets if targets.count(t) > 1}
    if dup:
        raise FixConflict(f"several fixes target {', '.join(sorted(dup))}")
    fixes: List[AppliedFix] = []
    a = artifact

    # duplicate sids first: later rewrites look statements up by sid
    for e in [e for e in todo if e.code == "E101"]:
        taken = set(a.all_sids())
        first = None
        for fn in a.functions.values():
            for i, s in enumerate(fn.body):
                if s.sid != e.anchor:
                    continue
                if first is None:
                    first = (fn.name, i)
                    continue
                new = _fresh_dup(s.sid, a, taken)
                taken.add(new)
                body = list(fn.body)
                same_fn = first[0] == fn.name
                for j, st in enumerate(body):
                    if j == i:
                        st = replace(st, sid=new)
                    if not same_fn or j >= first[1]:
                        st = replace(st, transfer=_retarget(st.transfer, e.anchor, new))
                    body[j] = st
                fn = replace(fn, body=tuple(body))
                a = a.with_function(fn)
                fixes.append(AppliedFix("E101", e.anchor, f"renamed duplicate {e.anchor} to {new}"))
    for e in [e for e in todo if e.code == "E005"]:
        loc = a.locate(e.anchor)
        if loc is None:
            continue
        fn, i = loc
        body = list(fn.body)
        body[i] = replace(body[i], transfer=Next(body[i + 1].sid))
        a = a.with_function(replace(fn, body=tuple(body)))
        fixes.append(AppliedFix("E005", e.anchor, f"added next: {body[i + 1].sid}"))
    for e in [e for e in todo if e.code == "E501"]:
        loc = a.locate(e.anchor)
        if loc is None:
            continue
        fn, i = loc
        outs = exit_held(fn, a).get(e.anchor, set())
        if len(outs) != 1:
            continue
        locks = sorted({l for l, _ in next(iter(outs))})
        taken = set(a.all_sids())
        new_sids = []
        for _ in locks:
            sid = _fix_sid(e.anchor, taken)
            taken.add(sid)
            new_sids.append(sid)
        body = list(fn.body)
        exit_st = body[i]
        last = i + 1 == len(body)
        inserted = []
        for k, (lock, sid) in enumerate(zip(locks, new_sids)):
            if k + 1 < len(locks):
                transfer = Next(new_sids[k + 1])
            else:
                transfer = None if last and exit_st.transfer is None else Return()
            inserted.append(Statement(sid, Op("drop", (lock,)), transfer))
        body[i] = replace(exit_st, transfer=Next(new_sids[0]))
        body[i + 1:i + 1] = inserted
        a = a.with_function(replace(fn, body=tuple(body)))
        fixes.append(AppliedFix("E501", e.anchor,
                                f"inserted {', '.join(f'drop({l})' for l in locks)} after {e.anchor} "
                                f"as {', '.join(new_sids)}"))
    return a, fixes
