"""Domain types for CIR artifacts.

An artifact is the 6-tuple (resources, protection, functions, summaries,
entry, goals).  Every statement carries a stable ``sid`` and an operation
that is independent of its control transfer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple, Union

from .expr import Concrete, Expr, format_expr

SID_BOTTOM = "sid_⊥"
RESERVED_SIDS = frozenset({SID_BOTTOM, "ret", "return"})

RESOURCE_KINDS = ("Mutex", "RwLock", "Condvar", "Semaphore", "Channel", "Var", "Atomic")
SYNC_KINDS = ("Mutex", "RwLock", "Condvar", "Semaphore", "Channel")
LOCK_KINDS = ("Mutex", "RwLock")
DATA_KINDS = ("Var", "Atomic")
FUNCTION_KINDS = ("normal", "async", "closure")

# op name -> argument shape; "n" is a name, "e" an expression
OP_SIGNATURES = {
    "lock": "n",
    "drop": "n",
    "unlock": "n",
    "read_lock": "n",
    "write_lock": "n",
    "wait": "nn",
    "notify_one": "n",
    "notify_all": "n",
    "acquire": "n",
    "release": "n",
    "send": "n",
    "recv": "n",
    "read": "n",
    "write": "ne",
    "load": "n",
    "store": "ne",
    "cas": "nee",
    "spawn": "n",
    "join": "n",
    "spawn_async": "n",
    "await": "n",
    "call": "n",
    "nop": "",
}

# which resource kinds each op may target (first argument)
OP_TARGET_KINDS = {
    "lock": LOCK_KINDS,
    "drop": LOCK_KINDS,
    "read_lock": ("RwLock",),
    "write_lock": ("RwLock",),
    "wait": ("Condvar",),
    "notify_one": ("Condvar",),
    "notify_all": ("Condvar",),
    "acquire": ("Semaphore",),
    "release": ("Semaphore",),
    "send": ("Channel",),
    "recv": ("Channel",),
    "read": ("Var",),
    "write": ("Var",),
    "load": ("Atomic",),
    "store": ("Atomic",),
    "cas": ("Atomic",),
}

FUNCTION_OPS = ("spawn", "join", "spawn_async", "await", "call")


@dataclass(frozen=True)
class Op:
    """An operation as written; ``unlock`` is kept verbatim but behaves as ``drop``."""

    name: str
    args: Tuple[Union[str, Expr], ...] = ()

    @property
    def kind(self) -> str:
        return "drop" if self.name == "unlock" else self.name

    @property
    def target(self) -> Optional[str]:
        return self.args[0] if self.args else None

    def names(self) -> Tuple[str, ...]:
        sig = OP_SIGNATURES[self.name]
        return tuple(a for a, s in zip(self.args, sig) if s == "n")

    def exprs(self) -> Tuple[Expr, ...]:
        sig = OP_SIGNATURES[self.name]
        return tuple(a for a, s in zip(self.args, sig) if s == "e")

    def __str__(self) -> str:
        if not self.args:
            return self.name
        sig = OP_SIGNATURES[self.name]
        parts = [a if s == "n" else format_expr(a) for a, s in zip(self.args, sig)]
        return f"{self.name}({', '.join(parts)})"


NOP = Op("nop")


@dataclass(frozen=True)
class Next:
    sid: str


@dataclass(frozen=True)
class Branch:
    cond: object  # BoolExpr, or a bare Expr that the checker rejects
    then: str
    orelse: str


@dataclass(frozen=True)
class Switch:
    var: str
    arms: Tuple[Tuple[Concrete, str], ...]
    default: str


@dataclass(frozen=True)
class Return:
    pass


Transfer = Union[Next, Branch, Switch, Return]


def transfer_targets(t: Optional[Transfer]) -> Tuple[str, ...]:
    if isinstance(t, Next):
        return (t.sid,)
    if isinstance(t, Branch):
        return (t.then, t.orelse)
    if isinstance(t, Switch):
        return tuple(s for _, s in t.arms) + (t.default,)
    return ()


@dataclass(frozen=True)
class Statement:
    sid: str
    op: Op
    transfer: Optional[Transfer] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FunctionDef:
    name: str
    kind: str = "normal"
    body: Tuple[Statement, ...] = ()
    synthetic: bool = False

    @property
    def entry_sid(self) -> Optional[str]:
        return self.body[0].sid if self.body else None

    @property
    def ret_sid(self) -> str:
        return "ret"

    def statement(self, sid: str) -> Optional[Statement]:
        for s in self.body:
            if s.sid == sid:
                return s
        return None

    def successors(self, index: int) -> Tuple[str, ...]:
        """Successor sids of ``body[index]``; an omitted transfer falls through."""
        s = self.body[index]
        if s.transfer is None:
            if index + 1 < len(self.body):
                return (self.body[index + 1].sid,)
            return (self.ret_sid,)
        if isinstance(s.transfer, Return):
            return (self.ret_sid,)
        return transfer_targets(s.transfer)


def effective_transfer(fn: FunctionDef, index: int) -> Transfer:
    """The transfer that control actually follows.

    An omitted transfer on the final statement is an implicit return; on any
    other statement it is a checker error (auto-fixed to fall through).
    """
    s = fn.body[index]
    if s.transfer is not None:
        return s.transfer
    if index + 1 < len(fn.body):
        return Next(fn.body[index + 1].sid)
    return Return()


@dataclass(frozen=True)
class ResourceDecl:
    name: str
    kind: str
    paired_with: Optional[str] = None
    count: Optional[int] = None
    type: Optional[str] = None
    init: Optional[Concrete] = None
    values: Tuple[str, ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FunctionSummary:
    reads: Tuple[str, ...] = ()
    writes: Tuple[str, ...] = ()
    calls: Tuple[str, ...] = ()
    has_concurrency: bool = False


@dataclass(frozen=True)
class BusinessGoal:
    id: str
    description: str = ""
    completion: Tuple[str, ...] = ()
    availability: Tuple[str, ...] = ()
    variables: Tuple[Tuple[str, Concrete], ...] = ()


@dataclass(frozen=True)
class CirArtifact:
    resources: Dict[str, ResourceDecl] = field(default_factory=dict)
    protection: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    functions: Dict[str, FunctionDef] = field(default_factory=dict)
    summaries: Dict[str, FunctionSummary] = field(default_factory=dict)
    entry: Optional[str] = None
    goals: Tuple[BusinessGoal, ...] = ()
    # True when the document used the ``threads:`` shorthand
    threads: bool = False

    def resource_kind(self, name: str) -> Optional[str]:
        r = self.resources.get(name)
        return r.kind if r else None

    def user_functions(self):
        return [f for f in self.functions.values() if not f.synthetic]

    def locate(self, sid: str) -> Optional[Tuple[FunctionDef, int]]:
        for fn in self.functions.values():
            for i, s in enumerate(fn.body):
                if s.sid == sid:
                    return fn, i
        return None

    def all_sids(self):
        return [s.sid for fn in self.functions.values() for s in fn.body]

    def with_function(self, fn: FunctionDef) -> "CirArtifact":
        funcs = dict(self.functions)
        funcs[fn.name] = fn
        return replace(self, functions=funcs)


def build_thread_entry(thread_names, taken) -> FunctionDef:
    """Implicit entry for the ``threads:`` shorthand: spawn all, then join all in order."""
    name = "main"
    while name in taken:
        name = "_" + name
    ops = [(f"_spawn_{t}", Op("spawn", (t,))) for t in thread_names]
    ops += [(f"_join_{t}", Op("join", (t,))) for t in thread_names]
    body = []
    for i, (sid, op) in enumerate(ops):
        nxt = Next(ops[i + 1][0]) if i + 1 < len(ops) else None
        body.append(Statement(sid, op, nxt))
    return FunctionDef(name, "normal", tuple(body), synthetic=True)
