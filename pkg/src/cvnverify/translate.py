"""Translation of checker-accepted CIR artifacts into nets, and of goals into queries.

Three phases: resource scan (resource places, store, condvar auxiliaries),
statement translation, and summarised calls.  No transitions are merged
and nothing is optimised away, so every statement keeps its own transitions.

Control flow is encoded uniformly: an operation whose transfer is ``Next``
moves the control token straight to the successor's place.  For ``Return``,
``Branch`` and ``Switch`` the operation first moves the token to a hidden
place ``cp(f, sid')`` from which the transfer transitions leave.  A ``cas``
with a branch is the exception: its success and failure transitions are the
branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .checker import drop_modes
from .cir import (
    DATA_KINDS,
    SID_BOTTOM,
    SYNC_KINDS,
    Branch,
    BusinessGoal,
    CirArtifact,
    FunctionDef,
    Next,
    Return,
    Statement,
    Switch,
    effective_transfer,
)
from .cvn import AUX, CONTROL, RESOURCE, Cvn, Place, Transition, cp, ra, rp, wp
from .expr import (
    TOP,
    BinOp,
    BTrue,
    Cmp,
    Concrete,
    Lit,
    Not,
    Ref,
    Value,
    boolean,
    conj,
    integer,
)


class UnknownGoalTarget(KeyError):
    pass


def hidden(sid: str) -> str:
    return sid + "'"


def nw_var(cv: str) -> str:
    return f"nw_{cv}"


def na_var(sid: str) -> str:
    return f"na_{sid}"


@dataclass(frozen=True)
class GoalQuery:
    goal_id: str
    description: str = ""
    completion: Tuple[Tuple[str, int], ...] = ()  # (cp(f,ret), 1)
    availability: Tuple[Tuple[str, int], ...] = ()  # (rp(r), I_m(rp(r)))
    variables: Tuple[Tuple[str, Concrete], ...] = ()
    # CIR names the checks came from, in the same order
    completion_names: Tuple[str, ...] = field(default=(), compare=False)
    availability_names: Tuple[str, ...] = field(default=(), compare=False)

    def satisfied(self, net: Cvn, state) -> bool:
        m = state.marking
        for pid, k in self.completion + self.availability:
            if m[net.place_index(pid)] < k:
                return False
        for var, lit in self.variables:
            if net.value(state, var) != lit:
                return False
        return True


def concurrency_bound(artifact: CirArtifact) -> int:
    """N: the entry thread plus one per static spawn/spawn_async site."""
    return 1 + sum(
        1 for fn in artifact.functions.values() for s in fn.body if s.op.kind in ("spawn", "spawn_async")
    )


def initial_tokens(artifact: CirArtifact) -> Dict[str, int]:
    n = concurrency_bound(artifact)
    out = {}
    for r in artifact.resources.values():
        if r.kind == "Mutex":
            out[r.name] = 1
        elif r.kind == "RwLock":
            out[r.name] = n
        elif r.kind == "Semaphore":
            out[r.name] = r.count or 0
        elif r.kind in ("Channel", "Condvar"):
            out[r.name] = 0
    return out


class _Builder:
    def __init__(self, artifact: CirArtifact):
        self.a = artifact
        self.n = concurrency_bound(artifact)
        self.places: List[Place] = []
        self.seen_places = set()
        self.transitions: List[Transition] = []
        self.wait_sites: Dict[str, List[str]] = {}

    def place(self, p: Place):
        if p.id not in self.seen_places:
            self.seen_places.add(p.id)
            self.places.append(p)

    def emit(self, fn, st, tag, inputs, outputs, guard=None, updates=(), anchor=None, suffix=None):
        tid = f"{fn.name}.{st.sid}.{suffix or tag}"
        self.transitions.append(Transition(
            tid,
            tuple(inputs),
            tuple(outputs),
            BTrue() if guard is None else guard,
            tuple(updates),
            st.sid if anchor is None else anchor,
            tag,
            st.sid,
        ))

    # -- phase 1 ----------------------------------------------------------

    def resources(self):
        tokens = initial_tokens(self.a)
        marking = {}
        for r in self.a.resources.values():
            if r.kind in SYNC_KINDS:
                self.place(Place(rp(r.name), RESOURCE, resource=r.name, kind=r.kind))
                marking[rp(r.name)] = tokens[r.name]
        valuation: Dict[str, Value] = {}
        for r in self.a.resources.values():
            if r.kind in DATA_KINDS:
                valuation[r.name] = r.init
            if r.kind == "Condvar":
                valuation[nw_var(r.name)] = integer(0)
        for fn in self.a.functions.values():
            for s in fn.body:
                if s.op.kind == "wait":
                    self.wait_sites.setdefault(s.op.target, []).append(s.sid)
                    valuation[na_var(s.sid)] = boolean(False)
        return marking, valuation

    # -- phase 2 ----------------------------------------------------------

    def function(self, fn: FunctionDef):
        modes = drop_modes(fn, self.a)
        for i, st in enumerate(fn.body):
            self.place(Place(cp(fn.name, st.sid), CONTROL, function=fn.name, sid=st.sid))
            transfer = effective_transfer(fn, i)
            if isinstance(transfer, Next):
                self.op(fn, st, cp(fn.name, transfer.sid), modes)
            elif st.op.kind == "cas" and isinstance(transfer, Branch):
                self.cas(fn, st, transfer)
            else:
                post = cp(fn.name, hidden(st.sid))
                self.place(Place(post, CONTROL, function=fn.name, sid=hidden(st.sid)))
                self.op(fn, st, post, modes)
                self.transfer(fn, st, transfer, post)
        self.place(Place(cp(fn.name, "ret"), CONTROL, function=fn.name, sid="ret"))

    def op(self, fn, st: Statement, succ: str, modes):
        a, here, op = self.a, cp(fn.name, st.sid), st.op
        k = op.kind
        rkind = a.resource_kind(op.target) if op.target else None
        if k in ("lock", "acquire", "read_lock", "write_lock"):
            tag = {"acquire": "Acquire", "read_lock": "ReadLock", "write_lock": "WriteLock"}.get(k, "Lock")
            weight = 1
            if rkind == "RwLock" and k in ("lock", "write_lock"):
                tag, weight = "WriteLock", self.n
            self.emit(fn, st, tag, [(here, 1), (rp(op.target), weight)], [(succ, 1)])
        elif k in ("drop", "release"):
            tag, weight = ("Release", 1) if k == "release" else ("Unlock", 1)
            if rkind == "RwLock":
                mode = modes.get(st.sid)
                assert mode is not None, f"RwLock drop at {st.sid} has no unique mode"
                tag, weight = ("ReadUnlock", 1) if mode == "r" else ("WriteUnlock", self.n)
            self.emit(fn, st, tag, [(here, 1)], [(succ, 1), (rp(op.target), weight)])
        elif k == "send":
            self.emit(fn, st, "Send", [(here, 1)], [(succ, 1), (rp(op.target), 1)])
        elif k == "recv":
            self.emit(fn, st, "Recv", [(here, 1), (rp(op.target), 1)], [(succ, 1)])
        elif k in ("write", "store"):
            tag = "VarWrite" if k == "write" else "AtomicStore"
            self.emit(fn, st, tag, [(here, 1)], [(succ, 1)], updates=[(op.target, op.args[1])])
        elif k == "cas":
            # cas without a branch is rejected by the checker; kept total for safety
            x = Ref(op.target)
            self.emit(fn, st, "CasSuccess", [(here, 1)], [(succ, 1)],
                      guard=Cmp(x, "==", op.args[1]), updates=[(op.target, op.args[2])])
            self.emit(fn, st, "CasFailure", [(here, 1)], [(succ, 1)], guard=Cmp(x, "!=", op.args[1]))
        elif k == "wait":
            self.wait(fn, st, succ)
        elif k in ("notify_one", "notify_all"):
            cv = op.target
            nw = Ref(nw_var(cv))
            if k == "notify_one":
                self.emit(fn, st, "NotifySuccess", [(here, 1)], [(succ, 1), (rp(cv), 1)],
                          guard=Cmp(nw, ">", Lit(integer(0))))
                self.emit(fn, st, "NotifyLost", [(here, 1)], [(succ, 1)],
                          guard=Cmp(nw, "==", Lit(integer(0))))
            else:
                ups = [(na_var(w), Lit(boolean(True))) for w in self.wait_sites.get(cv, [])]
                self.emit(fn, st, "NotifyAllSuccess", [(here, 1)], [(succ, 1)],
                          guard=Cmp(nw, ">", Lit(integer(0))), updates=ups)
                self.emit(fn, st, "NotifyAllLost", [(here, 1)], [(succ, 1)],
                          guard=Cmp(nw, "==", Lit(integer(0))))
        elif k == "spawn":
            child = a.functions[op.target]
            self.emit(fn, st, "Spawn", [(here, 1)], [(succ, 1), (cp(child.name, child.entry_sid), 1)])
        elif k == "join":
            self.emit(fn, st, "Join", [(here, 1), (cp(op.target, "ret"), 1)], [(succ, 1)])
        elif k == "call" and op.target not in a.functions and op.target in a.summaries:
            writes = a.summaries[op.target].writes
            self.emit(fn, st, "Summary", [(here, 1)], [(succ, 1)],
                      updates=[(x, Lit(TOP)) for x in writes], anchor=SID_BOTTOM)
        else:
            tag = {"read": "VarRead", "load": "AtomicLoad", "call": "Call", "spawn_async": "SpawnAsync",
                   "await": "Await"}.get(k, "Sequential")
            self.emit(fn, st, tag, [(here, 1)], [(succ, 1)])

    def wait(self, fn, st, succ):
        cv, m = st.op.args
        here, w, r = cp(fn.name, st.sid), wp(st.sid), ra(st.sid)
        self.place(Place(w, AUX, function=fn.name, sid=st.sid, aux="wait"))
        self.place(Place(r, AUX, function=fn.name, sid=st.sid, aux="reacquire"))
        nw, na = Ref(nw_var(cv)), na_var(st.sid)
        one = Lit(integer(1))
        self.emit(fn, st, "WaitEnter", [(here, 1)], [(w, 1), (rp(m), 1)],
                  updates=[(nw_var(cv), BinOp(nw, "+", one)), (na, Lit(boolean(False)))])
        self.emit(fn, st, "Wake1", [(w, 1), (rp(cv), 1)], [(r, 1)],
                  updates=[(nw_var(cv), BinOp(nw, "-", one))])
        self.emit(fn, st, "WakeA", [(w, 1)], [(r, 1)],
                  guard=Cmp(Ref(na), "==", Lit(boolean(True))),
                  updates=[(nw_var(cv), BinOp(nw, "-", one)), (na, Lit(boolean(False)))])
        self.emit(fn, st, "Reacquire", [(r, 1), (rp(m), 1)], [(succ, 1)])

    def cas(self, fn, st, branch: Branch):
        x, exp, new = st.op.args
        here = cp(fn.name, st.sid)
        self.emit(fn, st, "CasSuccess", [(here, 1)], [(cp(fn.name, branch.then), 1)],
                  guard=Cmp(Ref(x), "==", exp), updates=[(x, new)])
        self.emit(fn, st, "CasFailure", [(here, 1)], [(cp(fn.name, branch.orelse), 1)],
                  guard=Cmp(Ref(x), "!=", exp))

    def transfer(self, fn, st, t, post):
        if isinstance(t, Return):
            self.emit(fn, st, "Return", [(post, 1)], [(cp(fn.name, "ret"), 1)])
        elif isinstance(t, Branch):
            self.emit(fn, st, "BranchTrue", [(post, 1)], [(cp(fn.name, t.then), 1)], guard=t.cond)
            self.emit(fn, st, "BranchFalse", [(post, 1)], [(cp(fn.name, t.orelse), 1)], guard=Not(t.cond))
        elif isinstance(t, Switch):
            x = Ref(t.var)
            for i, (v, target) in enumerate(t.arms):
                self.emit(fn, st, "SwitchCase", [(post, 1)], [(cp(fn.name, target), 1)],
                          guard=Cmp(x, "==", Lit(v)), suffix=f"SwitchCase{i}")
            self.emit(fn, st, "SwitchDefault", [(post, 1)], [(cp(fn.name, t.default), 1)],
                      guard=conj(Cmp(x, "!=", Lit(v)) for v, _ in t.arms))

    def build(self) -> Cvn:
        marking, valuation = self.resources()
        for fn in self.a.functions.values():
            self.function(fn)
        entry = self.a.functions[self.a.entry]
        marking[cp(entry.name, entry.entry_sid)] = 1
        # every place mentioned by a transition exists (targets resolve after checking)
        return Cvn(tuple(self.places), tuple(self.transitions), tuple(sorted(valuation)),
                   marking, valuation)


def translate_net(artifact: CirArtifact) -> Cvn:
    return _Builder(artifact).build()


def map_goals(goals, net: Cvn, artifact: Optional[CirArtifact] = None) -> List[GoalQuery]:
    """One reachability query per goal, in CIR order."""
    out = []
    for g in goals:
        completion = []
        for f in g.completion:
            pid = cp(f, "ret")
            if pid not in net.place_by_id:
                raise UnknownGoalTarget(f"goal {g.id}: no function {f!r}")
            completion.append((pid, 1))
        availability = []
        for r in g.availability:
            pid = rp(r)
            if pid not in net.place_by_id:
                raise UnknownGoalTarget(f"goal {g.id}: no synchronisation resource {r!r}")
            availability.append((pid, net.initial_marking.get(pid, 0)))
        for var, _ in g.variables:
            if var not in net.initial_valuation:
                raise UnknownGoalTarget(f"goal {g.id}: no variable {var!r}")
        out.append(GoalQuery(g.id, g.description, tuple(completion), tuple(availability),
                             tuple(g.variables), tuple(g.completion), tuple(g.availability)))
    return out


def translate(artifact: CirArtifact) -> Tuple[Cvn, List[GoalQuery]]:
    """Translate a checker-accepted artifact; returns the net and its goal queries."""
    net = translate_net(artifact)
    return net, map_goals(artifact.goals, net)
