"""Concurrency verification nets: places, guarded transitions, states and firing.

A net is a weighted place/transition net whose transitions may also carry a
three-valued guard over a finite variable store and a set of simultaneous
updates.  A guard that evaluates to ``unknown`` does not disable its
transition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, Mapping, Optional, Tuple

from .cir import SID_BOTTOM
from .expr import (
    BTrue,
    Concrete,
    Truth3,
    Value,
    eval_expr,
    eval_guard,
    expr_to_json,
    format_expr,
    format_value,
    value_to_json,
)

CONTROL, RESOURCE, AUX = "control", "resource", "aux"


class NotEnabled(ValueError):
    pass


@dataclass(frozen=True)
class Place:
    id: str
    cls: str
    function: Optional[str] = None  # control places
    sid: Optional[str] = None  # control: sid, "ret" or "<sid>'" ; aux: the wait sid
    resource: Optional[str] = None  # resource places
    aux: Optional[str] = None  # "wait" or "reacquire"
    kind: Optional[str] = None  # resource kind of a resource place


def cp(function: str, sid: str) -> str:
    return f"cp({function},{sid})"


def rp(resource: str) -> str:
    return f"rp({resource})"


def wp(sid: str) -> str:
    return f"wp({sid})"


def ra(sid: str) -> str:
    return f"ra({sid})"


@dataclass(frozen=True)
class Transition:
    id: str
    inputs: Tuple[Tuple[str, int], ...]
    outputs: Tuple[Tuple[str, int], ...]
    guard: object = BTrue()
    updates: Tuple[Tuple[str, object], ...] = ()
    anchor: str = SID_BOTTOM
    tag: str = "Sequential"
    # statement that generated the transition; differs from anchor only for summaries
    origin: Optional[str] = None

    def input_weight(self, place: str) -> int:
        return dict(self.inputs).get(place, 0)

    def output_weight(self, place: str) -> int:
        return dict(self.outputs).get(place, 0)


@dataclass(frozen=True)
class CvnState:
    """Marking and valuation as tuples in the net's canonical place/variable order."""

    marking: Tuple[int, ...]
    valuation: Tuple[Value, ...]


class _View(Mapping):
    __slots__ = ("index", "values")

    def __init__(self, index, values):
        self.index = index
        self.values = values

    def __getitem__(self, key):
        return self.values[self.index[key]]

    def __iter__(self):
        return iter(self.index)

    def __len__(self):
        return len(self.index)


@dataclass
class Cvn:
    places: Tuple[Place, ...]
    transitions: Tuple[Transition, ...]
    variables: Tuple[str, ...]
    initial_marking: Dict[str, int]
    initial_valuation: Dict[str, Value]
    _pidx: Dict[str, int] = field(init=False, repr=False)
    _vidx: Dict[str, int] = field(init=False, repr=False)
    _compiled: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._pidx = {p.id: i for i, p in enumerate(self.places)}
        self._vidx = {v: i for i, v in enumerate(self.variables)}
        self._compiled = {}
        for t in self.transitions:
            ins = tuple((self._pidx[p], w) for p, w in t.inputs)
            outs = tuple((self._pidx[p], w) for p, w in t.outputs)
            ups = tuple((self._vidx[x], e) for x, e in t.updates)
            trivial = isinstance(t.guard, BTrue)
            self._compiled[t.id] = (ins, outs, ups, trivial)
        self.by_id = {t.id: t for t in self.transitions}
        self.place_by_id = {p.id: p for p in self.places}

    # -- lookups ----------------------------------------------------------

    def place_index(self, pid: str) -> int:
        return self._pidx[pid]

    def var_index(self, name: str) -> int:
        return self._vidx[name]

    def places_of(self, cls: str):
        return [p for p in self.places if p.cls == cls]

    def initial_state(self) -> CvnState:
        marking = tuple(self.initial_marking.get(p.id, 0) for p in self.places)
        valuation = tuple(self.initial_valuation[v] for v in self.variables)
        return CvnState(marking, valuation)

    def marking(self, s: CvnState) -> Dict[str, int]:
        """Non-zero part of the marking, keyed by place id."""
        return {p.id: n for p, n in zip(self.places, s.marking) if n}

    def tokens(self, s: CvnState, pid: str) -> int:
        return s.marking[self._pidx[pid]]

    def valuation(self, s: CvnState) -> Dict[str, Value]:
        return dict(zip(self.variables, s.valuation))

    def value(self, s: CvnState, var: str) -> Value:
        return s.valuation[self._vidx[var]]

    # -- semantics --------------------------------------------------------

    def guard_value(self, t: Transition, s: CvnState) -> Truth3:
        return eval_guard(t.guard, _View(self._vidx, s.valuation))

    def token_enabled(self, t: Transition, s: CvnState) -> bool:
        m = s.marking
        return all(m[i] >= w for i, w in self._compiled[t.id][0])

    def enabled(self, t: Transition, s: CvnState) -> bool:
        ins, _, _, trivial = self._compiled[t.id]
        m = s.marking
        for i, w in ins:
            if m[i] < w:
                return False
        if trivial:
            return True
        return self.guard_value(t, s) is not Truth3.FALSE

    def fire(self, t: Transition, s: CvnState) -> CvnState:
        if not self.enabled(t, s):
            raise NotEnabled(t.id)
        ins, outs, ups, _ = self._compiled[t.id]
        m = list(s.marking)
        for i, w in ins:
            m[i] -= w
        for i, w in outs:
            m[i] += w
        assert min(m) >= 0, f"negative marking after {t.id}"
        val = s.valuation
        if ups:
            view = _View(self._vidx, s.valuation)
            new = list(val)
            for i, e in ups:
                new[i] = eval_expr(e, view)
            for i, _ in ups:
                name = self.variables[i]
                v = new[i]
                if name.startswith("nw_") and isinstance(v, Concrete):
                    assert v.value >= 0, f"waiter counter {name} would become negative at {t.id}"
            val = tuple(new)
        return CvnState(tuple(m), val)

    def enabled_transitions(self, s: CvnState) -> Iterator[Transition]:
        for t in self.transitions:
            if self.enabled(t, s):
                yield t

    # -- export -----------------------------------------------------------

    def to_json(self) -> dict:
        places = []
        for p in self.places:
            d = {"id": p.id, "class": p.cls, "initial": self.initial_marking.get(p.id, 0)}
            for k in ("function", "sid", "resource", "aux", "kind"):
                if getattr(p, k) is not None:
                    d[k] = getattr(p, k)
            places.append(d)
        transitions = []
        for t in self.transitions:
            transitions.append({
                "id": t.id,
                "tag": t.tag,
                "anchor": t.anchor,
                "origin": t.origin,
                "inputs": dict(t.inputs),
                "outputs": dict(t.outputs),
                "guard": expr_to_json(t.guard),
                "updates": {x: expr_to_json(e) for x, e in t.updates},
            })
        return {
            "places": places,
            "transitions": transitions,
            "variables": {v: value_to_json(self.initial_valuation[v]) for v in self.variables},
        }

    def to_dot(self) -> str:
        def q(s):
            return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

        lines = ["digraph cvn {", "  rankdir=LR;", '  node [fontname="monospace"];']
        for p in self.places:
            init = self.initial_marking.get(p.id, 0)
            parts = [p.id, p.cls] + ([f"{init} token" + ("s" if init != 1 else "")] if init else [])
            label = "\\n".join(q(x)[1:-1] for x in parts)
            lines.append(f"  {q(p.id)} [shape=circle, label=\"{label}\"];")
        for t in self.transitions:
            parts = [t.tag]
            if not isinstance(t.guard, BTrue):
                parts.append(f"[{format_expr(t.guard)}]")
            for x, e in t.updates:
                parts.append(f"{x} := {format_expr(e)}")
            parts.append(f"@{t.anchor}")
            label = "\\n".join(q(x)[1:-1] for x in parts)
            lines.append(f"  {q('t:' + t.id)} [shape=box, label=\"{label}\"];")
        for t in self.transitions:
            for p, w in t.inputs:
                lines.append(f"  {q(p)} -> {q('t:' + t.id)}" + (f" [label={w}]" if w != 1 else "") + ";")
            for p, w in t.outputs:
                lines.append(f"  {q('t:' + t.id)} -> {q(p)}" + (f" [label={w}]" if w != 1 else "") + ";")
        lines.append("}")
        return "\n".join(lines) + "\n"


def enabled(net: Cvn, t: Transition, s: CvnState) -> bool:
    return net.enabled(t, s)


def fire(net: Cvn, t: Transition, s: CvnState) -> CvnState:
    return net.fire(t, s)


def describe_state(net: Cvn, s: CvnState) -> dict:
    return {
        "marking": net.marking(s),
        "valuation": {v: format_value(x) for v, x in net.valuation(s).items()},
    }
