"""Explicit-state exploration of a net and the bug predicates evaluated on it.

Definite bugs (deadlock, signal loss, channel block) carry a shortest
firing sequence from the initial state.  Livelock and starvation come from
strongly connected components of the state graph and are only warnings.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .cvn import AUX, CONTROL, RESOURCE, Cvn, CvnState, wp
from .expr import format_value
from .translate import GoalQuery

DEFAULT_STATE_BUDGET = 1_000_000

DEFINITE = ("deadlock", "signal_loss", "channel_block")
WARNINGS = ("livelock_warning", "starvation_warning")
LOST_TAGS = ("NotifyLost", "NotifyAllLost")
WAKE_TAGS = ("Wake1", "WakeA")
SCC_SUMMARY_CAP = 50


class StateBudgetExceeded(RuntimeError):
    def __init__(self, budget: int):
        super().__init__(f"state budget of {budget} states exceeded")
        self.budget = budget


Edge = Tuple[int, str, int]


@dataclass
class StateSpace:
    net: Cvn
    states: List[CvnState]
    edges: List[Edge]
    succ: List[List[Tuple[str, int]]]
    parent: List[Optional[Tuple[int, str]]]
    initial: int = 0

    def __len__(self) -> int:
        return len(self.states)

    def path_to(self, idx: int) -> List[Edge]:
        """Edges of the BFS-tree path from the initial state; minimum length."""
        out = []
        while self.parent[idx] is not None:
            src, tid = self.parent[idx]
            out.append((src, tid, idx))
            idx = src
        return out[::-1]

    def shortest_path(self, src: int, targets) -> Optional[List[Edge]]:
        """Shortest edge path from ``src`` to any state in ``targets``."""
        targets = set(targets)
        if src in targets:
            return []
        prev = {src: None}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for tid, dst in self.succ[cur]:
                if dst in prev:
                    continue
                prev[dst] = (cur, tid)
                if dst in targets:
                    path = []
                    node = dst
                    while prev[node] is not None:
                        p, t = prev[node]
                        path.append((p, t, node))
                        node = p
                    return path[::-1]
                queue.append(dst)
        return None

    def backward_closure(self, seeds) -> set:
        preds: List[List[int]] = [[] for _ in self.states]
        for s, _, d in self.edges:
            preds[d].append(s)
        seen = set(seeds)
        stack = list(seen)
        while stack:
            for p in preds[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def forward_closure(self, seeds) -> set:
        seen = set(seeds)
        stack = list(seen)
        while stack:
            for _, d in self.succ[stack.pop()]:
                if d not in seen:
                    seen.add(d)
                    stack.append(d)
        return seen

    def to_json(self) -> dict:
        net = self.net
        return {
            "states": [
                {"marking": net.marking(s), "valuation": {k: _jv(v) for k, v in net.valuation(s).items()}}
                for s in self.states
            ],
            "edges": [[s, t, d] for s, t, d in self.edges],
            "initial": self.initial,
        }


def _jv(v):
    return format_value(v)


def explore(net: Cvn, budget: int = DEFAULT_STATE_BUDGET) -> StateSpace:
    """Breadth-first closure from the initial state, transitions tried in id order."""
    order = sorted(net.transitions, key=lambda t: t.id)
    s0 = net.initial_state()
    states = [s0]
    index = {s0: 0}
    parent: List[Optional[Tuple[int, str]]] = [None]
    succ: List[List[Tuple[str, int]]] = []
    edges: List[Edge] = []
    i = 0
    while i < len(states):
        s = states[i]
        out = []
        for t in order:
            if not net.enabled(t, s):
                continue
            nxt = net.fire(t, s)
            j = index.get(nxt)
            if j is None:
                if len(states) >= budget:
                    raise StateBudgetExceeded(budget)
                j = len(states)
                index[nxt] = j
                states.append(nxt)
                parent.append((i, t.id))
            out.append((t.id, j))
            edges.append((i, t.id, j))
        succ.append(out)
        i += 1
    return StateSpace(net, states, edges, succ, parent)


# ---------------------------------------------------------------------------
# thread bookkeeping
# ---------------------------------------------------------------------------


def thread_places(net: Cvn) -> Dict[str, List[int]]:
    """Control and aux place indices per function."""
    out: Dict[str, List[int]] = {}
    for i, p in enumerate(net.places):
        if p.cls in (CONTROL, AUX):
            out.setdefault(p.function, []).append(i)
    return out


def active_tokens(net: Cvn, s: CvnState) -> List[int]:
    """Indices of marked control/aux places other than return places."""
    return [
        i for i, p in enumerate(net.places)
        if s.marking[i] and (p.cls == AUX or (p.cls == CONTROL and p.sid != "ret"))
    ]


def all_returned(net: Cvn, s: CvnState) -> bool:
    return not active_tokens(net, s)


def dead_states(space: StateSpace) -> List[int]:
    """States without successors that still hold a non-return thread token."""
    net = space.net
    return [i for i, s in enumerate(space.states) if not space.succ[i] and active_tokens(net, s)]


# ---------------------------------------------------------------------------
# findings
# ---------------------------------------------------------------------------


@dataclass
class BugFinding:
    kind: str
    witness: Tuple[Edge, ...]
    state: int  # bug state, or the SCC entry state for warnings
    scc: Optional[Tuple[int, ...]] = None
    scc_transitions: Tuple[str, ...] = ()
    thread: Optional[str] = None  # starvation: the frozen thread
    lost_at: Optional[int] = None  # signal loss: witness position of the lost notification
    condvar: Optional[str] = None

    @property
    def definite(self) -> bool:
        return self.kind in DEFINITE

    @property
    def transitions(self) -> Tuple[str, ...]:
        return tuple(t for _, t, _ in self.witness)


@dataclass
class Analysis:
    space: StateSpace
    findings: List[BugFinding]
    notes: List[str] = field(default_factory=list)
    livelock_immune: bool = True

    @property
    def definite(self) -> List[BugFinding]:
        return [f for f in self.findings if f.definite]

    @property
    def warnings(self) -> List[BugFinding]:
        return [f for f in self.findings if not f.definite]


def _wait_sites(net: Cvn) -> Dict[str, List[str]]:
    """condvar -> wait sids, read off the WaitEnter/Wake1 arcs."""
    out: Dict[str, List[str]] = {}
    for t in net.transitions:
        if t.tag == "Wake1":
            cv = next(net.place_by_id[p].resource for p, _ in t.inputs
                      if net.place_by_id[p].cls == RESOURCE)
            out.setdefault(cv, []).append(t.anchor)
    return out


def _notify_condvar(net: Cvn, t) -> str:
    # guard is nw_<cv> == 0
    return t.guard.left.name[len("nw_"):]


def detect_signal_loss(space: StateSpace) -> Tuple[List[BugFinding], List[str], Dict[str, set]]:
    """Lost notifications that can leave a waiter stranded.

    A lost notification only counts when, after it, a waiter of the same
    condvar can end up in a state from which no wake-up of its wait site is
    reachable.  Returns the findings, notes for downgraded edges, and for
    each condvar the states covered by a reported loss.
    """
    net = space.net
    sites = _wait_sites(net)
    lost = [(s, t, d) for s, t, d in space.edges if net.by_id[t].tag in LOST_TAGS]
    findings, notes, covered = [], [], {}
    if not lost:
        return findings, notes, covered
    stranded_by_cv: Dict[str, set] = {}
    for cv, ws in sites.items():
        stranded = set()
        for w in ws:
            wake_src = {s for s, t, _ in space.edges
                        if net.by_id[t].tag in WAKE_TAGS and net.by_id[t].anchor == w}
            can_wake = space.backward_closure(wake_src)
            wi = net.place_index(wp(w))
            stranded |= {i for i, st in enumerate(space.states) if st.marking[wi] and i not in can_wake}
        stranded_by_cv[cv] = stranded
    reach_stranded = {cv: space.backward_closure(st) for cv, st in stranded_by_cv.items()}
    for s, tid, d in lost:
        cv = _notify_condvar(net, net.by_id[tid])
        if d not in reach_stranded.get(cv, ()):
            notes.append(f"{tid} fires from state {s} but every waiter of {cv} is still woken later")
            continue
        prefix = space.path_to(s)
        tail = space.shortest_path(d, stranded_by_cv[cv])
        witness = tuple(prefix) + ((s, tid, d),) + tuple(tail)
        findings.append(BugFinding("signal_loss", witness, witness[-1][2], lost_at=len(prefix), condvar=cv))
        covered.setdefault(cv, set()).add(d)
    covered = {cv: space.forward_closure(ds) for cv, ds in covered.items()}
    return findings, notes, covered


def detect_deadlock(space: StateSpace, covered: Optional[Dict[str, set]] = None) -> List[BugFinding]:
    """Dead states with a live thread token; waits already explained by a signal loss are skipped."""
    net = space.net
    sites = _wait_sites(net)
    covered = covered or {}
    out = []
    for i in dead_states(space):
        s = space.states[i]
        explained = any(
            i in covered.get(cv, ()) and any(s.marking[net.place_index(wp(w))] for w in ws)
            for cv, ws in sites.items()
        )
        if explained:
            continue
        out.append(BugFinding("deadlock", tuple(space.path_to(i)), i))
    return out


def detect_channel_block(deadlocks: Sequence[BugFinding], space: StateSpace) -> List[BugFinding]:
    """Refine deadlocks in which a positioned thread waits for a channel token."""
    net = space.net
    out = []
    for f in deadlocks:
        s = space.states[f.state]
        refined = False
        for t in net.transitions:
            thread_ready = all(
                s.marking[net.place_index(p)] >= w for p, w in t.inputs
                if net.place_by_id[p].cls != RESOURCE
            )
            if not thread_ready:
                continue
            for p, w in t.inputs:
                pl = net.place_by_id[p]
                if pl.kind == "Channel" and s.marking[net.place_index(p)] < w:
                    refined = True
        out.append(BugFinding("channel_block", f.witness, f.state) if refined else f)
    return out


def tarjan_scc(n: int, succ: Sequence[Sequence[int]]) -> List[List[int]]:
    """Iterative Tarjan; components are returned in reverse topological order."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: List[int] = []
    comps: List[List[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < len(succ[v]):
                work[-1] = (v, pos + 1)
                w = succ[v][pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    comps.append(sorted(comp))
    return comps


def cyclic_components(space: StateSpace) -> List[List[int]]:
    succ = [[d for _, d in out] for out in space.succ]
    comps = tarjan_scc(len(space.states), succ)
    return [c for c in comps if len(c) > 1 or c[0] in succ[c[0]]]


def detect_scc_warnings(space: StateSpace, synthetic=()) -> Tuple[List[BugFinding], bool]:
    """Livelock and starvation warnings; the flag is True when no state cycle lacks a way out.

    A cyclic component qualifies when none of its states has every thread
    returned.  Warnings are raised for qualifying components that cannot be
    left, i.e. where execution can be trapped forever.
    """
    net = space.net
    qualifying = []
    for comp in cyclic_components(space):
        if any(all_returned(net, space.states[i]) for i in comp):
            continue
        qualifying.append(comp)
    immune = not qualifying
    findings = []
    per_thread = thread_places(net)
    for comp in qualifying:
        members = set(comp)
        if any(d not in members for i in comp for _, d in space.succ[i]):
            continue
        entry_path = space.shortest_path(space.initial, members)
        entry = entry_path[-1][2] if entry_path else space.initial
        tids = sorted({t for i in comp for t, d in space.succ[i] if d in members})
        findings.append(BugFinding("livelock_warning", tuple(entry_path), entry,
                                   tuple(comp[:SCC_SUMMARY_CAP]), tuple(tids[:SCC_SUMMARY_CAP])))
        for fn, idxs in per_thread.items():
            if fn in synthetic:
                continue
            snapshots = {tuple(space.states[i].marking[j] for j in idxs) for i in comp}
            if len(snapshots) != 1:
                continue
            snap = snapshots.pop()
            marked = [net.places[j] for j, k in zip(idxs, snap) if k]
            if not marked or all(p.cls == CONTROL and p.sid == "ret" for p in marked):
                continue
            findings.append(BugFinding("starvation_warning", tuple(entry_path), entry,
                                       tuple(comp[:SCC_SUMMARY_CAP]), tuple(tids[:SCC_SUMMARY_CAP]),
                                       thread=fn))
    return findings, immune


@dataclass(frozen=True)
class GoalResult:
    goal_id: str
    reachable: bool
    witness_state: Optional[int] = None


def check_goals(space: StateSpace, queries: Sequence[GoalQuery]) -> List[GoalResult]:
    """Existential reachability: the first stored state (BFS order) satisfying each query."""
    out = []
    for q in queries:
        hit = next((i for i, s in enumerate(space.states) if q.satisfied(space.net, s)), None)
        out.append(GoalResult(q.goal_id, hit is not None, hit))
    return out


def analyze_space(space: StateSpace, synthetic=()) -> Analysis:
    sl, notes, covered = detect_signal_loss(space)
    dl = detect_channel_block(detect_deadlock(space, covered), space)
    warnings, immune = detect_scc_warnings(space, synthetic)
    return Analysis(space, dl + sl + warnings, notes, immune)


def analyze(net: Cvn, budget: int = DEFAULT_STATE_BUDGET, synthetic=()) -> Analysis:
    return analyze_space(explore(net, budget), synthetic)
