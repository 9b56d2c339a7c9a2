from __future__ import annotations

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXED, PATTERNS, REGRESSIONS, fixture_text
from cvnverify.analysis import (
    StateBudgetExceeded,
    analyze_space,
    check_goals,
    cyclic_components,
    dead_states,
    detect_channel_block,
    detect_deadlock,
    detect_signal_loss,
    explore,
    tarjan_scc,
)
from cvnverify.cirtext import parse_cir
from cvnverify.translate import translate


def space_of(text):
    a = parse_cir(text)
    net, queries = translate(a)
    synthetic = tuple(f.name for f in a.functions.values() if f.synthetic)
    return a, net, queries, explore(net), synthetic


def analysis_of(name):
    a, net, queries, space, synthetic = space_of(fixture_text(name))
    return analyze_space(space, synthetic), space, queries


def kinds(name):
    an, _, _ = analysis_of(name)
    return sorted({f.kind for f in an.findings})


def test_explore_is_closed_under_firing():
    _, net, _, space, _ = space_of(fixture_text(PATTERNS[4]))
    index = {s: i for i, s in enumerate(space.states)}
    for i, s in enumerate(space.states):
        targets = {(t.id, index[net.fire(t, s)]) for t in net.enabled_transitions(s)}
        assert targets == set(space.succ[i])


def test_linear_chain_has_three_states():
    text = "resources:\nfunctions:\n  f:\n    body:\n    - { sid: s1, op: nop(), next: return }\nentry: f\n"
    _, _, _, space, _ = space_of(text)
    assert len(space.states) == 3
    assert dead_states(space) == []


FROZEN_STATES = {1: 45, 2: 35, 3: 35, 4: 330, 5: 189, 6: 31, 7: 42, 8: 37, 9: 62}


@pytest.mark.parametrize("k", sorted(FROZEN_STATES))
def test_frozen_state_counts(k):
    # frozen from the translator and cross-checked against the direct interpreter in test_oracle
    _, space, _ = analysis_of(PATTERNS[k])
    assert len(space.states) == FROZEN_STATES[k]


def test_exploration_is_deterministic():
    a = space_of(fixture_text(PATTERNS[5]))[3]
    b = space_of(fixture_text(PATTERNS[5]))[3]
    assert a.states == b.states and a.edges == b.edges


# -- definite bugs ------------------------------------------------------------

def test_pattern1_deadlock():
    an, space, _ = analysis_of(PATTERNS[1])
    assert [f.kind for f in an.definite] == ["deadlock"]
    f = an.definite[0]
    assert len(f.witness) == len(space.path_to(f.state))
    assert f.witness[-1][2] == f.state
    assert not space.succ[f.state]


def test_pattern2_signal_loss_visits_n2_lost():
    an, _, _ = analysis_of(PATTERNS[2])
    assert [f.kind for f in an.definite] == ["signal_loss"]
    f = an.definite[0]
    assert f.transitions[f.lost_at] == "notifier.n2.NotifyLost"
    assert f.condvar == "cv0"


def test_pattern3_channel_block():
    assert [f.kind for f in analysis_of(PATTERNS[3])[0].definite] == ["channel_block"]


def test_pattern4_and_6_deadlock():
    assert kinds(PATTERNS[4]) == ["deadlock"]
    assert kinds(PATTERNS[6]) == ["deadlock"]


def test_pattern5_single_livelock_warning():
    an, space, queries = analysis_of(PATTERNS[5])
    assert an.definite == []
    assert [f.kind for f in an.findings].count("livelock_warning") == 1
    assert not an.livelock_immune
    assert all(r.reachable for r in check_goals(space, queries))


@pytest.mark.parametrize("k", [7, 8, 9])
def test_baselines_are_clean_and_immune(k):
    an, _, _ = analysis_of(PATTERNS[k])
    assert an.findings == []
    assert an.livelock_immune


@pytest.mark.parametrize("name", list(FIXED.values()))
def test_fixed_versions_have_no_definite_bug(name):
    an, space, queries = analysis_of(name)
    assert an.definite == []
    assert all(r.reachable for r in check_goals(space, queries))


def test_terminated_state_is_not_a_deadlock():
    _, _, _, space, _ = space_of(fixture_text(PATTERNS[7]))
    assert dead_states(space) == []


def test_fixed_pattern2_lost_notifications_are_downgraded():
    _, net, _, space, _ = space_of(fixture_text(FIXED[2]))
    lost = [e for e in space.edges if net.by_id[e[1]].tag == "NotifyLost"]
    findings, notes, _ = detect_signal_loss(space)
    assert lost, "the notify can run before any waiter exists"
    assert findings == []
    assert len(notes) == len(lost)


def test_no_condvars_no_signal_loss():
    _, _, _, space, _ = space_of(fixture_text(PATTERNS[1]))
    assert detect_signal_loss(space) == ([], [], {})


def test_mutex_only_deadlock_is_not_refined():
    _, _, _, space, _ = space_of(fixture_text(PATTERNS[1]))
    dl = detect_deadlock(space)
    assert [f.kind for f in detect_channel_block(dl, space)] == ["deadlock"]


def test_recv_on_empty_channel_while_locked():
    text = """\
resources:
  m0: { kind: Mutex }
  ch: { kind: Channel }
threads:
  r:
    body:
    - { sid: r1, op: lock(m0), next: r2 }
    - { sid: r2, op: recv(ch), next: r3 }
    - { sid: r3, op: unlock(m0) }
"""
    _, _, _, space, _ = space_of(text)
    assert [f.kind for f in detect_channel_block(detect_deadlock(space), space)] == ["channel_block"]


def test_notify_deleted_fixed_pattern2():
    """Without the notify the worker can still finish (when it reads ready late) or hang forever."""
    text = fixture_text(FIXED[2]).replace("next: n3 }", "next: n4 }").replace(
        "    - { sid: n3, op: notify_one(cv0),     next: n4 }\n", "")
    a, net, queries, space, synthetic = space_of(text)
    an = analyze_space(space, synthetic)
    assert [f.kind for f in an.definite] == ["deadlock"]
    assert {r.goal_id: r.reachable for r in check_goals(space, queries)} == {"G1": True, "G2": True}


# -- SCCs -------------------------------------------------------------------

CAS_SPIN = """\
resources:
  owner: { kind: Atomic, type: Int, init: 0 }
threads:
  a:
    body:
    - { sid: a1, op: cas(owner, 0, 1), branch: [owner == 0, a2, a1] }
    - { sid: a2, op: store(owner, 0) }
  b:
    body:
    - { sid: b1, op: cas(owner, 0, 1), branch: [owner == 0, b2, b1] }
    - { sid: b2, op: store(owner, 0) }
"""


def test_cas_spin_loop_has_no_warning_when_escapable():
    a, net, _, space, synthetic = space_of(CAS_SPIN)
    an = analyze_space(space, synthetic)
    cycles = cyclic_components(space)
    assert cycles, "a failed cas retries from the same state"
    for comp in cycles:
        members = set(comp)
        assert any(d not in members for i in comp for _, d in space.succ[i])
    assert an.findings == []
    assert not an.livelock_immune


def _nx_sccs(space):
    g = nx.DiGraph()
    g.add_nodes_from(range(len(space.states)))
    g.add_edges_from((s, d) for s, _, d in space.edges)
    return sorted(sorted(c) for c in nx.strongly_connected_components(g))


@pytest.mark.parametrize("name", list(PATTERNS.values()) + list(REGRESSIONS))
def test_tarjan_matches_networkx(name):
    _, _, _, space, _ = space_of(fixture_text(name))
    succ = [[d for _, d in out] for out in space.succ]
    assert sorted(tarjan_scc(len(space.states), succ)) == _nx_sccs(space)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 25).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=60))))
def test_tarjan_on_random_graphs(graph):
    n, edges = graph
    succ = [[] for _ in range(n)]
    for s, d in edges:
        succ[s].append(d)
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    assert sorted(tarjan_scc(n, succ)) == sorted(sorted(c) for c in nx.strongly_connected_components(g))


def test_warning_witness_reaches_the_scc():
    an, space, _ = analysis_of(PATTERNS[5])
    (w,) = [f for f in an.findings if f.kind == "livelock_warning"]
    assert w.state in w.scc
    if w.witness:
        assert w.witness[-1][2] == w.state
    assert all(t in {t for _, t, _ in space.edges} for t in w.scc_transitions)


def test_starvation_names_frozen_threads():
    an, _, _ = analysis_of(PATTERNS[5])
    assert sorted(f.thread for f in an.findings if f.kind == "starvation_warning") == ["A", "B"]


# -- goals and budget ------------------------------------------------------

def test_goal_witness_state_satisfies():
    _, net, queries, space, _ = space_of(fixture_text(FIXED[2]))
    for q, r in zip(queries, check_goals(space, queries)):
        assert r.reachable and q.satisfied(net, space.states[r.witness_state])


def test_state_budget():
    _, net, _, _, _ = space_of(fixture_text(PATTERNS[4]))
    with pytest.raises(StateBudgetExceeded):
        explore(net, budget=50)
    assert len(explore(net, budget=330).states) == 330


@pytest.mark.parametrize("name", [PATTERNS[5], FIXED[2], REGRESSIONS[0]])
def test_goal_monotonicity_under_budget(name):
    _, net, queries, full, _ = space_of(fixture_text(name))
    reachable = {r.goal_id for r in check_goals(full, queries) if r.reachable}
    prev = set()
    for budget in (5, 20, 80, len(full.states)):
        try:
            space = explore(net, budget)
        except StateBudgetExceeded:
            continue
        now = {r.goal_id for r in check_goals(space, queries) if r.reachable}
        assert prev <= now <= reachable
        prev = now
    assert prev == reachable
