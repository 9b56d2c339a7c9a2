from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from conftest import PATTERNS, fixture_text
from cvnverify.analysis import explore
from cvnverify.cirtext import parse_cir
from cvnverify.cvn import AUX, CONTROL, RESOURCE, NotEnabled
from cvnverify.expr import TOP, Concrete
from cvnverify.translate import translate

RUNNING = parse_cir(fixture_text("pattern2_signal_loss.cir"))


def net_of(text_or_artifact):
    a = parse_cir(text_or_artifact) if isinstance(text_or_artifact, str) else text_or_artifact
    return translate(a)[0]


def run_to(net, *tids):
    s = net.initial_state()
    for tid in tids:
        s = net.fire(net.by_id[tid], s)
    return s


def test_places_partition():
    net = net_of(RUNNING)
    classes = [p.cls for p in net.places]
    assert set(classes) <= {CONTROL, RESOURCE, AUX}
    assert len({p.id for p in net.places}) == len(net.places)


def test_lock_enabled_with_token_and_disabled_without():
    net = net_of(RUNNING)
    s = run_to(net, "main._spawn_worker.Spawn", "main._spawn_notifier.Spawn")
    lock_w = net.by_id["worker.w1.Lock"]
    lock_n = net.by_id["notifier.n1.Lock"]
    assert net.enabled(lock_w, s)
    s2 = net.fire(lock_n, s)
    assert net.tokens(s2, "rp(m0)") == 0
    assert not net.enabled(lock_w, s2)
    with pytest.raises(NotEnabled):
        net.fire(lock_w, s2)


def test_wait_enter_moves_token_and_counts_waiter():
    net = net_of(RUNNING)
    s = run_to(net, "main._spawn_worker.Spawn", "main._spawn_notifier.Spawn", "worker.w1.Lock")
    assert net.tokens(s, "rp(m0)") == 0
    s2 = net.fire(net.by_id["worker.w2.WaitEnter"], s)
    assert net.tokens(s2, "wp(w2)") == 1
    assert net.tokens(s2, "cp(worker,w2)") == 0
    assert net.tokens(s2, "rp(m0)") == 1
    assert net.value(s2, "nw_cv0") == Concrete("Int", 1)
    # the input state is untouched
    assert net.tokens(s, "cp(worker,w2)") == 1


def test_sequential_only_moves_control():
    text = "resources:\n  x: { kind: Var, type: Int, init: 3 }\nfunctions:\n  f:\n    body:\n" \
           "    - { sid: s1, op: read(x), next: s2 }\n    - { sid: s2, op: nop() }\nentry: f\n"
    net = net_of(text)
    s = net.initial_state()
    s2 = net.fire(net.by_id["f.s1.VarRead"], s)
    assert s2.valuation == s.valuation
    assert net.marking(s2) == {"cp(f,s2)": 1}


def test_unknown_guard_enables_both_branches():
    text = """\
resources:
  m0: { kind: Mutex }
  x:  { kind: Var, type: Int, init: 0 }
functions:
  f:
    body:
    - { sid: s1, op: call(ext), next: s2 }
    - { sid: s2, op: read(x), branch: [x == 1, s3, s3] }
    - { sid: s3, op: nop() }
summaries:
  ext: { reads: [], writes: [x], calls: [], has_concurrency: false }
entry: f
"""
    net = net_of(text)
    s = run_to(net, "f.s1.Summary", "f.s2.VarRead")
    assert net.value(s, "x") is TOP
    assert net.enabled(net.by_id["f.s2.BranchTrue"], s)
    assert net.enabled(net.by_id["f.s2.BranchFalse"], s)


def test_literal_write_overwrites_top():
    text = """\
resources:
  x: { kind: Var, type: Int, init: 0 }
functions:
  f:
    body:
    - { sid: s1, op: call(ext), next: s2 }
    - { sid: s2, op: write(x, 7) }
summaries:
  ext: { reads: [], writes: [x], calls: [], has_concurrency: false }
entry: f
"""
    net = net_of(text)
    s = run_to(net, "f.s1.Summary")
    assert net.value(s, "x") is TOP
    s = net.fire(net.by_id["f.s2.VarWrite"], s)
    assert net.value(s, "x") == Concrete("Int", 7)


def test_states_hash_structurally():
    net = net_of(RUNNING)
    assert net.initial_state() == net.initial_state()
    assert hash(net.initial_state()) == hash(net.initial_state())


@pytest.mark.parametrize("name", list(PATTERNS.values()))
def test_token_conservation_and_mutex_safety(name):
    a = parse_cir(fixture_text(name))
    net = net_of(a)
    mutexes = [f"rp({n})" for n, r in a.resources.items() if r.kind == "Mutex"]
    space = explore(net)
    for src, tid, dst in space.edges:
        t = net.by_id[tid]
        before, after = space.states[src], space.states[dst]
        assert sum(after.marking) - sum(before.marking) == \
            sum(w for _, w in t.outputs) - sum(w for _, w in t.inputs)
        assert min(after.marking) >= 0
    for s in space.states:
        for m in mutexes:
            assert net.tokens(s, m) in (0, 1)


def test_one_token_per_live_thread():
    a = parse_cir(fixture_text("pattern1_two_mutex_deadlock.cir"))
    net = net_of(a)
    space = explore(net)
    for s in space.states:
        m = net.marking(s)
        for fn in a.functions:
            if fn == a.entry:
                continue
            live = sum(k for p, k in m.items()
                       if p.startswith(f"cp({fn},") and p != f"cp({fn},ret)")
            assert live <= 1


def test_dot_export_is_stable():
    assert net_of(RUNNING).to_dot() == net_of(parse_cir(fixture_text("pattern2_signal_loss.cir"))).to_dot()


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(list(PATTERNS.values())), st.randoms(use_true_random=False))
def test_random_walk_firing_matches_arc_weights(name, rnd):
    net = net_of(parse_cir(fixture_text(name)))
    s = net.initial_state()
    for _ in range(40):
        ts = list(net.enabled_transitions(s))
        if not ts:
            break
        t = rnd.choice(ts)
        s2 = net.fire(t, s)
        for i, p in enumerate(net.places):
            assert s2.marking[i] == s.marking[i] - t.input_weight(p.id) + t.output_weight(p.id)
        s = s2
