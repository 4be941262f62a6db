from __future__ import annotations

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hassenet import dense
from hassenet.errors import BadParams, CycleDetected, SubsetMismatch, UnknownCause, UnknownEvent
from hassenet.trace import (
    CausalTrace,
    EventDetector,
    descendant_bitsets,
    detect_local_event,
    hasse_reduce,
    random_dag,
    transitive_reduction,
    validate,
)


def _graph(n, edges):
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    return g


def _closure(n, edges):
    return set(nx.transitive_closure_dag(_graph(n, edges)).edges())


def _message_trace():
    t = CausalTrace()
    a = t.record(0, "Local")
    s = t.record(0, "Send", channel="classical", units=1, unit_label="bit")
    t.record(1, "Local")
    r = t.record(1, "Receive", causes=[s], channel="classical", wall_step=1)
    t.record(1, "Local", wall_step=1)
    t.record(2, "Local")
    return t, a, s, r


def test_lane_and_message_edges():
    t, a, s, r = _message_trace()
    assert (a, s) in t.edges and (s, r) in t.edges and (2, r) in t.edges
    assert t.events[r].payload["send"] == s
    assert t.happened_before(a, 4) and not t.happened_before(4, a)
    assert t.future_cone(a) == {1, 3, 4}
    assert t.past_cone(4) == {0, 1, 2, 3}
    assert t.nodes_of(t.future_cone(a)) == {0, 1}
    assert validate(t) == []


@given(st.integers(2, 40), st.floats(0.0, 0.5), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_transitive_reduction_matches_networkx(n, p, seed):
    edges = random_dag(n, p, np.random.default_rng(seed))
    got = transitive_reduction(n, edges)
    want = set(nx.transitive_reduction(_graph(n, edges)).edges())
    assert got == want
    assert _closure(n, got) == _closure(n, edges)


def test_reduction_on_shuffled_labels():
    # ids that are not a topological order still reduce correctly
    rng = np.random.default_rng(8)
    edges = random_dag(30, 0.2, rng)
    perm = rng.permutation(30)
    relabeled = {(int(perm[a]), int(perm[b])) for a, b in edges}
    assert transitive_reduction(30, relabeled) == set(nx.transitive_reduction(_graph(30, relabeled)).edges())


def test_descendants_match_networkx():
    rng = np.random.default_rng(9)
    edges = random_dag(25, 0.15, rng)
    desc = descendant_bitsets(25, edges)
    g = _graph(25, edges)
    for v in range(25):
        assert {b for b in range(25) if desc[v] >> b & 1} == nx.descendants(g, v)


def test_cycle_detection():
    with pytest.raises(CycleDetected):
        transitive_reduction(3, {(0, 1), (1, 2), (2, 0)})
    t, *_ = _message_trace()
    t.add_edge(4, 0)
    assert not t.ordered
    kinds = {f.kind for f in validate(t)}
    assert "CycleDetected" in kinds


def test_future_cone_after_backward_edge():
    t = CausalTrace()
    for nd in (0, 1, 2):
        t.record(nd, "Local")
    t.add_edge(2, 0)
    assert t.future_cone(2) == {0}
    assert t.future_cone(1) == set()


def test_hasse_of_trace_drops_implied_edges():
    t, *_ = _message_trace()
    t.add_edge(0, 4)
    assert (0, 4) not in hasse_reduce(t)
    assert _closure(len(t), hasse_reduce(t)) == _closure(len(t), t.edges)


def test_record_rejects_bad_input():
    t = CausalTrace()
    with pytest.raises(BadParams):
        t.record(0, "Explode")
    with pytest.raises(BadParams):
        t.record(0, "Local", channel="smoke")
    with pytest.raises(UnknownCause):
        t.record(0, "Local", causes=[3])
    a = t.record(0, "Local")
    with pytest.raises(UnknownCause):
        t.record(1, "Receive", causes=[a])
    with pytest.raises(UnknownEvent):
        t.future_cone(7)


def test_validate_flags_pairing_problems():
    t, a, s, r = _message_trace()
    t.events[r] = t.events[r]._replace(channel="quantum")
    kinds = [f.kind for f in validate(t)]
    assert kinds == ["PairingViolation"]

    t2 = CausalTrace()
    t2.record(0, "Send", channel="classical")
    assert [f.kind for f in validate(t2)] == ["PairingViolation"]

    t3, a, s, r = _message_trace()
    t3.record(2, "Receive", causes=[s], channel="classical", wall_step=2)
    assert any("received twice" in f.message for f in validate(t3))


def test_validate_flags_lane_and_resource_problems():
    t = CausalTrace()
    t.record(0, "Local", wall_step=3)
    t.record(0, "Local", wall_step=1)
    assert [f.kind for f in validate(t)] == ["LaneViolation"]

    t = CausalTrace()
    t.record(0, "ResourceConsume", payload={"species": "[qq]", "parties": [0, 1]})
    assert [f.kind for f in validate(t)] == ["ResourceViolation"]
    t = CausalTrace()
    c = t.record(0, "ResourceCreate", payload={"species": "[qq]", "parties": [0, 1]})
    t.record(0, "ResourceConsume", causes=[c], payload={"species": "[qq]", "parties": [0, 1]})
    assert validate(t) == []


def test_detector_thresholds():
    det = EventDetector(epsilon=0.1)
    zero = dense.partial_trace(dense.init_product_state(1), [0])
    plus = dense.partial_trace(dense.init_product_state(1, ["+"]), [0])
    assert not det.detect(0, zero)  # first sighting sets the baseline
    assert not detect_local_event(det, 0, zero)
    assert det.detect(0, plus)
    assert det.distance(0, plus) == 0
    other = dense.partial_trace(dense.init_product_state(2), [1])
    with pytest.raises(SubsetMismatch):
        det.detect(0, other)
    with pytest.raises(BadParams):
        EventDetector(0)


def test_no_signaling_on_entangled_partner():
    """Any local unitary on one half of a Bell pair leaves the partner's state untouched."""
    rng = np.random.default_rng(10)
    det = EventDetector(epsilon=1e-12)
    psi = dense.bell_pair(dense.init_product_state(2), 0, 1)
    det.baseline(1, dense.partial_trace(psi, [1]))
    for _ in range(50):
        psi = dense.apply_unitary(psi, dense.haar_unitary(1, rng, [0]))
        assert not det.detect(1, dense.partial_trace(psi, [1]))
