from __future__ import annotations

import re
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hassenet.errors import BadParams, InvalidTrace
from hassenet.network import generate_topology
from hassenet.protocols import ProtocolRun, superdense_send, swap_chain, teleport
from hassenet.render import DiagramStyle, read_jsonl, to_dot, to_jsonl, to_svg
from hassenet.trace import CausalTrace, hasse_reduce

SVG = "{http://www.w3.org/2000/svg}"


def _demo_trace(seed=0, noise=0.0):
    run = ProtocolRun(generate_topology("path", n=3), rng=seed)
    teleport(run, 0, 0, 1)
    superdense_send(run, 1, 2, 3, noise=noise)
    swap_chain(run, [0, 1, 2])
    return run.trace


def test_dot_is_deterministic():
    assert to_dot(_demo_trace(1)) == to_dot(_demo_trace(1))
    assert to_svg(_demo_trace(1)) == to_svg(_demo_trace(1))


def test_dot_counts_every_event_and_edge():
    t = _demo_trace()
    dot = to_dot(t)
    assert len(re.findall(r"^\s+e\d+ \[", dot, re.M)) == len(t)
    causal = re.findall(r"^\s+e\d+ -> e\d+ \[class=\"causal", dot, re.M)
    assert len(causal) == len(t.edges)
    hasse = to_dot(t, mode="hasse")
    assert len(re.findall(r"class=\"causal", hasse)) == len(hasse_reduce(t))
    assert dot.count("subgraph cluster_lane_") == 3


def test_dot_message_styles():
    dot = to_dot(_demo_trace())
    classical = [l for l in dot.splitlines() if "causal message" in l and "dashed" in l]
    assert classical and all("penwidth=2" in l for l in classical)
    assert 'class="resource"' in dot


def test_svg_is_well_formed_with_one_glyph_per_event():
    t = _demo_trace(noise=1.0)
    root = ET.fromstring(to_svg(t))
    glyphs = [g for g in root.iter(f"{SVG}g") if "event" in g.get("class", "").split()]
    assert len(glyphs) == len(t)
    assert {int(g.get("data-id")) for g in glyphs} == set(range(len(t)))
    classes = " ".join(g.get("class") for g in glyphs)
    assert "marker-cross" in classes
    lanes = [g for g in root.iter(f"{SVG}g") if g.get("class") == "lane"]
    assert len(lanes) == 3
    assert any("post-consumption" in g.get("class", "") for g in root.iter(f"{SVG}g"))


def test_invalid_trace_is_refused():
    t = CausalTrace()
    t.record(0, "Send", channel="classical")
    for fn in (to_dot, to_svg):
        with pytest.raises(InvalidTrace):
            fn(t)


def test_jsonl_round_trip_is_byte_identical():
    t = _demo_trace(2)
    text = to_jsonl(t)
    back = read_jsonl(text)
    assert to_jsonl(back) == text
    assert back.edges == t.edges and back.lanes == t.lanes
    assert to_dot(back) == to_dot(t)


@given(st.integers(0, 50))
@settings(max_examples=15, deadline=None)
def test_jsonl_round_trip_property(seed):
    t = _demo_trace(seed)
    assert to_jsonl(read_jsonl(to_jsonl(t))) == to_jsonl(t)


def test_style_overrides():
    s = DiagramStyle.from_mapping({"classical": "dotted", "post_consumption_factor": 3})
    assert s.stroke("classical") == "dotted" and s.width(True) == 3
    dot = to_dot(_demo_trace(), style=s)
    assert "dotted" in dot and "penwidth=3" in dot
    with pytest.raises(BadParams):
        DiagramStyle.from_mapping({"colour": "red"})


def test_lane_names():
    dot = to_dot(_demo_trace(), names={0: "alice", 1: "bob"})
    assert 'label="alice"' in dot and 'label="bob"' in dot and 'label="P2"' in dot
