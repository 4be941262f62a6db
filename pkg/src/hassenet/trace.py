"""Causal event traces: happened-before, cones, Hasse reduction, validation.

A trace is an append-only DAG. Every event sits on its node's lane and is
linked to the previous event of that lane; messages add cross-lane edges from
a Send to its Receive.
"""
from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple

import numpy as np

from .dense import MixedState, trace_distance_L1
from .errors import BadParams, CycleDetected, SubsetMismatch, UnknownCause, UnknownEvent

LOCAL = "Local"
SEND = "Send"
RECEIVE = "Receive"
CREATE = "ResourceCreate"
CONSUME = "ResourceConsume"
KINDS = (LOCAL, SEND, RECEIVE, CREATE, CONSUME)
CHANNELS = ("classical", "quantum", "none")

DEFAULT_EPSILON = 1e-6


class Event(NamedTuple):
    id: int
    node: int
    kind: str
    channel: str = "none"
    post_consumption: bool = False
    op_class: str = "TypeI"
    noisy: bool = False
    units: int = 0
    unit_label: str = ""
    wall_step: int = 0
    payload: Mapping[str, Any] = {}


@dataclass
class Finding:
    kind: str
    message: str
    events: tuple[int, ...] = ()


class CausalTrace:
    def __init__(self):
        self.events: list[Event] = []
        self.edges: set[tuple[int, int]] = set()
        self.lanes: dict[int, list[int]] = {}
        self.succ: list[list[int]] = []
        # ids are a topological order unless add_edge inserted a backward edge
        self.ordered = True
        self._closure: list[int] | None = None

    def __len__(self) -> int:
        return len(self.events)

    def event(self, eid: int) -> Event:
        if not 0 <= eid < len(self.events):
            raise UnknownEvent(f"no event {eid}")
        return self.events[eid]

    def record(
        self,
        node: int,
        kind: str,
        *,
        causes: Iterable[int] = (),
        channel: str = "none",
        post_consumption: bool = False,
        op_class: str = "TypeI",
        noisy: bool = False,
        units: int = 0,
        unit_label: str = "",
        wall_step: int = 0,
        payload: Mapping[str, Any] | None = None,
    ) -> int:
        """Append an event; the lane edge is added automatically.

        A Receive must name exactly one Send among ``causes``.
        """
        if kind not in KINDS:
            raise BadParams(f"unknown event kind {kind!r}")
        if channel not in CHANNELS:
            raise BadParams(f"unknown channel {channel!r}")
        n = len(self.events)
        if causes:
            causes = list(dict.fromkeys(causes))
            for c in causes:
                if not 0 <= c < n:
                    raise UnknownCause(f"cause {c} is not in the trace")
        payload = dict(payload) if payload else {}
        if kind == RECEIVE:
            sends = [c for c in causes if self.events[c].kind == SEND]
            if len(sends) != 1:
                raise UnknownCause(f"a Receive needs exactly one Send cause, got {causes}")
            payload.setdefault("send", sends[0])
        eid = n
        self.events.append(
            Event(eid, node, kind, channel, post_consumption, op_class, noisy,
                  units, unit_label, wall_step, payload)
        )
        self.succ.append([])
        lane = self.lanes.setdefault(node, [])
        if lane:
            self.edges.add((lane[-1], eid))
            self.succ[lane[-1]].append(eid)
        lane.append(eid)
        for c in causes:
            if (c, eid) not in self.edges:
                self.edges.add((c, eid))
                self.succ[c].append(eid)
        self._closure = None
        return eid

    def add_edge(self, cause: int, effect: int) -> None:
        """Raw edge insertion; bypasses the append-only ordering guarantees."""
        self.event(cause)
        self.event(effect)
        if (cause, effect) not in self.edges:
            self.edges.add((cause, effect))
            self.succ[cause].append(effect)
        if cause >= effect:
            self.ordered = False
        self._closure = None

    def causes_of(self, eid: int) -> list[int]:
        return sorted(a for a, b in self.edges if b == eid)

    def first_event_at(self, node: int) -> int | None:
        lane = self.lanes.get(node)
        return lane[0] if lane else None

    # ------------------------------------------------------------ order queries

    def _descendants(self) -> list[int]:
        if self._closure is None:
            if self.ordered:
                desc = [0] * len(self.events)
                for v in range(len(self.events) - 1, -1, -1):
                    acc = 0
                    for s in self.succ[v]:
                        acc |= (1 << s) | desc[s]
                    desc[v] = acc
                self._closure = desc
            else:
                self._closure = descendant_bitsets(len(self.events), self.edges)
        return self._closure

    def happened_before(self, a: int, b: int) -> bool:
        self.event(a)
        self.event(b)
        return bool(self._descendants()[a] >> b & 1)

    def future_cone(self, e: int) -> set[int]:
        """Events reachable from ``e`` (``e`` itself excluded)."""
        self.event(e)
        if self._closure is not None or not self.ordered:
            return _bits(self._descendants()[e])
        seen = {e}
        stack = [e]
        while stack:
            for s in self.succ[stack.pop()]:
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        seen.discard(e)
        return seen

    def past_cone(self, e: int) -> set[int]:
        """Events from which ``e`` is reachable (``e`` itself excluded)."""
        self.event(e)
        desc = self._descendants()
        return {a for a in range(len(self.events)) if desc[a] >> e & 1}

    def nodes_of(self, events: Iterable[int]) -> set[int]:
        return {self.events[e].node for e in events}


def _bits(v: int) -> set[int]:
    out = set()
    while v:
        low = v & -v
        out.add(low.bit_length() - 1)
        v ^= low
    return out


def _topological(n: int, edges: Iterable[tuple[int, int]]) -> list[int]:
    ts = graphlib.TopologicalSorter({v: () for v in range(n)})
    for a, b in edges:
        ts.add(b, a)
    try:
        return list(ts.static_order())
    except graphlib.CycleError as exc:
        raise CycleDetected(f"cycle through events {exc.args[1]}") from None


def descendant_bitsets(n: int, edges: Iterable[tuple[int, int]]) -> list[int]:
    """Per vertex, a bitset of every vertex reachable from it."""
    edges = list(edges)
    order = _topological(n, edges)
    succ: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        succ[a].append(b)
    desc = [0] * n
    for v in reversed(order):
        acc = 0
        for s in succ[v]:
            acc |= (1 << s) | desc[s]
        desc[v] = acc
    return desc


def transitive_reduction(n: int, edges: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    """Minimal edge set with the same reachability as ``edges`` on a DAG.

    Successors are visited in topological order; one that is already reachable
    through an earlier successor is implied and dropped.
    """
    edges = set(edges)
    order = _topological(n, edges)
    rank = {v: i for i, v in enumerate(order)}
    desc = descendant_bitsets(n, edges)
    succ: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        succ[a].append(b)
    kept = set()
    for v in range(n):
        covered = 0
        for s in sorted(succ[v], key=rank.__getitem__):
            if not covered >> s & 1:
                kept.add((v, s))
            covered |= desc[s]
    return kept


def hasse_reduce(trace: CausalTrace) -> set[tuple[int, int]]:
    return transitive_reduction(len(trace.events), trace.edges)


def validate(trace: CausalTrace) -> list[Finding]:
    """Structural checks; an empty list means the trace is well formed."""
    findings: list[Finding] = []
    n = len(trace.events)
    try:
        _topological(n, trace.edges)
        acyclic = True
    except CycleDetected as exc:
        findings.append(Finding("CycleDetected", str(exc)))
        acyclic = False

    received: dict[int, int] = {}
    for ev in trace.events:
        if ev.kind != RECEIVE:
            continue
        sid = ev.payload.get("send")
        if sid is None or not 0 <= sid < n or trace.events[sid].kind != SEND:
            findings.append(Finding("PairingViolation", f"receive {ev.id} has no matching send", (ev.id,)))
            continue
        send = trace.events[sid]
        if sid in received:
            findings.append(
                Finding("PairingViolation", f"send {sid} received twice ({received[sid]}, {ev.id})", (sid, ev.id))
            )
        received[sid] = ev.id
        if (sid, ev.id) not in trace.edges:
            findings.append(Finding("PairingViolation", f"no edge from send {sid} to receive {ev.id}", (sid, ev.id)))
        if sid > ev.id or send.wall_step > ev.wall_step:
            findings.append(
                Finding("PairingViolation", f"receive {ev.id} precedes its send {sid}", (sid, ev.id))
            )
        if send.channel != ev.channel:
            findings.append(
                Finding("PairingViolation", f"send {sid} and receive {ev.id} use different channels", (sid, ev.id))
            )
    for ev in trace.events:
        if ev.kind == SEND and ev.id not in received:
            findings.append(Finding("PairingViolation", f"send {ev.id} never received", (ev.id,)))

    for node, lane in trace.lanes.items():
        for a, b in zip(lane, lane[1:]):
            ea, eb = trace.events[a], trace.events[b]
            if a >= b or ea.wall_step > eb.wall_step:
                findings.append(Finding("LaneViolation", f"lane {node} out of order at {a}->{b}", (a, b)))
            if (a, b) not in trace.edges:
                findings.append(Finding("LaneViolation", f"lane {node} missing edge {a}->{b}", (a, b)))
        for e in lane:
            if trace.events[e].node != node:
                findings.append(Finding("LaneViolation", f"event {e} filed on lane {node}", (e,)))

    if acyclic:
        creates: dict[tuple, list[int]] = {}
        for ev in trace.events:
            if ev.kind == CREATE:
                creates.setdefault(_resource_key(ev), []).append(ev.id)
        for ev in trace.events:
            if ev.kind != CONSUME:
                continue
            cands = creates.get(_resource_key(ev), [])
            if not any(trace.happened_before(c, ev.id) for c in cands):
                findings.append(
                    Finding("ResourceViolation", f"consume {ev.id} has no prior matching create", (ev.id,))
                )
    return findings


def _resource_key(ev: Event) -> tuple:
    return (ev.payload.get("species"), tuple(ev.payload.get("parties", ())))


class EventDetector:
    """Records a local event when a node's reduced state moves by at least epsilon."""

    def __init__(self, epsilon: float = DEFAULT_EPSILON):
        if not epsilon > 0:
            raise BadParams(f"epsilon must be positive, got {epsilon}")
        self.epsilon = epsilon
        self.snapshots: dict[int, MixedState] = {}

    def baseline(self, node: int, rho: MixedState) -> None:
        self.snapshots[node] = rho

    def distance(self, node: int, rho: MixedState) -> float:
        snap = self.snapshots.get(node)
        if snap is None:
            return float("inf")
        if tuple(snap.subset) != tuple(rho.subset):
            raise SubsetMismatch(f"node {node}: snapshot on {snap.subset}, got {rho.subset}")
        return trace_distance_L1(snap, rho)

    def detect(self, node: int, rho: MixedState) -> bool:
        """True iff ||rho - last snapshot||_1 >= epsilon; a hit replaces the snapshot.

        The first observation of a node only sets its baseline.
        """
        if node not in self.snapshots:
            self.snapshots[node] = rho
            return False
        if self.distance(node, rho) >= self.epsilon:
            self.snapshots[node] = rho
            return True
        return False


def detect_local_event(detector: EventDetector, node: int, current_rho: MixedState) -> bool:
    return detector.detect(node, current_rho)


def random_dag(n: int, p: float, rng: np.random.Generator) -> set[tuple[int, int]]:
    """Edges i->j (i<j) kept independently with probability p."""
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((i, j))
    return edges
