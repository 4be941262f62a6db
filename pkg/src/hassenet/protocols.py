"""LOCC protocols over a network: teleportation, swapping, coins, compiled unitaries.

A :class:`ProtocolRun` owns one state backend plus the trace and ledger that
describe what happened to it. Qubits keep a fixed logical index for the whole
run; moving a qubit between nodes (teleportation) only changes its owner, so
the global state is always comparable with a direct, non-distributed
computation on the same indices.

Communication qubits (EPR halves) come from a free pool that grows on demand
and are not counted against node capacity; data qubits are.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from . import ledger as L
from .backends import make_backend
from .dense import QubitRegister, Unitary
from .errors import (
    BadIndex,
    BadParams,
    CapacityExceeded,
    IllegalChannelUse,
    MissingGHZ,
    MissingPair,
    NoFreeQubit,
    NoSharedEntanglement,
    NotNeighbors,
)
from .network import TYPE_I, TYPE_II, NetworkGraph
from .trace import (
    CONSUME,
    CREATE,
    DEFAULT_EPSILON,
    LOCAL,
    RECEIVE,
    SEND,
    CausalTrace,
    EventDetector,
)

FREE = -1
DETECTOR_CAP = 12


@dataclass
class NoiseMarker:
    """Depolarizing noise attached to a trace event."""

    target: int
    p: float
    qubit: int = -1
    applied: str = "I"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise BadParams(f"noise probability must lie in [0, 1], got {self.p}")


@dataclass
class ProtocolRecord:
    name: str
    nodes: tuple[int, ...]
    ledger_start: int
    ledger_end: int
    first_event: int
    last_event: int
    inequality: L.ResourceInequality | None = None
    info: dict[str, Any] = field(default_factory=dict)


class NullTrace:
    """Stand-in trace for bulk Monte-Carlo runs: hands out ids, keeps only send metadata."""

    def __init__(self):
        self.n = 0
        self.sends: dict[int, tuple] = {}
        self.lanes: dict[int, list[int]] = {}

    def __len__(self) -> int:
        return self.n

    def record(self, node, kind, *, causes=(), channel="none", post_consumption=False,
               units=0, unit_label="", **_) -> int:
        eid = self.n
        self.n += 1
        if kind == SEND:
            self.sends[eid] = (channel, post_consumption, units, unit_label)
        return eid

    def first_event_at(self, node):
        return None


class NullLedger:
    """Ledger stand-in that discards everything (balances live in the pair registry)."""

    history: list = []

    def credit(self, *a, **k):
        return self

    debit = use_channel = produce = credit

    def mark(self) -> int:
        return 0


@dataclass
class _Pair:
    qubits: dict[int, int]  # node -> qubit
    rid: int


class ProtocolRun:
    """Mutable simulation of one protocol run.

    ``extras`` adds reserved systems (e.g. ``{"R'": 1, "D": 2}``) after the
    network qubits; they get node ids N, N+1, ... and never act.
    """

    def __init__(
        self,
        net: NetworkGraph,
        engine: str = "dense",
        rng: np.random.Generator | int | None = None,
        extras: Mapping[str, int] | None = None,
        epsilon: float = DEFAULT_EPSILON,
        record: bool = True,
    ):
        self.net = net
        self.engine = engine
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.register = QubitRegister.for_network([nd.qubits for nd in net.nodes], extras)
        self.backend = make_backend(engine, max(self.register.n, 1))
        n = self.register.n
        self.owner: list[int] = [self.register.owner(q) for q in range(n)]
        self.is_data: list[bool] = [True] * n
        if n == 0:
            self.owner.append(FREE)
            self.is_data.append(False)
        self.free: list[int] = [q for q in range(len(self.owner)) if self.owner[q] == FREE]
        self.recording = record
        self.trace = CausalTrace() if record else NullTrace()
        self.ledger = L.Ledger() if record else NullLedger()
        self.detector = EventDetector(epsilon)
        self.step = 0
        self.records: list[ProtocolRecord] = []
        self.noise: list[NoiseMarker] = []
        self.notes: list[str] = []
        self._pairs: dict[tuple[int, int], list[_Pair]] = {}
        self._pending: dict[tuple[int, int], list[int]] = {}
        self._ghz: dict[tuple[int, ...], list[_Pair]] = {}
        self._rid = 0
        if not net.infinite and net.endowment > 0:
            self._endow(net.endowment)

    # ------------------------------------------------------------ bookkeeping

    @property
    def n_nodes(self) -> int:
        return self.net.n_nodes

    def tick(self, k: int = 1) -> None:
        self.step += k

    def _ev(self, node: int, kind: str, **kw) -> int:
        return self.trace.record(node, kind, wall_step=self.step, **kw)

    def data_qubits(self, node: int) -> list[int]:
        return [q for q, o in enumerate(self.owner) if o == node and self.is_data[q]]

    def qubits_at(self, node: int) -> list[int]:
        return [q for q, o in enumerate(self.owner) if o == node]

    def reserved(self, label: str) -> list[int]:
        return self.register.reserved_qubits(label)

    def _alloc(self, node: int) -> int:
        if not self.free:
            q = self.backend.grow(1)[0]
            self.owner.append(FREE)
            self.is_data.append(False)
            self.free.append(q)
        q = self.free.pop()
        self.owner[q] = node
        self.is_data[q] = False
        return q

    def _release(self, q: int, outcome: int) -> None:
        """Return a measured comm qubit to the pool, resetting it to |0>."""
        if outcome:
            self.backend.gate("X", q)
        self.owner[q] = FREE
        self.free.append(q)

    def _new_rid(self) -> int:
        self._rid += 1
        return self._rid - 1

    def _bell(self, a: int, b: int) -> None:
        self.backend.gate("H", a)
        self.backend.gate("CNOT", a, b)

    def _begin(self) -> tuple[int, int]:
        return self.ledger.mark(), len(self.trace)

    def _finish(self, name, nodes, start, ineq=None, **info) -> ProtocolRecord:
        mark, first = start
        rec = ProtocolRecord(
            name, tuple(nodes), mark, self.ledger.mark(), first, len(self.trace) - 1, ineq, info
        )
        self.records.append(rec)
        self.tick()
        return rec

    def check(self, record: ProtocolRecord) -> L.InequalityReport | None:
        if record.inequality is None:
            return None
        return L.check_inequality(
            self.ledger.history[record.ledger_start:record.ledger_end], record.inequality
        )

    # ------------------------------------------------------------ resources

    def _endow(self, k: int) -> None:
        # pre-distributed pairs: created before the run, no messages involved
        for a, b in self.net.sorted_edges():
            rids = []
            for _ in range(k):
                rid = self._new_rid()
                pay = {"species": L.QQ, "parties": [a, b], "resource": rid}
                ea = self._ev(a, CREATE, payload=pay)
                self._ev(b, CREATE, payload=pay)
                self.ledger.credit(L.QQ, (a, b), 1, ea)
                rids.append(rid)
            self._pending[(a, b)] = rids

    def _create_pair(self, a: int, b: int) -> _Pair:
        """Distribute a fresh Bell pair over an infinitely endowed edge: a prepares, sends half."""
        rid = self._new_rid()
        key = (min(a, b), max(a, b))
        pay = {"species": L.QQ, "parties": list(key), "resource": rid}
        qa, qb = self._alloc(a), self._alloc(b)
        self._bell(qa, qb)
        c = self._ev(a, CREATE, payload=pay)
        s = self._ev(a, SEND, channel="quantum", units=1, unit_label="qubit")
        self.tick()
        self._ev(b, RECEIVE, causes=[s], channel="quantum", units=1, unit_label="qubit")
        self._ev(b, CREATE, payload=pay)
        self.ledger.credit(L.QQ, (a, b), 1, c)
        return _Pair({a: qa, b: qb}, rid)

    def has_pair(self, a: int, b: int) -> bool:
        key = (min(a, b), max(a, b))
        return bool(
            self._pairs.get(key) or self._pending.get(key) or (self.net.infinite and self.net.has_edge(a, b))
        )

    def _take_pair(self, a: int, b: int, err=NoSharedEntanglement) -> _Pair:
        key = (min(a, b), max(a, b))
        live = self._pairs.get(key)
        if live:
            return live.pop(0)
        pending = self._pending.get(key)
        if pending:
            rid = pending.pop(0)
            qa, qb = self._alloc(a), self._alloc(b)
            self._bell(qa, qb)
            return _Pair({a: qa, b: qb}, rid)
        if self.net.infinite and self.net.has_edge(a, b):
            return self._create_pair(a, b)
        raise err(f"no shared [qq] between P{a} and P{b}")

    def _consume(self, node: int, species: str, parties: Sequence[int], pair: _Pair, purpose: str) -> int:
        ps = sorted(parties)
        e = self._ev(node, CONSUME, payload={"species": species, "parties": ps, "resource": pair.rid, "purpose": purpose})
        self.ledger.debit(species, ps, 1, e, exempt=self.net.infinite and species == L.QQ)
        return e

    def _send(self, src: int, dst: int, bits: Sequence[int], *, post_consumption=True, purpose="") -> int:
        pay = {"bits": [int(b) for b in bits]}
        if purpose:
            pay["purpose"] = purpose
        s = self._ev(src, SEND, channel="classical", post_consumption=post_consumption,
                     units=len(bits), unit_label="bit", payload=pay)
        self.ledger.use_channel(L.CBIT, src, dst, len(bits), s)
        return s

    def _receive(self, dst: int, send: int) -> int:
        if self.recording:
            ev = self.trace.events[send]
            meta = (ev.channel, ev.post_consumption, ev.units, ev.unit_label)
        else:
            meta = self.trace.sends.pop(send)
        return self._ev(dst, RECEIVE, causes=[send], channel=meta[0],
                        post_consumption=meta[1], units=meta[2], unit_label=meta[3])

    def store_pair(self, a: int, b: int, qa: int, qb: int, rid: int | None = None) -> None:
        key = (min(a, b), max(a, b))
        self._pairs.setdefault(key, []).append(_Pair({a: qa, b: qb}, self._new_rid() if rid is None else rid))

    def share_ghz(self, nodes: Sequence[int], species: str = L.GHZ) -> int:
        """Creator nodes[0] prepares a GHZ (or W) state and sends one qubit to each other party."""
        nodes = list(nodes)
        if len(set(nodes)) != len(nodes) or len(nodes) < 3:
            raise BadParams(f"{species} needs at least three distinct parties, got {nodes}")
        rid = self._new_rid()
        qs = [self._alloc(nodes[0]) for _ in nodes]
        if species == L.GHZ:
            self.backend.gate("H", qs[0])
            for q in qs[1:]:
                self.backend.gate("CNOT", qs[0], q)
        elif species == L.W:
            if self.engine != "dense":
                raise BadParams("W states are not stabilizer states; use the dense engine")
            from .dense import PureState, w_state
            self.backend.vec = w_state(PureState(self.backend.vec), qs).amplitudes
        else:
            raise BadParams(f"unknown multiparty species {species!r}")
        pay = {"species": species, "parties": sorted(nodes), "resource": rid}
        c = self._ev(nodes[0], CREATE, payload=pay)
        sends = []
        for nd, q in zip(nodes[1:], qs[1:]):
            sends.append((nd, self._ev(nodes[0], SEND, channel="quantum", units=1, unit_label="qubit")))
            self.owner[q] = nd
        self.tick()
        for nd, s in sends:
            self._ev(nd, RECEIVE, causes=[s], channel="quantum", units=1, unit_label="qubit")
            self._ev(nd, CREATE, payload=pay)
        self.ledger.credit(species, nodes, 1, c)
        self._ghz.setdefault((species,) + tuple(sorted(nodes)), []).append(_Pair(dict(zip(nodes, qs)), rid))
        self.tick()
        return rid

    # ------------------------------------------------------------ noise

    def depolarize(self, qubit: int, p: float, event: int) -> NoiseMarker:
        m = NoiseMarker(event, p, qubit)
        m.applied = self.backend.depolarize(qubit, p, self.rng)
        self.noise.append(m)
        return m


# ---------------------------------------------------------------- protocols


def _pick_data(run: ProtocolRun, node: int, qubit: int | None) -> int:
    if qubit is None:
        qs = run.data_qubits(node)
        if not qs:
            raise BadIndex(f"P{node} holds no data qubit")
        return qs[0]
    if not 0 <= qubit < len(run.owner) or run.owner[qubit] != node or not run.is_data[qubit]:
        raise BadIndex(f"qubit {qubit} is not a data qubit of P{node}")
    return qubit


def teleport(run: ProtocolRun, src: int, qubit: int | None, dst: int) -> int:
    """Move a data qubit from src to dst; returns its (unchanged) logical index."""
    q = _pick_data(run, src, qubit)
    if len(run.data_qubits(dst)) + 1 > run.net.node(dst).capacity:
        raise NoFreeQubit(f"P{dst} has no free data slot (capacity {run.net.node(dst).capacity})")
    pair = run._take_pair(src, dst)
    start = run._begin()
    a, b = pair.qubits[src], pair.qubits[dst]
    be = run.backend
    run._consume(src, L.QQ, (src, dst), pair, "teleport")
    be.gate("CNOT", q, a)
    be.gate("H", q)
    m1 = be.measure(q, run.rng)
    m2 = be.measure(a, run.rng)
    run._ev(src, LOCAL, op_class=TYPE_I, payload={"op": "bell_measurement", "qubit": q})
    s1 = run._send(src, dst, [m1], purpose="teleport")
    s2 = run._send(src, dst, [m2], purpose="teleport")
    run.tick()
    run._receive(dst, s1)
    run._receive(dst, s2)
    if m2:
        be.gate("X", b)
    if m1:
        be.gate("Z", b)
    if m1:
        be.gate("X", q)
    be.gate("SWAP", q, b)
    run._release(a, m2)
    run._release(b, 0)
    run.owner[q] = dst
    e = run._ev(dst, LOCAL, op_class=TYPE_I, payload={"op": "pauli_correction", "bits": [m1, m2], "qubit": q})
    run.ledger.produce(L.QBIT, (src, dst), 1, s2)
    run._finish("teleport", (src, dst), start, L.TELEPORT, qubit=q, outcomes=[m1, m2], last=e)
    return q


def superdense_send(run: ProtocolRun, src: int, dst: int, bits: int, noise: float = 0.0) -> int:
    """Send a 2-bit value (0..3) with one qubit plus one shared pair."""
    if not 0 <= int(bits) <= 3:
        raise BadParams(f"superdense coding carries a 2-bit value, got {bits}")
    pair = run._take_pair(src, dst)
    start = run._begin()
    a, b = pair.qubits[src], pair.qubits[dst]
    be = run.backend
    run._consume(src, L.QQ, (src, dst), pair, "superdense")
    xb, zb = bits & 1, bits >> 1
    if xb:
        be.gate("X", a)
    if zb:
        be.gate("Z", a)
    run._ev(src, LOCAL, op_class=TYPE_I, payload={"op": "encode", "bits": int(bits)})
    s = run._ev(src, SEND, channel="quantum", post_consumption=True, noisy=noise > 0, units=1, unit_label="qubit")
    run.ledger.use_channel(L.QBIT, src, dst, 1, s)
    if noise > 0:
        run.depolarize(a, noise, s)
    run.owner[a] = dst
    run.tick()
    run._receive(dst, s)
    be.gate("CNOT", a, b)
    be.gate("H", a)
    mz = be.measure(a, run.rng)
    mx = be.measure(b, run.rng)
    decoded = (mz << 1) | mx
    e = run._ev(dst, LOCAL, op_class=TYPE_I, payload={"op": "decode", "bits": decoded})
    run._release(a, mz)
    run._release(b, mx)
    run.ledger.produce(L.CBIT, (src, dst), 2, e)
    run._finish("superdense", (src, dst), start, L.SUPERDENSE, sent=int(bits), decoded=decoded)
    return decoded


def entanglement_swap(run: ProtocolRun, q: int, r: int, s: int) -> tuple[int, int]:
    """Q joins its pairs with R and S; afterwards R and S share a Bell pair.

    Returns the (R-side, S-side) qubits of the new pair, which is also stored
    in the run's pair registry.
    """
    for other in (r, s):
        if not run.has_pair(q, other):
            raise MissingPair(f"no [qq] between P{q} and P{other}")
    left = run._take_pair(r, q, MissingPair)
    right = run._take_pair(q, s, MissingPair)
    start = run._begin()
    qr, qa = left.qubits[r], left.qubits[q]
    qb, qs = right.qubits[q], right.qubits[s]
    be = run.backend
    run._consume(q, L.QQ, (r, q), left, "swap")
    run._consume(q, L.QQ, (q, s), right, "swap")
    be.gate("CNOT", qa, qb)
    be.gate("H", qa)
    m1 = be.measure(qa, run.rng)
    m2 = be.measure(qb, run.rng)
    run._ev(q, LOCAL, op_class=TYPE_I, payload={"op": "bell_measurement"})
    snd = run._send(q, s, [m1, m2], purpose="swap")
    run.tick()
    run._receive(s, snd)
    if m2:
        be.gate("X", qs)
    if m1:
        be.gate("Z", qs)
    run._release(qa, m1)
    run._release(qb, m2)
    rid = run._new_rid()
    pay = {"species": L.QQ, "parties": sorted((r, s)), "resource": rid}
    c = run._ev(s, CREATE, payload=pay)
    run._ev(r, CREATE, payload=pay)
    run.ledger.credit(L.QQ, (r, s), 1, c)
    run.store_pair(r, s, qr, qs, rid)
    run._finish("swap", (q, r, s), start, L.SWAP, outcomes=[m1, m2], pair=[qr, qs])
    return qr, qs


def swap_chain(run: ProtocolRun, nodes: Sequence[int], parallel: bool = False) -> tuple[int, int]:
    """Entangle the ends of a path by repeated swaps.

    Sequential mode swaps left to right; parallel mode joins disjoint
    segments pairwise, so a path of k hops needs ceil(log2 k) rounds.
    """
    nodes = list(nodes)
    if len(nodes) < 3:
        raise BadParams("a swap chain needs at least three nodes")
    if not parallel:
        out = None
        for i in range(1, len(nodes) - 1):
            out = entanglement_swap(run, nodes[i], nodes[0], nodes[i + 1])
        return out
    # materialize every hop first so the concurrent swaps never need to
    # create a pair mid-round (that would rewind lane time)
    for x, y in zip(nodes, nodes[1:]):
        key = (min(x, y), max(x, y))
        if not run._pairs.get(key):
            run._pairs.setdefault(key, []).append(run._take_pair(x, y, MissingPair))
    ends = nodes[:]
    while len(ends) > 2:
        step0 = top = run.step
        nxt = [ends[0]]
        for i in range(1, len(ends) - 1, 2):
            run.step = step0
            entanglement_swap(run, ends[i], nxt[-1], ends[i + 1])
            top = max(top, run.step)
            nxt.append(ends[i + 1])
        if len(ends) % 2 == 0:
            nxt.append(ends[-1])
        run.step = top
        ends = nxt
    pair = run._pairs[(min(ends), max(ends))][-1]
    return pair.qubits[ends[0]], pair.qubits[ends[1]]


def distributed_cnot(run: ProtocolRun, control: int, target: int,
                     control_qubit: int | None = None, target_qubit: int | None = None) -> None:
    """CNOT between data qubits on two nodes using one pair and one bit each way."""
    qc = _pick_data(run, control, control_qubit)
    qt = _pick_data(run, target, target_qubit)
    pair = run._take_pair(control, target)
    start = run._begin()
    a, b = pair.qubits[control], pair.qubits[target]
    be = run.backend
    run._consume(control, L.QQ, (control, target), pair, "cnot")
    be.gate("CNOT", qc, a)
    m1 = be.measure(a, run.rng)
    run._ev(control, LOCAL, op_class=TYPE_I, payload={"op": "cat_entangle"})
    s1 = run._send(control, target, [m1], purpose="cnot")
    run.tick()
    run._receive(target, s1)
    if m1:
        be.gate("X", b)
    be.gate("CNOT", b, qt)
    be.gate("H", b)
    m2 = be.measure(b, run.rng)
    run._ev(target, LOCAL, op_class=TYPE_I, payload={"op": "cat_disentangle"})
    s2 = run._send(target, control, [m2], purpose="cnot")
    run.tick()
    run._receive(control, s2)
    if m2:
        be.gate("Z", qc)
    e = run._ev(control, LOCAL, op_class=TYPE_I, payload={"op": "phase_correction"})
    run._release(a, m1)
    run._release(b, m2)
    run.ledger.produce(L.CNOT, (control, target), 1, e)
    run._finish("distributed_cnot", (control, target), start, L.DISTRIBUTED_CNOT, outcomes=[m1, m2])


def controlled_teleport_ghz(run: ProtocolRun, q: int, r: int, s: int, qubit: int | None = None,
                            withhold: bool = False) -> int:
    """Teleport Q's qubit to S through a shared GHZ state, gated by R's cooperation.

    With ``withhold`` R never measures or sends, and S is left without the state.
    """
    key = (L.GHZ,) + tuple(sorted((q, r, s)))
    stock = run._ghz.get(key)
    if not stock:
        raise MissingGHZ(f"no GHZ state shared by P{q}, P{r}, P{s}")
    d = _pick_data(run, q, qubit)
    ghz = stock.pop(0)
    start = run._begin()
    gq, gr, gs = ghz.qubits[q], ghz.qubits[r], ghz.qubits[s]
    be = run.backend
    run._consume(q, L.GHZ, (q, r, s), ghz, "controlled_teleport")
    be.gate("CNOT", d, gq)
    be.gate("H", d)
    m1 = be.measure(d, run.rng)
    m2 = be.measure(gq, run.rng)
    run._ev(q, LOCAL, op_class=TYPE_I, payload={"op": "bell_measurement"})
    s1 = run._send(q, r, [m1, m2], purpose="controlled_teleport")
    run.tick()
    run._receive(r, s1)
    ineq = L.controlled_teleport_inequality(q, r, s)
    if withhold:
        if m1:
            be.gate("X", d)
        run._finish("controlled_teleport", (q, r, s), start, ineq, withheld=True, holder=gs)
        return gs
    # X basis measurement on R's share; its outcome flips the phase at S
    be.gate("H", gr)
    mr = be.measure(gr, run.rng)
    run._ev(r, LOCAL, op_class=TYPE_I, payload={"op": "x_measurement"})
    s2 = run._send(r, s, [m1 ^ mr, m2], purpose="controlled_teleport")
    run.tick()
    run._receive(s, s2)
    if m2:
        be.gate("X", gs)
    if m1 ^ mr:
        be.gate("Z", gs)
    if m1:
        be.gate("X", d)
    be.gate("SWAP", d, gs)
    run._release(gq, m2)
    run._release(gr, mr)
    run._release(gs, 0)
    run.owner[d] = s
    e = run._ev(s, LOCAL, op_class=TYPE_I, payload={"op": "pauli_correction", "qubit": d})
    run.ledger.produce(L.QBIT, (q, s), 1, e)
    run._finish("controlled_teleport", (q, r, s), start, ineq, withheld=False, qubit=d)
    return d


def shared_coin(run: ProtocolRun, a: int, b: int) -> int:
    """Both parties measure Z on a shared pair; returns their common bit."""
    pair = run._take_pair(a, b)
    start = run._begin()
    qa, qb = pair.qubits[a], pair.qubits[b]
    e = run._consume(a, L.QQ, (a, b), pair, "coin")
    ma = run.backend.measure(qa, run.rng)
    mb = run.backend.measure(qb, run.rng)
    run._ev(a, LOCAL, op_class=TYPE_I, payload={"op": "coin", "bit": ma})
    run._ev(b, LOCAL, op_class=TYPE_I, payload={"op": "coin", "bit": mb})
    run._release(qa, ma)
    run._release(qb, mb)
    run.ledger.produce(L.CC, (a, b), 1, e)
    run._finish("coin", (a, b), start, L.COIN, bits=[ma, mb])
    return ma


def _is_gate_list(u) -> bool:
    return isinstance(u, (list, tuple)) and all(isinstance(g, tuple) and len(g) == 2 for g in u)


def compile_neighbor_unitary(run: ProtocolRun, a: int, b: int, u, label: str = "U") -> ProtocolRecord:
    """Apply ``u`` to all data qubits of neighbours a and b using LOCC plus shared pairs.

    ``u`` is a dense matrix / :class:`Unitary` (acting on a's qubits then b's,
    low bit first) or a Clifford gate list with the same local indexing.
    """
    if not run.net.has_edge(a, b):
        raise NotNeighbors(f"P{a} and P{b} are not neighbours")
    qa, qb = run.data_qubits(a), run.data_qubits(b)
    acting = qa + qb
    need = len(acting)
    for nd in (a, b):
        cap = run.net.node(nd).capacity
        if cap < need:
            raise CapacityExceeded(f"P{nd} capacity {cap} < {need} qubits needed to host the unitary")
    if isinstance(u, Unitary):
        u = u.matrix
    clifford = _is_gate_list(u)
    if not clifford:
        u = np.asarray(u, dtype=complex)
        if u.shape != (1 << need, 1 << need):
            raise BadParams(f"unitary of shape {u.shape} does not act on {need} qubits")
    start = run._begin()
    coin = shared_coin(run, a, b)
    host, guest = (a, b) if coin == 0 else (b, a)
    moved = run.data_qubits(guest)
    for q in moved:
        teleport(run, guest, q, host)
    if clifford:
        run.backend.program(u, acting)
    else:
        run.backend.unitary(u, acting)
    back = sorted(int(x) for x in run.rng.choice(acting, size=len(moved), replace=False)) if moved else []
    run._ev(host, LOCAL, op_class=TYPE_I if clifford else TYPE_II,
            payload={"op": "neighbor_unitary", "label": label, "nodes": [a, b], "qubits": acting, "return": back})
    run.tick()
    for q in back:
        teleport(run, host, q, guest)
    return run._finish("compile_neighbor_unitary", (a, b), start, None,
                       host=host, guest=guest, moved=moved, returned=back)


# ---------------------------------------------------------------- scripted LU / LOCC


def _resolve(ref, aliases: Mapping[str, int]) -> int:
    if isinstance(ref, str):
        if ref not in aliases:
            raise BadParams(f"unknown qubit alias {ref!r}")
        return aliases[ref]
    return int(ref)


def _apply_local(run: ProtocolRun, u, qubits: Sequence[int]) -> None:
    if isinstance(u, str):
        run.backend.gate(u, *qubits)
    elif _is_gate_list(u):
        run.backend.program(u, list(qubits))
    else:
        m = u.matrix if isinstance(u, Unitary) else np.asarray(u, dtype=complex)
        run.backend.unitary(m, list(qubits))


def _check_script(script: Sequence[Mapping], allow: set[str]) -> None:
    for i, op in enumerate(script):
        kind = op.get("op")
        if kind == "send" and op.get("channel", "classical") != "classical":
            raise IllegalChannelUse(f"step {i}: quantum send is not allowed here")
        if kind not in allow:
            raise IllegalChannelUse(f"step {i}: {kind!r} is not allowed here")


def _observe(run: ProtocolRun, node: int) -> bool:
    """Detector gate: True when the node's reduced state moved (or cannot be tracked)."""
    qs = run.qubits_at(node)
    if run.engine != "dense" or len(qs) > DETECTOR_CAP:
        return True
    return run.detector.detect(node, run.backend.reduced(qs))


def _baseline(run: ProtocolRun, nodes) -> None:
    for nd in nodes:
        qs = run.qubits_at(nd)
        if run.engine == "dense" and len(qs) <= DETECTOR_CAP:
            run.detector.baseline(nd, run.backend.reduced(qs))


def _run_script(run: ProtocolRun, script: Sequence[Mapping], name: str) -> ProtocolRecord:
    start = run._begin()
    aliases: dict[str, int] = {}
    known: dict[int, dict[str, int]] = {}
    nodes = {int(op[k]) for op in script for k in ("node", "src", "dst") if k in op}
    for op in script:
        if op.get("op") == "pair":
            nodes.update(int(x) for x in op["nodes"])
    _baseline(run, nodes)
    for op in script:
        kind = op["op"]
        if kind == "pair":
            x, y = (int(v) for v in op["nodes"])
            pair = run._take_pair(x, y)
            run._consume(x, L.QQ, (x, y), pair, name)
            aliases[f"{op['key']}.0"] = pair.qubits[x]
            aliases[f"{op['key']}.1"] = pair.qubits[y]
            _baseline(run, (x, y))
            continue
        if kind in ("local", "cond"):
            node = int(op["node"])
            qs = [_resolve(q, aliases) for q in op["qubits"]]
            for q in qs:
                if run.owner[q] != node:
                    raise IllegalChannelUse(f"P{node} does not hold qubit {q}")
            if kind == "cond":
                if op["key"] not in known.get(node, {}):
                    raise IllegalChannelUse(f"P{node} conditions on {op['key']!r} without having it")
                if not known[node][op["key"]]:
                    continue
            _apply_local(run, op["u"], qs)
            if _observe(run, node):
                run._ev(node, LOCAL, op_class=op.get("op_class", TYPE_I), payload={"op": kind})
        elif kind == "measure":
            node = int(op["node"])
            q = _resolve(op["qubit"], aliases)
            if run.owner[q] != node:
                raise IllegalChannelUse(f"P{node} does not hold qubit {q}")
            bit = run.backend.measure(q, run.rng)
            known.setdefault(node, {})[op["key"]] = bit
            _observe(run, node)
            run._ev(node, LOCAL, op_class=TYPE_I, payload={"op": "measure", "key": op["key"], "bit": bit})
        elif kind == "send":
            src, dst = int(op["src"]), int(op["dst"])
            keys = list(op["keys"])
            have = known.get(src, {})
            missing = [k for k in keys if k not in have]
            if missing:
                raise IllegalChannelUse(f"P{src} cannot send unknown values {missing}")
            s = run._send(src, dst, [have[k] for k in keys], post_consumption=bool(op.get("post_consumption", False)))
            run.tick()
            run._receive(dst, s)
            known.setdefault(dst, {}).update({k: have[k] for k in keys})
        else:
            raise BadParams(f"unknown script op {kind!r}")
    return run._finish(name, tuple(sorted(nodes)), start, None)


def lu_transform(run: ProtocolRun, unitaries) -> ProtocolRecord:
    """Local unitaries only. ``unitaries`` maps node -> op on all its data qubits, or is a script."""
    if isinstance(unitaries, Mapping):
        script = [{"op": "local", "node": nd, "qubits": run.data_qubits(nd), "u": u} for nd, u in unitaries.items()]
    else:
        script = list(unitaries)
    _check_script(script, {"local"})
    return _run_script(run, script, "lu")


def locc_round(run: ProtocolRun, script: Sequence[Mapping]) -> ProtocolRecord:
    """Local operations, measurements, classical sends and bit-conditioned operations.

    Ops: ``local``/``cond`` {node, qubits, u[, key]}, ``measure`` {node, qubit, key},
    ``send`` {src, dst, keys}, ``pair`` {nodes, key} (binds ``key.0``/``key.1``).
    """
    script = list(script)
    _check_script(script, {"local", "cond", "measure", "send", "pair"})
    return _run_script(run, script, "locc")
