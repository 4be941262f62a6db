"""Network graph, node sizes, partitions and topology helpers.

A network is an undirected graph of nodes, each dedicating ``qubits`` qubits
to a protocol and owning ``capacity`` physical qubits in total. Edges carry
an EPR-pair endowment that is either a finite count or the ``INFINITE`` flag.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .errors import (
    BadParams,
    DanglingEdge,
    DisconnectedGraph,
    DuplicateEdge,
    EmptyNetwork,
    OverlappingBlocks,
    SelfLoop,
    UncoveredNode,
)

INFINITE = "infinite"
TYPE_I = "TypeI"
TYPE_II = "TypeII"


@dataclass(frozen=True)
class Node:
    id: int
    qubits: int
    capacity: int
    op_class: str = TYPE_II
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or f"P{self.id}"


@dataclass(frozen=True)
class NetworkGraph:
    nodes: tuple[Node, ...]
    edges: frozenset[tuple[int, int]]
    endowment: int | str = INFINITE

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def size(self) -> int:
        """Total protocol qubits, the sum of node budgets."""
        return sum(nd.qubits for nd in self.nodes)

    @property
    def dimension_bits(self) -> int:
        """log2 of the network dimension; the dimension itself is never built."""
        return self.size

    @property
    def infinite(self) -> bool:
        return self.endowment == INFINITE

    def node(self, i: int) -> Node:
        return self.nodes[i]

    def neighbors(self, i: int) -> list[int]:
        out = []
        for a, b in sorted(self.edges):
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return out

    def has_edge(self, a: int, b: int) -> bool:
        return _norm_edge(a, b) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(nd.id for nd in self.nodes)
        g.add_edges_from(self.edges)
        return g

    def labels(self) -> dict[int, str]:
        return {nd.id: nd.label for nd in self.nodes}


def _norm_edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def default_capacity(qubits: Sequence[int], edges: Iterable[tuple[int, int]]) -> list[int]:
    """|P_i| + max over neighbours of |P_j| (just |P_i| for isolated nodes)."""
    best = [0] * len(qubits)
    for a, b in edges:
        best[a] = max(best[a], qubits[b])
        best[b] = max(best[b], qubits[a])
    return [q + m for q, m in zip(qubits, best)]


def build_network(
    spec: Sequence[Mapping | int],
    edges: Iterable[Sequence[int]] = (),
    endowment: int | str = INFINITE,
) -> NetworkGraph:
    """Validate a node/edge description and return an immutable graph.

    ``spec`` entries are either plain qubit counts or mappings with keys
    ``qubits`` and optionally ``id``, ``capacity``, ``op_class``, ``name``.
    Node ids must be dense ``0..N-1``; when omitted the list position is used.
    """
    if not spec:
        raise EmptyNetwork("network needs at least one node")
    entries = [{"qubits": s} if isinstance(s, int) else dict(s) for s in spec]
    for pos, e in enumerate(entries):
        e.setdefault("id", pos)
    entries.sort(key=lambda e: e["id"])
    ids = [e["id"] for e in entries]
    if ids != list(range(len(entries))):
        raise BadParams(f"node ids must be dense 0..{len(entries) - 1}, got {ids}")

    n = len(entries)
    edge_set: set[tuple[int, int]] = set()
    for edge in edges:
        if len(edge) != 2:
            raise BadParams(f"edge must be a pair, got {edge!r}")
        a, b = int(edge[0]), int(edge[1])
        if not (0 <= a < n and 0 <= b < n):
            raise DanglingEdge(f"edge ({a}, {b}) references a missing node")
        if a == b:
            raise SelfLoop(f"self-loop on node {a}")
        key = _norm_edge(a, b)
        if key in edge_set:
            raise DuplicateEdge(f"duplicate edge {key}")
        edge_set.add(key)

    if endowment != INFINITE:
        if isinstance(endowment, bool) or not isinstance(endowment, int) or endowment < 0:
            raise BadParams(f"endowment must be 'infinite' or a nonnegative int, got {endowment!r}")

    qubits = [int(e["qubits"]) for e in entries]
    defaults = default_capacity(qubits, edge_set)
    nodes = []
    for e, q, cap in zip(entries, qubits, defaults):
        if q < 1:
            raise BadParams(f"node {e['id']} needs at least one qubit")
        capacity = int(e.get("capacity", cap))
        if capacity < q:
            raise BadParams(f"node {e['id']}: capacity {capacity} below qubit budget {q}")
        op_class = e.get("op_class", TYPE_II)
        if op_class not in (TYPE_I, TYPE_II):
            raise BadParams(f"unknown op_class {op_class!r}")
        nodes.append(Node(e["id"], q, capacity, op_class, str(e.get("name", ""))))
    return NetworkGraph(tuple(nodes), frozenset(edge_set), endowment)


def capacity_violations(net: NetworkGraph) -> list[str]:
    """Nodes whose capacity is below |P_i| + max(neighbour budgets)."""
    need = default_capacity([nd.qubits for nd in net.nodes], net.edges)
    return [
        f"node {nd.label}: capacity {nd.capacity} < required {req} "
        f"(|P_i| + max neighbour |P_j|)"
        for nd, req in zip(net.nodes, need)
        if nd.capacity < req
    ]


@dataclass(frozen=True)
class Partition:
    blocks: Mapping[str, frozenset[int]]
    sizes: Mapping[str, int] = field(default_factory=dict)

    def block(self, label: str) -> frozenset[int]:
        return self.blocks[label]

    def size(self, label: str) -> int:
        """Qubit count of a block."""
        return self.sizes[label]


def make_partition(
    net: NetworkGraph,
    assignment: Mapping[str, Iterable[int]],
    scope: Iterable[int] | None = None,
) -> Partition:
    if not assignment:
        raise BadParams("partition needs at least one block")
    scope_set = set(range(net.n_nodes)) if scope is None else set(scope)
    seen: dict[int, str] = {}
    blocks = {}
    for label, members in assignment.items():
        if not label:
            raise BadParams("block labels must be nonempty")
        block = frozenset(int(m) for m in members)
        for m in block:
            if m not in scope_set:
                raise UncoveredNode(f"node {m} in block {label!r} is outside the scope")
            if m in seen:
                raise OverlappingBlocks(f"node {m} in blocks {seen[m]!r} and {label!r}")
            seen[m] = label
        blocks[label] = block
    missing = scope_set - seen.keys()
    if missing:
        raise UncoveredNode(f"nodes {sorted(missing)} not assigned to any block")
    sizes = {label: sum(net.node(m).qubits for m in b) for label, b in blocks.items()}
    return Partition(blocks, sizes)


def diameter(net: NetworkGraph) -> int:
    """Hop diameter; also the broadcast lower bound on scrambling rounds."""
    g = net.to_networkx()
    if not nx.is_connected(g):
        raise DisconnectedGraph("diameter is undefined on a disconnected network")
    if g.number_of_nodes() == 1:
        return 0
    return nx.diameter(g)


def generate_topology(kind: str, qubits: int = 1, endowment: int | str = INFINITE, **params) -> NetworkGraph:
    """Build a standard topology with ``qubits`` per node.

    kinds: ``path(n)``, ``ring(n)``, ``grid(rows, cols)``, ``star(n)``,
    ``complete(n)``, ``random_regular(n, deg, seed)``.
    """
    try:
        if kind == "path":
            g = nx.path_graph(_pos(params, "n", 1))
        elif kind == "ring":
            g = nx.cycle_graph(_pos(params, "n", 3))
        elif kind == "grid":
            g = nx.convert_node_labels_to_integers(
                nx.grid_2d_graph(_pos(params, "rows", 1), _pos(params, "cols", 1)), ordering="sorted"
            )
        elif kind == "star":
            # star(n): n nodes total, hub is node 0
            g = nx.star_graph(_pos(params, "n", 2) - 1)
        elif kind == "complete":
            g = nx.complete_graph(_pos(params, "n", 1))
        elif kind == "random_regular":
            n, deg = _pos(params, "n", 2), _pos(params, "deg", 1)
            if deg >= n or (n * deg) % 2:
                raise BadParams(f"no {deg}-regular graph on {n} nodes")
            g = nx.random_regular_graph(deg, n, seed=params.get("seed", 0))
        else:
            raise BadParams(f"unknown topology {kind!r}")
    except KeyError as exc:
        raise BadParams(f"{kind} needs parameter {exc}") from None
    return build_network([qubits] * g.number_of_nodes(), list(g.edges()), endowment)


def _pos(params: Mapping, key: str, minimum: int) -> int:
    v = params[key]
    if not isinstance(v, int) or v < minimum:
        raise BadParams(f"{key} must be an int >= {minimum}, got {v!r}")
    return v
