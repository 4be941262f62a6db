"""Scenario files: JSON documents validated against the bundled schema plus semantic rules."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .dense import MAX_PURE_QUBITS
from .errors import HasseNetError, ParseError, SemanticError
from .network import NetworkGraph, build_network, capacity_violations, generate_topology
from .scrambling import ScramblingScenario
from .stabilizer import MAX_QUBITS
from .trace import DEFAULT_EPSILON

SCHEMA_VERSION = 1
CLIFFORD_SOURCES = ("clifford", "identity")


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(resources.files("hassenet").joinpath("schema/scenario.schema.json").read_text())


@dataclass
class Scenario:
    raw: dict[str, Any]
    net: NetworkGraph
    kind: str  # protocol | scrambling
    engine: str
    seed: int
    epsilon: float
    trials: int
    scrambling: ScramblingScenario | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def protocol(self) -> dict:
        return self.raw.get("protocol", {})

    @property
    def output(self) -> dict:
        return self.raw.get("output", {})

    @property
    def checks(self) -> dict:
        return self.raw.get("checks", {})


def parse_text(text: str, source: str = "<scenario>") -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    errors = sorted(jsonschema.Draft202012Validator(schema()).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.path) or "<root>"
        raise ParseError(f"{source}: schema violation at {where}: {e.message}")
    return doc


def _network(doc: dict) -> NetworkGraph:
    spec = doc["network"]
    endowment = spec.get("endowment", "infinite")
    if "topology" in spec:
        params = dict(spec["topology"])
        kind = params.pop("kind")
        qubits = params.pop("qubits", 1)
        return generate_topology(kind, qubits=qubits, endowment=endowment, **params)
    return build_network(spec["nodes"], [tuple(e) for e in spec.get("edges", [])], endowment)


def _total_qubits(doc: dict, net: NetworkGraph) -> int:
    sc = doc.get("scrambling")
    if sc is None:
        return net.size
    return net.size + net.node(sc["R"]).qubits + sc.get("D_size", 0) if sc["R"] < net.n_nodes else net.size


def _resolve_engine(doc: dict, net: NetworkGraph) -> str:
    engine = doc.get("engine", "auto")
    if engine != "auto":
        return engine
    sc = doc.get("scrambling")
    if sc is not None:
        clifford = sc.get("gate_source", "haar") in CLIFFORD_SOURCES
    else:
        p = doc.get("protocol", {})
        clifford = p.get("gate", "clifford") in ("swap", "cnot", "identity", "clifford") and p.get("name") not in ("lu", "locc") \
            and not isinstance(p.get("state"), list)
    return "stabilizer" if clifford and _total_qubits(doc, net) > MAX_PURE_QUBITS else "dense"


def load_scenario(doc: dict, source: str = "<scenario>") -> Scenario:
    """Semantic checks on a schema-valid document."""
    problems: list[str] = []
    if ("protocol" in doc) == ("scrambling" in doc):
        raise SemanticError(f"{source}: exactly one of 'protocol' or 'scrambling' is required")
    try:
        net = _network(doc)
    except HasseNetError as exc:
        raise SemanticError(f"{source}: network: {exc}") from None
    for msg in capacity_violations(net):
        problems.append(f"capacity rule: {msg}")
    engine = _resolve_engine(doc, net)
    total = _total_qubits(doc, net)
    cap = MAX_PURE_QUBITS if engine == "dense" else MAX_QUBITS
    if total > cap:
        problems.append(f"{total} qubits exceeds the {engine} engine cap of {cap}")
    kind = "scrambling" if "scrambling" in doc else "protocol"
    scr = None
    if kind == "scrambling":
        s = doc["scrambling"]
        if not 0 <= s["R"] < net.n_nodes:
            problems.append(f"R={s['R']} is not a network node")
        elif "R_size" in s and s["R_size"] != net.node(s["R"]).qubits:
            problems.append(f"R_size {s['R_size']} differs from node {s['R']}'s {net.node(s['R']).qubits} qubits")
        for rnd in s.get("schedule", []):
            for a, b in rnd:
                if not net.has_edge(a, b):
                    problems.append(f"schedule edge ({a}, {b}) is not a network edge")
        if s.get("gate_source", "haar") in ("haar", "t_doped") and engine != "dense":
            problems.append(f"gate source {s.get('gate_source', 'haar')} needs the dense engine")
        if not problems:
            try:
                scr = ScramblingScenario(
                    net, R=s["R"], D_size=s.get("D_size", 0),
                    D_targets=tuple(s["D_targets"]) if "D_targets" in s else None,
                    rounds=s["rounds"], gate_source=s.get("gate_source", "haar"), t_count=s.get("t_count", 0),
                    schedule_policy=s.get("schedule_policy", "sweep"),
                    schedule=tuple(tuple(tuple(e) for e in r) for r in s["schedule"]) if "schedule" in s else None,
                    engine=engine, seed=doc.get("seed", 0), granularity=s.get("granularity", "qubit"),
                )
            except HasseNetError as exc:
                problems.append(str(exc))
            if scr is not None:
                limit = net.n_nodes if scr.granularity == "node" else net.size
                for k in s.get("subsets", []):
                    if k > limit:
                        problems.append(f"subset size {k} exceeds {limit}")
                    elif engine == "dense" and scr.granularity == "qubit" and k > 12:
                        problems.append(f"subset size {k} exceeds the density-matrix cap of 12")
    else:
        p = doc["protocol"]
        for key in ("src", "dst"):
            if key in p and p[key] >= net.n_nodes:
                problems.append(f"protocol {key}={p[key]} is not a network node")
        for nd in p.get("nodes", []):
            if nd >= net.n_nodes:
                problems.append(f"protocol node {nd} is not a network node")
    if problems:
        raise SemanticError(f"{source}: " + "; ".join(problems))
    return Scenario(
        raw=doc, net=net, kind=kind, engine=engine, seed=int(doc.get("seed", 0)),
        epsilon=float(doc.get("epsilon", DEFAULT_EPSILON)),
        trials=int(doc.get("trials", doc.get("scrambling", {}).get("trials", 1))), scrambling=scr,
    )


def read_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    return load_scenario(parse_text(text, str(path)), str(path))
