"""Scrambling a node's secret over the network and measuring how well it hides.

The global system is the network V (R plus V_A), a reference R' holding the
purification of R, and an optional data center D purifying part of V_A. Only
V is ever acted on; every scheduled edge unitary is compiled into node-local
operations by :func:`protocols.compile_neighbor_unitary`.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import dense
from .errors import BadParams, ScheduleDisconnected, SubsetTooLarge
from .network import NetworkGraph, diameter
from .protocols import ProtocolRun, compile_neighbor_unitary
from .stabilizer import random_clifford_circuit

R_PRIME = "R'"
DATA_CENTER = "D"
GATE_SOURCES = ("haar", "clifford", "t_doped", "identity")
POLICIES = ("sweep", "random_edge_matching")


@dataclass(frozen=True)
class ScramblingScenario:
    net: NetworkGraph
    R: int = 0
    D_size: int = 0
    D_targets: tuple[int, ...] | None = None
    rounds: int = 1
    gate_source: str = "haar"
    t_count: int = 0
    schedule_policy: str = "sweep"
    schedule: tuple[tuple[tuple[int, int], ...], ...] | None = None
    engine: str = "dense"
    seed: int | None = None
    granularity: str = "qubit"

    def __post_init__(self):
        if not 0 <= self.R < self.net.n_nodes:
            raise BadParams(f"R={self.R} is not a network node")
        if self.rounds < 1 and self.schedule is None:
            raise BadParams("rounds must be >= 1")
        if self.gate_source not in GATE_SOURCES:
            raise BadParams(f"unknown gate source {self.gate_source!r}")
        if self.schedule_policy not in POLICIES:
            raise BadParams(f"unknown schedule policy {self.schedule_policy!r}")
        if self.gate_source == "haar" and self.engine != "dense":
            raise BadParams("haar gates need the dense engine")
        if self.gate_source == "t_doped" and self.engine != "dense":
            raise BadParams("T-doped circuits need the dense engine")
        if self.granularity not in ("qubit", "node"):
            raise BadParams(f"granularity must be 'qubit' or 'node', got {self.granularity!r}")
        if self.D_size < 0:
            raise BadParams("D_size must be >= 0")
        if self.D_size > len(self.va_qubits()):
            raise BadParams(f"D_size {self.D_size} exceeds |V_A| = {len(self.va_qubits())}")
        if self.D_targets is not None:
            if len(self.D_targets) != self.D_size or not set(self.D_targets) <= set(self.va_qubits()):
                raise BadParams("D_targets must list D_size distinct qubits of V_A")
        if self.schedule is not None:
            for rnd in self.schedule:
                used: set[int] = set()
                for a, b in rnd:
                    if not self.net.has_edge(a, b):
                        raise BadParams(f"schedule edge ({a}, {b}) is not a network edge")
                    if {a, b} & used:
                        raise BadParams(f"round {rnd} is not a matching")
                    used |= {a, b}

    @property
    def R_size(self) -> int:
        return self.net.node(self.R).qubits

    @property
    def n(self) -> int:
        return self.net.size

    def r_qubits(self) -> list[int]:
        start = sum(nd.qubits for nd in self.net.nodes[: self.R])
        return list(range(start, start + self.R_size))

    def va_qubits(self) -> list[int]:
        r = set(self.r_qubits())
        return [q for q in range(self.n) if q not in r]

    def d_targets(self) -> list[int]:
        if self.D_targets is not None:
            return list(self.D_targets)
        return self.va_qubits()[: self.D_size]

    def extras(self) -> dict[str, int]:
        return {R_PRIME: self.R_size, DATA_CENTER: self.D_size}


# ---------------------------------------------------------------- schedules


def build_schedule(net: NetworkGraph, rounds: int, policy: str = "sweep",
                   rng: np.random.Generator | None = None) -> list[list[tuple[int, int]]]:
    """Per round, a matching of edges to scramble.

    ``sweep`` walks the sorted edge list cyclically and closes a round at the
    first edge that clashes with one already taken. ``random_edge_matching``
    shuffles the edges and takes a greedy maximal matching.
    """
    if rounds < 1:
        raise BadParams("rounds must be >= 1")
    edges = net.sorted_edges()
    if not edges:
        return [[] for _ in range(rounds)]
    out = []
    if policy == "sweep":
        cursor = 0
        for _ in range(rounds):
            used: set[int] = set()
            rnd = []
            for k in range(len(edges)):
                a, b = edges[(cursor + k) % len(edges)]
                if a in used or b in used:
                    break
                rnd.append((a, b))
                used |= {a, b}
            cursor = (cursor + len(rnd)) % len(edges)
            out.append(rnd)
        return out
    if policy == "random_edge_matching":
        rng = rng if rng is not None else np.random.default_rng()
        for _ in range(rounds):
            used = set()
            rnd = []
            for i in rng.permutation(len(edges)):
                a, b = edges[int(i)]
                if a not in used and b not in used:
                    rnd.append((a, b))
                    used |= {a, b}
            out.append(sorted(rnd))
        return out
    raise BadParams(f"unknown schedule policy {policy!r}")


def schedule_reach(schedule: Sequence[Sequence[tuple[int, int]]], source: int) -> set[int]:
    """Nodes reachable from ``source`` along time-respecting schedule edges."""
    reached = {source}
    for rnd in schedule:
        new = set()
        for a, b in rnd:
            if a in reached or b in reached:
                new |= {a, b}
        reached |= new
    return reached


# ---------------------------------------------------------------- execution


def initial_run(sc: ScramblingScenario, rng: np.random.Generator, record: bool = True) -> ProtocolRun:
    """R' Bell-paired with R, D Bell-paired with its targets, the rest |0>."""
    run = ProtocolRun(sc.net, sc.engine, rng, extras=sc.extras(), record=record)
    for a, b in zip(run.reserved(R_PRIME), sc.r_qubits()):
        run._bell(a, b)
    for a, b in zip(run.reserved(DATA_CENTER), sc.d_targets()):
        run._bell(a, b)
    return run


def _edge_gate(sc: ScramblingScenario, k: int, rng: np.random.Generator, t_left: list[int]):
    if sc.gate_source == "haar":
        return dense.haar_unitary(k, rng).matrix
    if sc.gate_source == "identity":
        return []
    gates = random_clifford_circuit(k, rng)
    if sc.gate_source == "t_doped" and t_left[0] > 0:
        gates = gates + [("T", (int(rng.integers(k)),))]
        t_left[0] -= 1
    return gates


@dataclass
class ScrambleResult:
    run: ProtocolRun
    schedule: list[list[tuple[int, int]]]
    reached: set[int]
    cone_nodes: set[int]
    t_used: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def trace(self):
        return self.run.trace

    @property
    def ledger(self):
        return self.run.ledger

    @property
    def covered(self) -> bool:
        return self.cone_nodes == set(range(self.run.net.n_nodes))


def run_scrambling(sc: ScramblingScenario, rng: np.random.Generator | int | None = None,
                   record: bool = True) -> ScrambleResult:
    """Execute the schedule; ``record=False`` skips trace and ledger (state is identical).

    Without a trace, the cone coverage is taken from the schedule itself.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(sc.seed if rng is None else rng)
    if sc.schedule is not None:
        schedule = [list(r) for r in sc.schedule]
    else:
        schedule = build_schedule(sc.net, sc.rounds, sc.schedule_policy, rng)
    run = initial_run(sc, rng, record)
    t_left = [sc.t_count]
    for rnd in schedule:
        for a, b in rnd:
            k = len(run.data_qubits(a)) + len(run.data_qubits(b))
            compile_neighbor_unitary(run, a, b, _edge_gate(sc, k, rng, t_left), label=f"U{a},{b}")
    reached = schedule_reach(schedule, sc.R)
    if record:
        first = run.trace.first_event_at(sc.R)
        cone = {sc.R}
        if first is not None:
            cone |= run.trace.nodes_of(run.trace.future_cone(first))
        cone &= set(range(sc.net.n_nodes))
    else:
        cone = set(reached)
    out = ScrambleResult(run, schedule, reached, cone, sc.t_count - t_left[0])
    if reached != set(range(sc.net.n_nodes)):
        missing = sorted(set(range(sc.net.n_nodes)) - reached)
        msg = f"schedule never reaches nodes {missing} from R={sc.R}; scrambling cannot complete"
        out.warnings.append(msg)
        warnings.warn(msg, ScheduleDisconnected, stacklevel=2)
    return out


# ---------------------------------------------------------------- measures


def decoupling_bound(n_e: int, n_b: int) -> float:
    """sqrt((d_E^2 - 1) / (d_E d_B + 1)) with d = 2^qubits, overflow-safe."""
    if n_e < 0 or n_b < 0:
        raise BadParams("subsystem sizes must be >= 0")
    if n_e == 0:
        return 0.0
    if n_e + n_b < 500:
        de, db = 1 << n_e, 1 << n_b
        return math.sqrt((de * de - 1) / (de * db + 1))
    # log form: 2^{(n_e - n_b)/2} up to vanishing corrections
    return 2.0 ** ((n_e - n_b) / 2)


def _handle(state):
    if isinstance(state, ProtocolRun):
        return state.backend
    if isinstance(state, ScrambleResult):
        return state.run.backend
    return state


def decoupling_deviation(state, ve: Sequence[int]) -> float:
    """||rho_{V_E} - I/d_E||_1 for a run, backend, PureState or tableau."""
    h = _handle(state)
    ve = list(ve)
    if not ve:
        return 0.0
    if isinstance(h, dense.PureState):
        return dense.deviation_from_mixed(dense.partial_trace(h, ve))
    if hasattr(h, "deviation"):
        if getattr(h, "kind", "") == "dense" and len(ve) > dense.MAX_DENSITY_QUBITS:
            raise SubsetTooLarge(f"|V_E|={len(ve)} exceeds the density cap {dense.MAX_DENSITY_QUBITS}")
        return h.deviation(ve)
    from .stabilizer import deviation_from_entropy, subset_entropy
    return deviation_from_entropy(subset_entropy(h, ve), len(set(ve)))


def _entropy(h, qs: Sequence[int]) -> float:
    if isinstance(h, dense.PureState):
        return dense.subset_entropy(h, qs)
    if hasattr(h, "entropy"):
        return h.entropy(qs)
    from .stabilizer import subset_entropy
    return float(subset_entropy(h, qs))


def mutual_info(state, a: Sequence[int], b: Sequence[int]) -> float:
    h = _handle(state)
    a, b = list(a), list(b)
    if set(a) & set(b):
        from .errors import OverlappingSubsets
        raise OverlappingSubsets(f"subsets overlap on {sorted(set(a) & set(b))}")
    if not a or not b:
        return 0.0
    return _entropy(h, a) + _entropy(h, b) - _entropy(h, a + b)


def conservation_check(state, r_prime: Sequence[int], d: Sequence[int], rest: Sequence[int]) -> float:
    """|2|R| - I(R':rest) - I(R':D)| for a pure global state with R'R initially maximally entangled."""
    return abs(2 * len(r_prime) - mutual_info(state, r_prime, rest) - mutual_info(state, r_prime, d))


def query_cost_estimate(n: int | Sequence = 0, t: int | None = None) -> str:
    """Learning-cost class of a (T-doped) Clifford circuit: ``poly(n)`` or ``poly(n)·exp(t)``.

    Accepts ``(n, t)`` or a gate list, for which n is the number of layers
    (gate count as an upper bound) and t the number of T gates.
    """
    if not isinstance(n, (int, np.integer)):
        gates = list(n)
        t = sum(1 for name, _ in gates if name.upper() in ("T", "TDG")) if t is None else t
        n = len(gates)
    t = 0 if t is None else int(t)
    if n < 0 or t < 0:
        raise BadParams("n and t must be >= 0")
    return f"poly({n})" if t == 0 else f"poly({n})·exp({t})"


# ---------------------------------------------------------------- sampling


@dataclass
class DecouplingRow:
    n_e: int
    n_b: int
    trials: int
    mean_deviation: float
    stderr_deviation: float | None
    bound: float
    mean_mi: float
    stderr_mi: float | None
    granularity: str = "qubit"

    def to_dict(self) -> dict:
        return {
            "n_E": self.n_e, "n_B": self.n_b, "trials": self.trials,
            "mean_deviation": self.mean_deviation, "stderr_deviation": self.stderr_deviation,
            "bound": self.bound, "mean_I": self.mean_mi, "stderr_I": self.stderr_mi,
            "granularity": self.granularity,
        }


@dataclass
class DecouplingReport:
    rows: list[DecouplingRow]
    warnings: list[str] = field(default_factory=list)

    def row(self, n_e: int) -> DecouplingRow:
        for r in self.rows:
            if r.n_e == n_e:
                return r
        raise KeyError(n_e)

    def monotone(self, k: float = 2.0) -> bool:
        """Mean I(R':V_E) nondecreasing in n_E within k standard errors."""
        rows = sorted(self.rows, key=lambda r: r.n_e)
        for lo, hi in zip(rows, rows[1:]):
            slack = k * math.hypot(lo.stderr_mi or 0.0, hi.stderr_mi or 0.0)
            if hi.mean_mi < lo.mean_mi - slack - 1e-12:
                return False
        return True

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "warnings": list(self.warnings)}


def _subset(sc: ScramblingScenario, run: ProtocolRun, size: int, rng: np.random.Generator) -> list[int]:
    if sc.granularity == "node":
        nodes = rng.choice(sc.net.n_nodes, size=size, replace=False)
        return sorted(q for nd in nodes for q in run.data_qubits(int(nd)))
    return sorted(int(q) for q in rng.choice(sc.n, size=size, replace=False))


def _trial(sc: ScramblingScenario, seed: np.random.SeedSequence, sizes: Sequence[int], record: bool = False):
    rng = np.random.default_rng(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScheduleDisconnected)
        res = run_scrambling(sc, rng, record)
    rp = res.run.reserved(R_PRIME)
    out = []
    for size in sizes:
        ve = _subset(sc, res.run, size, rng) if size else []
        out.append((len(ve), decoupling_deviation(res, ve), mutual_info(res, rp, ve)))
    return out, res.warnings


def _stats(xs: np.ndarray) -> tuple[float, float | None]:
    if len(xs) < 2:
        return float(xs.mean()), None
    return float(xs.mean()), float(xs.std(ddof=1) / math.sqrt(len(xs)))


def sample_decoupling(sc: ScramblingScenario, sizes: Sequence[int], trials: int,
                      seed: int | None = None, jobs: int = 1) -> DecouplingReport:
    """Scramble ``trials`` times; per trial, evaluate each V_E size on a fresh random subset.

    Trials use independent child seeds, so results do not depend on ``jobs``.
    """
    if trials < 1:
        raise BadParams("trials must be >= 1")
    limit = sc.net.n_nodes if sc.granularity == "node" else sc.n
    for s in sizes:
        if not 0 <= s <= limit:
            raise BadParams(f"V_E size {s} outside 0..{limit}")
    seeds = np.random.SeedSequence(sc.seed if seed is None else seed).spawn(trials)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial, [sc] * trials, seeds, [list(sizes)] * trials))
    else:
        results = [_trial(sc, s, sizes) for s in seeds]
    warns = sorted({w for _, ws in results for w in ws})
    rows = []
    for j, size in enumerate(sizes):
        ne = np.array([r[0][j][0] for r in results])
        dev = np.array([r[0][j][1] for r in results])
        mi = np.array([r[0][j][2] for r in results])
        n_e = int(ne[0]) if sc.granularity == "qubit" else int(round(ne.mean()))
        md, sd = _stats(dev)
        mm, sm = _stats(mi)
        rows.append(DecouplingRow(n_e, sc.n - n_e, trials, md, sd, decoupling_bound(n_e, sc.n - n_e),
                                  mm, sm, sc.granularity))
    return DecouplingReport(rows, warns)


def threshold_sweep(sc: ScramblingScenario, trials: int, sizes: Sequence[int] | None = None,
                    seed: int | None = None, jobs: int = 1) -> DecouplingReport:
    """I(R':V_E) and deviation for n_E = 1..|V| (or the given sizes)."""
    limit = sc.net.n_nodes if sc.granularity == "node" else sc.n
    sizes = list(range(1, limit + 1)) if sizes is None else list(sizes)
    return sample_decoupling(sc, sizes, trials, seed, jobs)


def data_center_summary(sc: ScramblingScenario, trials: int, seed: int | None = None) -> dict:
    """I(R':V) and I(R':D) after scrambling, with the |D| > |V|/2 test at both granularities."""
    seeds = np.random.SeedSequence(sc.seed if seed is None else seed).spawn(trials)
    iv, idc = [], []
    for s in seeds:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ScheduleDisconnected)
            res = run_scrambling(sc, np.random.default_rng(s), record=False)
        rp = res.run.reserved(R_PRIME)
        iv.append(mutual_info(res, rp, range(sc.n)))
        idc.append(mutual_info(res, rp, res.run.reserved(DATA_CENTER)))
    owner = [nd.id for nd in sc.net.nodes for _ in range(nd.qubits)]
    touched = {owner[q] for q in sc.d_targets()}
    mv, sv = _stats(np.array(iv))
    md, sd = _stats(np.array(idc))
    return {
        "D_size": sc.D_size,
        "mean_I_V": mv, "stderr_I_V": sv,
        "mean_I_D": md, "stderr_I_D": sd,
        "qubit_threshold_met": sc.D_size > sc.n / 2,
        "purified_nodes": len(touched),
        "node_threshold_met": len(touched) > sc.net.n_nodes / 2,
    }


def scrambling_summary(sc: ScramblingScenario) -> dict:
    """Static facts: sizes, rounds and the broadcast (diameter) lower bound."""
    try:
        diam = diameter(sc.net)
    except Exception:
        diam = None
    return {
        "n": sc.n, "R": sc.R, "R_size": sc.R_size, "D_size": sc.D_size,
        "rounds": sc.rounds, "diameter_lower_bound": diam,
        "gate_source": sc.gate_source, "engine": sc.engine,
    }


def with_seed(sc: ScramblingScenario, seed: int) -> ScramblingScenario:
    return replace(sc, seed=seed)
