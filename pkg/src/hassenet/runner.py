"""Scenario execution and report assembly shared by the command line tools."""
from __future__ import annotations

import warnings
from typing import Any

import numpy as np

from . import dense
from . import ledger as L
from .errors import BadAmplitudes, BadParams, ScheduleDisconnected
from .protocols import (
    ProtocolRun,
    compile_neighbor_unitary,
    controlled_teleport_ghz,
    distributed_cnot,
    locc_round,
    lu_transform,
    shared_coin,
    superdense_send,
    swap_chain,
    teleport,
)
from .scenario import SCHEMA_VERSION, Scenario
from .scrambling import (
    DATA_CENTER,
    R_PRIME,
    conservation_check,
    data_center_summary,
    mutual_info,
    query_cost_estimate,
    run_scrambling,
    sample_decoupling,
    scrambling_summary,
    with_seed,
)
from .stabilizer import random_clifford_circuit
from .trace import validate

STATE_GATES = {"0": [], "1": ["X"], "+": ["H"], "-": ["X", "H"]}
BROADCAST_NOTE = "a value sent to k nodes is recorded as k Send/Receive pairs"


def _amplitudes(state) -> np.ndarray:
    vals = [complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a) for a in state]
    v = np.array(vals, dtype=complex)
    if abs(np.linalg.norm(v) - 1) > 1e-9:
        raise BadAmplitudes(f"input state has norm {np.linalg.norm(v):.6g}")
    return v


def prepare_qubit(run: ProtocolRun, q: int, state) -> None:
    """Untracked preparation of data qubit ``q`` (assumed |0>) in ``state``."""
    if isinstance(state, str):
        for g in STATE_GATES[state]:
            run.backend.gate(g, q)
        return
    if run.engine != "dense":
        raise BadParams("amplitude inputs need the dense engine; use '0', '1', '+' or '-'")
    a, b = _amplitudes(state)
    run.backend.unitary(np.array([[a, -np.conj(b)], [b, np.conj(a)]]), [q])


def overlap(run: ProtocolRun, ref: np.ndarray) -> float | None:
    """|<ref|psi>|^2 with communication qubits (high bits, back in |0>) ignored."""
    if run.engine != "dense":
        return None
    return float(abs(np.vdot(ref, run.backend.vec[: ref.size])) ** 2)


def _snapshot(run: ProtocolRun) -> np.ndarray | None:
    return run.backend.vec.copy() if run.engine == "dense" else None


def _edge_gate(name: str, ka: int, kb: int, rng: np.random.Generator, engine: str):
    k = ka + kb
    if name == "haar":
        if engine != "dense":
            raise BadParams("haar gates need the dense engine")
        return dense.haar_unitary(k, rng).matrix
    if name == "swap":
        return [("SWAP", (0, ka))]
    if name == "cnot":
        return [("CNOT", (0, ka))]
    if name == "identity":
        return []
    return random_clifford_circuit(k, rng)


def _as_gate_list(gates) -> list:
    return [(g[0], tuple(g[1])) for g in gates]


def execute_protocol(sc: Scenario, seed: int) -> tuple[ProtocolRun, dict[str, Any]]:
    p = sc.protocol
    name = p["name"]
    run = ProtocolRun(sc.net, sc.engine, np.random.default_rng(seed), epsilon=sc.epsilon)
    aux = np.random.default_rng([seed, 1])
    default_state = [0.6, 0.8] if sc.engine == "dense" else "+"
    out: dict[str, Any] = {"name": name}
    src, dst = p.get("src", 0), p.get("dst", 1)
    if name == "teleport":
        q = p.get("qubit", run.data_qubits(src)[0])
        prepare_qubit(run, q, p.get("state", default_state))
        ref = _snapshot(run)
        teleport(run, src, q, dst)
        out.update(qubit=q, fidelity=overlap(run, ref) if ref is not None else None)
    elif name == "superdense":
        values = [p["bits"]] if "bits" in p else [0, 1, 2, 3]
        decoded = [superdense_send(run, src, dst, v, noise=p.get("noise", 0.0)) for v in values]
        out.update(sent=values, decoded=decoded, exact=decoded == values)
    elif name == "swap":
        nodes = p.get("nodes", list(range(sc.net.n_nodes)))
        qr, qs = swap_chain(run, nodes, parallel=p.get("parallel", False))
        out.update(ends=[nodes[0], nodes[-1]], mutual_information=mutual_info(run, [qr], [qs]))
    elif name == "distributed_cnot":
        qc, qt = run.data_qubits(src)[0], run.data_qubits(dst)[0]
        prepare_qubit(run, qc, p.get("state", "+"))
        ref = _snapshot(run)
        distributed_cnot(run, src, dst, qc, qt)
        if ref is not None:
            ref = dense.apply_matrix(ref, dense.GATES["CNOT"], [qc, qt])
        out.update(fidelity=overlap(run, ref) if ref is not None else None,
                   mutual_information=mutual_info(run, [qc], [qt]))
    elif name == "controlled_teleport":
        q, r, s = p.get("nodes", [0, 1, 2])
        d = run.data_qubits(q)[0]
        prepare_qubit(run, d, p.get("state", default_state))
        ref = _snapshot(run)
        run.share_ghz([q, r, s])
        withhold = p.get("withhold", False)
        controlled_teleport_ghz(run, q, r, s, d, withhold=withhold)
        fid = None if withhold or ref is None else overlap(run, ref)
        out.update(withheld=withhold, fidelity=fid)
    elif name == "coin":
        a, b = p.get("nodes", [src, dst])
        bits = [shared_coin(run, a, b) for _ in range(p.get("repeat", 1))]
        out.update(bits=bits)
    elif name == "compile":
        a, b = p.get("nodes", [src, dst])
        qa, qb = run.data_qubits(a), run.data_qubits(b)
        acting = qa + qb
        if sc.engine == "dense":
            run.backend.unitary(dense.haar_unitary(len(acting), aux).matrix, acting)
        else:
            run.backend.program(random_clifford_circuit(len(acting), aux), acting)
        ref = _snapshot(run)
        u = _edge_gate(p.get("gate", "haar"), len(qa), len(qb), aux, sc.engine)
        rec = compile_neighbor_unitary(run, a, b, u)
        if ref is not None:
            ref = run_direct(ref, u, acting)
        out.update(host=rec.info["host"], returned=rec.info["returned"],
                   fidelity=overlap(run, ref) if ref is not None else None)
    elif name == "lu":
        lu_transform(run, {int(k): v for k, v in p.get("unitaries", {}).items()})
    elif name == "locc":
        script = []
        for op in p.get("script", []):
            op = dict(op)
            if isinstance(op.get("u"), list):
                op["u"] = _as_gate_list(op["u"])
            script.append(op)
        locc_round(run, script)
    else:
        raise BadParams(f"unknown protocol {name!r}")
    return run, out


def run_direct(vec: np.ndarray, u, qubits) -> np.ndarray:
    """Apply ``u`` (matrix or gate list) straight to ``vec``: the non-distributed reference."""
    if isinstance(u, np.ndarray):
        return dense.apply_matrix(vec, u, list(qubits))
    for g, qs in u:
        vec = dense.apply_matrix(vec, dense.GATES[g.upper()], [qubits[q] for q in qs])
    return vec


def ledger_summary(run: ProtocolRun) -> dict[str, Any]:
    by_op: dict[str, dict[str, int]] = {}
    for e in run.ledger.history:
        tally = by_op.setdefault(e.op, {})
        tally[e.species] = tally.get(e.species, 0) + e.amount
    return {
        "balances": L.species_report(run.ledger, run.net.labels()),
        "totals": L.species_report(run.ledger, with_parties=False),
        "by_op": {op: dict(sorted(t.items())) for op, t in sorted(by_op.items())},
    }


def _check(name: str, passed: bool, detail: Any = None) -> dict[str, Any]:
    return {"name": name, "passed": bool(passed), "detail": detail}


def protocol_report(sc: Scenario, seed: int) -> tuple[dict[str, Any], ProtocolRun]:
    checks = []
    tol = sc.checks.get("fidelity_tol", 1e-9)
    run, result = execute_protocol(sc, seed)
    findings = validate(run.trace)
    checks.append(_check("trace_valid", not findings, [f.message for f in findings]))
    records = []
    for rec in run.records:
        rep = run.check(rec)
        entry = {"name": rec.name, "nodes": list(rec.nodes),
                 "inequality": rep.to_dict() if rep else None}
        records.append(entry)
        if rep is not None and sc.checks.get("inequality", True) and not rec.info.get("withheld"):
            checks.append(_check(f"inequality:{rec.name}", rep.passed, rep.mismatches))
    if result.get("fidelity") is not None and not sc.protocol.get("noise"):
        checks.append(_check("fidelity", result["fidelity"] >= 1 - tol, result["fidelity"]))
    if "exact" in result and not sc.protocol.get("noise"):
        checks.append(_check("decoded_exactly", result["exact"], result["decoded"]))
    if result["name"] == "swap":
        checks.append(_check("swap_entangled", abs(result["mutual_information"] - 2) < 1e-9,
                             result["mutual_information"]))
    report = {
        "protocol": result,
        "records": records,
        "resources": ledger_summary(run),
        "trace": {"events": len(run.trace), "edges": len(run.trace.edges), "broadcast": BROADCAST_NOTE},
        "noise": [{"event": m.target, "p": m.p, "qubit": m.qubit, "applied": m.applied} for m in run.noise],
        "checks": checks,
    }
    return report, run


def scrambling_report(sc: Scenario, seed: int, trials: int, jobs: int = 1,
                      sizes: list[int] | None = None) -> tuple[dict[str, Any], ProtocolRun]:
    scr = with_seed(sc.scrambling, seed)
    s = sc.raw["scrambling"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScheduleDisconnected)
        res = run_scrambling(scr, np.random.default_rng(seed))
    run = res.run
    rp, dc = run.reserved(R_PRIME), run.reserved(DATA_CENTER)
    residual = conservation_check(run, rp, dc, list(range(scr.n)))
    if sizes is None:
        limit = scr.net.n_nodes if scr.granularity == "node" else scr.n
        if scr.engine == "dense" and scr.granularity == "qubit":
            limit = min(limit, dense.MAX_DENSITY_QUBITS)
        sizes = list(s.get("subsets", range(1, limit + 1)))
    report_rows = sample_decoupling(scr, sizes, trials, seed=seed, jobs=jobs)
    checks = []
    findings = validate(run.trace)
    checks.append(_check("trace_valid", not findings, [f.message for f in findings]))
    if sc.checks.get("coverage", True):
        checks.append(_check("cone_coverage", res.covered,
                             {"cone": sorted(res.cone_nodes), "ScheduleDisconnected": res.warnings}))
    tol = sc.checks.get("conservation_tol", 1e-9)
    checks.append(_check("conservation", residual < tol, residual))
    if sc.checks.get("bound", scr.D_size == 0 and scr.gate_source in ("haar", "clifford")):
        bad = [r.n_e for r in report_rows.rows
               if r.mean_deviation > r.bound + 3 * (r.stderr_deviation or 0.0) + 1e-12]
        checks.append(_check("decoupling_bound", not bad, {"violations": bad}))
    report: dict[str, Any] = {
        "scrambling": scrambling_summary(scr),
        "schedule": [[list(e) for e in r] for r in res.schedule],
        "cone_coverage": {"covered": res.covered, "cone_nodes": sorted(res.cone_nodes),
                          "reached_by_schedule": sorted(res.reached), "warnings": res.warnings},
        "conservation_residual": residual,
        "decoupling": report_rows.to_dict(),
        "query_cost": query_cost_estimate(scr.n, res.t_used),
        "resources": ledger_summary(run),
        "trace": {"events": len(run.trace), "edges": len(run.trace.edges), "broadcast": BROADCAST_NOTE},
        "checks": checks,
    }
    if scr.D_size:
        report["data_center"] = data_center_summary(scr, trials, seed=seed)
    return report, run


def build_report(sc: Scenario, seed: int, trials: int | None = None, jobs: int = 1) -> tuple[dict[str, Any], ProtocolRun]:
    trials = sc.trials if trials is None else trials
    if sc.kind == "protocol":
        body, run = protocol_report(sc, seed)
    else:
        body, run = scrambling_report(sc, seed, trials, jobs)
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": sc.raw,
        "engine": sc.engine,
        "seed": seed,
        "trials": trials,
        "kind": sc.kind,
        **body,
    }
    report["passed"] = all(c["passed"] for c in body["checks"])
    return report, run
