from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from hassenet.cli import EXIT_CHECKS, EXIT_ENGINE, EXIT_OK, EXIT_USAGE, main
from hassenet.errors import ParseError, SemanticError
from hassenet.scenario import load_scenario, parse_text, read_scenario

ROOT = Path(__file__).resolve().parents[1]
SCEN = ROOT / "scenarios"
GOLDEN = Path(__file__).parent / "golden"


def _write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(p)


def _report(out, stem):
    data = json.loads((out / f"{stem}.report.json").read_text())
    data.pop("timing")
    return data


BASE = {"schema_version": 1, "network": {"nodes": [1, 1], "edges": [[0, 1]]}}


def test_parse_error_has_position():
    with pytest.raises(ParseError) as exc:
        parse_text('{"a": 1,\n  "b": }', "x.json")
    assert exc.value.line == 2 and exc.value.column == 8
    assert str(exc.value).startswith("x.json:2:8:")


def test_schema_violation_names_the_path():
    with pytest.raises(ParseError, match="protocol"):
        parse_text(json.dumps({**BASE, "protocol": {"name": "warp"}}))
    with pytest.raises(ParseError):
        parse_text(json.dumps({**BASE, "schema_version": 2, "protocol": {"name": "coin"}}))


@pytest.mark.parametrize(
    "doc, needle",
    [
        (BASE, "exactly one"),
        ({**BASE, "protocol": {"name": "coin"}, "scrambling": {"R": 0, "rounds": 1}}, "exactly one"),
        ({**BASE, "network": {"nodes": [{"qubits": 2, "capacity": 2}, 1], "edges": [[0, 1]]},
          "protocol": {"name": "coin"}}, "capacity rule: node P0"),
        ({**BASE, "protocol": {"name": "teleport", "dst": 4}}, "dst=4"),
        ({**BASE, "scrambling": {"R": 3, "rounds": 1}}, "R=3"),
        ({**BASE, "network": {"nodes": [1, 1, 1], "edges": [[0, 1]]},
          "scrambling": {"R": 0, "rounds": 1, "schedule": [[[1, 2]]]}}, "not a network edge"),
        ({**BASE, "engine": "stabilizer", "scrambling": {"R": 0, "rounds": 1}}, "dense engine"),
        ({**BASE, "network": {"topology": {"kind": "complete", "n": 30}}, "engine": "dense",
          "protocol": {"name": "coin"}}, "engine cap"),
        ({**BASE, "network": {"nodes": [1, 1], "edges": [[0, 0]]}, "protocol": {"name": "coin"}}, "network"),
    ],
)
def test_semantic_errors(doc, needle):
    with pytest.raises(SemanticError, match=needle):
        load_scenario(doc)


def test_auto_engine_choice():
    big = {**BASE, "network": {"topology": {"kind": "complete", "n": 30}}}
    assert load_scenario({**big, "scrambling": {"R": 0, "rounds": 1, "gate_source": "clifford"}}).engine == "stabilizer"
    assert load_scenario({**BASE, "scrambling": {"R": 0, "rounds": 1}}).engine == "dense"


def test_sample_scenarios_validate():
    for p in sorted(SCEN.glob("*.json")):
        assert main(["validate", str(p)]) == EXIT_OK


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(SCEN / "teleport.json"), "--out", str(a)]) == EXIT_OK
    assert main(["run", str(SCEN / "teleport.json"), "--out", str(b)]) == EXIT_OK
    assert _report(a, "teleport") == _report(b, "teleport")
    for suffix in (".dot", ".hasse.dot", ".svg", ".trace.jsonl"):
        assert (a / f"teleport{suffix}").read_text() == (b / f"teleport{suffix}").read_text()


def test_golden_teleport_dot(tmp_path):
    assert main(["run", str(SCEN / "teleport.json"), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "teleport.dot").read_text() == (GOLDEN / "teleport.dot").read_text()


def test_seed_changes_outcomes(tmp_path):
    main(["run", str(SCEN / "teleport.json"), "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["run", str(SCEN / "teleport.json"), "--out", str(tmp_path / "b"), "--seed", "2"])
    ra, rb = _report(tmp_path / "a", "teleport"), _report(tmp_path / "b", "teleport")
    assert ra["seed"] == 1 and rb["seed"] == 2


def test_teleport_report_contents(tmp_path):
    main(["run", str(SCEN / "teleport.json"), "--out", str(tmp_path)])
    r = _report(tmp_path, "teleport")
    assert r["passed"] and r["protocol"]["fidelity"] == pytest.approx(1, abs=1e-12)
    assert r["records"][0]["inequality"]["passed"]
    assert r["resources"]["by_op"]["use"] == {"[c→c]": 2}


def test_scrambling_run_and_exit_codes(tmp_path, monkeypatch):
    assert main(["run", str(SCEN / "scrambling_disconnected.json"), "--out", str(tmp_path)]) == EXIT_CHECKS
    r = _report(tmp_path, "scrambling_disconnected")
    assert not r["cone_coverage"]["covered"] and r["cone_coverage"]["warnings"]
    monkeypatch.setenv("HASSENET_OUT", str(tmp_path / "env"))
    doc = json.loads((SCEN / "scrambling_ring.json").read_text())
    doc["scrambling"]["trials"] = 3
    doc.pop("name")
    path = _write(tmp_path, doc, "ring.json")
    assert main(["run", path]) == EXIT_OK
    r = _report(tmp_path / "env", "ring")
    assert r["conservation_residual"] < 1e-9
    assert r["query_cost"] == "poly(6)"
    assert r["scrambling"]["diameter_lower_bound"] == 1
    assert len(r["decoupling"]["rows"]) == 6


def test_engine_error_exit(tmp_path):
    doc = {**BASE, "network": {"nodes": [1, 1, 1], "edges": [[0, 1], [1, 2]]},
           "protocol": {"name": "teleport", "src": 0, "dst": 2}}
    assert main(["run", _write(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_ENGINE


def test_usage_and_parse_exits(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["run"]) == EXIT_USAGE
    assert main(["validate", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert main(["validate", _write(tmp_path, "{oops")]) == EXIT_USAGE
    assert "1:2" in capsys.readouterr().err
    assert main(["run", str(SCEN / "teleport.json"), "--jobs", "0"]) == EXIT_USAGE
    assert main(["run", str(SCEN / "teleport.json"), "--epsilon", "-1", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["sweep", str(SCEN / "teleport.json")]) == EXIT_USAGE
    assert main(["sweep", str(SCEN / "scrambling_ring.json"), "--sizes", "1,x"]) == EXIT_USAGE
    assert main(["sweep", str(SCEN / "scrambling_ring.json"), "--sizes", "9"]) == EXIT_USAGE


def test_sweep_writes_json_and_csv(tmp_path):
    code = main(["sweep", str(SCEN / "scrambling_ring.json"), "--sizes", "1,3,6", "--trials", "4",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "scrambling_ring.sweep.json").read_text())
    assert [r["n_E"] for r in doc["rows"]] == [1, 3, 6]
    with open(tmp_path / "scrambling_ring.sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["n_E"]) for r in rows] == [1, 3, 6]
    assert float(rows[2]["mean_I"]) == pytest.approx(2)


@pytest.mark.parametrize("proto", [
    {"name": "superdense", "bits": 2},
    {"name": "swap", "nodes": [0, 1, 2], "parallel": True},
    {"name": "distributed_cnot"},
    {"name": "controlled_teleport", "nodes": [0, 1, 2]},
    {"name": "coin", "repeat": 4},
    {"name": "compile", "gate": "haar"},
    {"name": "compile", "gate": "cnot"},
    {"name": "lu", "unitaries": {"0": "H"}},
    {"name": "locc", "script": [{"op": "pair", "nodes": [0, 1], "key": "p"},
                                {"op": "measure", "node": 0, "qubit": "p.0", "key": "m"},
                                {"op": "send", "src": 0, "dst": 1, "keys": ["m"]}]},
])
def test_every_protocol_runs_clean(tmp_path, proto):
    doc = {**BASE, "network": {"nodes": [1, 1, 1], "edges": [[0, 1], [1, 2], [0, 2]]}, "protocol": proto}
    assert main(["run", _write(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_OK


def test_read_scenario_sets_defaults():
    sc = read_scenario(SCEN / "superdense.json")
    assert sc.kind == "protocol" and sc.engine == "dense" and sc.trials == 1
