from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hassenet.errors import BadParams, ScheduleDisconnected, SubsetTooLarge
from hassenet.network import build_network, generate_topology
from hassenet.scrambling import (
    DATA_CENTER,
    R_PRIME,
    ScramblingScenario,
    build_schedule,
    conservation_check,
    data_center_summary,
    decoupling_bound,
    decoupling_deviation,
    mutual_info,
    query_cost_estimate,
    run_scrambling,
    sample_decoupling,
    schedule_reach,
    scrambling_summary,
    threshold_sweep,
)


def _complete(n, qubits=1):
    return generate_topology("complete", qubits=qubits, n=n)


def test_bound_closed_form():
    # direct evaluation with dimensions d = 2^qubits
    for ne, nb in [(1, 1), (2, 4), (1, 11), (3, 3), (6, 0)]:
        de, db = 2**ne, 2**nb
        assert decoupling_bound(ne, nb) == pytest.approx(math.sqrt((de * de - 1) / (de * db + 1)))
    assert decoupling_bound(2, 4) == pytest.approx(0.48038, abs=1e-5)
    assert decoupling_bound(1, 11) == pytest.approx(0.0271, abs=1e-4)
    assert decoupling_bound(0, 5) == 0.0
    with pytest.raises(BadParams):
        decoupling_bound(-1, 2)


def test_bound_at_large_sizes_approaches_power_law():
    assert decoupling_bound(300, 700) == pytest.approx(2.0 ** -200, rel=1e-9)
    assert decoupling_bound(700, 300) == pytest.approx(2.0 ** 200, rel=1e-9)


def test_bound_is_two_to_minus_five_only_asymptotically():
    # 2^-(n_B - n_E)/2 is the large-d limit; at n_E=1, n_B=11 the exact value is a bit below it
    assert decoupling_bound(1, 11) < 2.0 ** -5
    assert decoupling_bound(1, 11) == pytest.approx(2.0 ** -5, rel=0.14)


@given(st.integers(2, 8), st.integers(1, 8), st.integers(0, 2**32 - 1),
       st.sampled_from(["sweep", "random_edge_matching"]))
@settings(max_examples=40, deadline=None)
def test_schedules_are_matchings(n, rounds, seed, policy):
    net = _complete(n)
    sched = build_schedule(net, rounds, policy, np.random.default_rng(seed))
    assert len(sched) == rounds
    for rnd in sched:
        nodes = [v for e in rnd for v in e]
        assert len(nodes) == len(set(nodes))
        assert all(net.has_edge(a, b) for a, b in rnd)
        # greedy maximal matching on a complete graph leaves at most one node idle
        if policy == "random_edge_matching":
            assert len(rnd) == n // 2


def test_sweep_cycles_through_edges():
    net = generate_topology("path", n=4)
    assert build_schedule(net, 3) == [[(0, 1)], [(1, 2)], [(2, 3), (0, 1)]]


def test_schedule_reach_respects_time():
    assert schedule_reach([[(2, 3)], [(1, 2)], [(0, 1)]], 0) == {0, 1}
    assert schedule_reach([[(0, 1)], [(1, 2)], [(2, 3)]], 0) == {0, 1, 2, 3}


def test_scenario_validation():
    net = generate_topology("path", n=3)
    with pytest.raises(BadParams):
        ScramblingScenario(net, R=5)
    with pytest.raises(BadParams):
        ScramblingScenario(net, engine="stabilizer")
    with pytest.raises(BadParams):
        ScramblingScenario(net, schedule=(((0, 2),),))
    with pytest.raises(BadParams):
        ScramblingScenario(_complete(3), schedule=(((0, 1), (1, 2)),))
    with pytest.raises(BadParams):
        ScramblingScenario(net, D_size=3)
    with pytest.raises(BadParams):
        ScramblingScenario(net, gate_source="lava")


def test_register_roles():
    sc = ScramblingScenario(build_network([1, 2, 1], [(0, 1), (1, 2)]), R=1, D_size=1, rounds=2)
    assert sc.r_qubits() == [1, 2] and sc.va_qubits() == [0, 3]
    assert sc.d_targets() == [0] and sc.R_size == 2
    run = run_scrambling(sc, 0).run
    assert run.reserved(R_PRIME) == [4, 5] and run.reserved(DATA_CENTER) == [6]


def test_identity_gates_keep_the_secret_at_R():
    sc = ScramblingScenario(_complete(4), rounds=3, gate_source="identity", seed=1)
    res = run_scrambling(sc)
    rp = res.run.reserved(R_PRIME)
    assert mutual_info(res, rp, [0]) == pytest.approx(2)
    assert mutual_info(res, rp, [1, 2, 3]) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("engine, source", [("dense", "haar"), ("stabilizer", "clifford"), ("dense", "t_doped")])
def test_cone_covers_connected_schedules(engine, source):
    sc = ScramblingScenario(generate_topology("ring", n=5), rounds=6, gate_source=source, engine=engine,
                            t_count=2, seed=3)
    res = run_scrambling(sc)
    assert res.covered and res.reached == set(range(5)) and not res.warnings
    if source == "t_doped":
        assert res.t_used == 2


def test_disconnected_schedule_warns():
    net = generate_topology("path", n=4)
    sc = ScramblingScenario(net, schedule=(((2, 3),),), seed=0)
    with pytest.warns(ScheduleDisconnected):
        res = run_scrambling(sc)
    assert not res.covered and res.cone_nodes == {0}


def test_unrecorded_scramble_matches_recorded():
    sc = ScramblingScenario(_complete(4), rounds=4, schedule_policy="random_edge_matching", seed=9)
    a = run_scrambling(sc, 9)
    b = run_scrambling(sc, 9, record=False)
    assert np.array_equal(a.run.backend.vec, b.run.backend.vec)
    assert a.cone_nodes == b.cone_nodes


@pytest.mark.parametrize("d_size", [0, 1, 2, 3])
def test_conservation_identity(d_size):
    sc = ScramblingScenario(_complete(6), D_size=d_size, rounds=6, schedule_policy="random_edge_matching")
    for seed in range(3):
        run = run_scrambling(sc, seed, record=False).run
        res = conservation_check(run, run.reserved(R_PRIME), run.reserved(DATA_CENTER), range(sc.n))
        assert res < 1e-9


@pytest.mark.filterwarnings("ignore::hassenet.errors.ScheduleDisconnected")
def test_deviation_limits():
    sc = ScramblingScenario(_complete(4), rounds=1, seed=0)
    res = run_scrambling(sc)
    assert decoupling_deviation(res, []) == 0.0
    big = ScramblingScenario(_complete(14), rounds=1, gate_source="identity")
    with pytest.raises(SubsetTooLarge):
        decoupling_deviation(run_scrambling(big, 0, record=False), range(13))


def test_sampling_is_deterministic_and_job_independent():
    sc = ScramblingScenario(_complete(4), rounds=4, schedule_policy="random_edge_matching", seed=5)
    a = sample_decoupling(sc, [1, 2], trials=4, seed=5)
    b = sample_decoupling(sc, [1, 2], trials=4, seed=5)
    c = sample_decoupling(sc, [1, 2], trials=4, seed=5, jobs=2)
    assert a.to_dict() == b.to_dict() == c.to_dict()
    assert a.row(2).n_b == 2
    with pytest.raises(KeyError):
        a.row(9)
    with pytest.raises(BadParams):
        sample_decoupling(sc, [5], trials=2)
    with pytest.raises(BadParams):
        sample_decoupling(sc, [1], trials=0)


def test_single_trial_has_no_stderr():
    sc = ScramblingScenario(_complete(3), rounds=2, seed=1)
    row = sample_decoupling(sc, [1], trials=1).rows[0]
    assert row.stderr_deviation is None and row.stderr_mi is None


def test_threshold_sweep_reaches_full_information():
    sc = ScramblingScenario(_complete(4), rounds=8, schedule_policy="random_edge_matching", seed=2)
    rep = threshold_sweep(sc, trials=10)
    assert [r.n_e for r in rep.rows] == [1, 2, 3, 4]
    assert rep.row(4).mean_mi == pytest.approx(2)
    assert rep.monotone(2.0)


def test_node_granularity_picks_whole_nodes():
    sc = ScramblingScenario(_complete(3, qubits=2), rounds=3, granularity="node", seed=3)
    rep = sample_decoupling(sc, [1, 2], trials=3)
    assert [r.n_e for r in rep.rows] == [2, 4]


def test_data_center_summary_flags():
    sc = ScramblingScenario(_complete(5), D_size=3, rounds=4, schedule_policy="random_edge_matching", seed=4)
    s = data_center_summary(sc, trials=3)
    assert s["qubit_threshold_met"] and s["node_threshold_met"]
    assert s["purified_nodes"] == 3
    # I(R':V) stays at its initial value: scrambling inside V cannot change it
    assert s["mean_I_V"] == pytest.approx(2)
    assert s["mean_I_D"] == pytest.approx(0, abs=0.5)


def test_summary_and_query_cost():
    sc = ScramblingScenario(generate_topology("path", n=5), rounds=2)
    s = scrambling_summary(sc)
    assert s["diameter_lower_bound"] == 4 and s["n"] == 5
    assert query_cost_estimate(8) == "poly(8)"
    assert query_cost_estimate(8, 3) == "poly(8)·exp(3)"
    assert query_cost_estimate([("H", (0,)), ("T", (1,)), ("T", (0,))]) == "poly(3)·exp(2)"
