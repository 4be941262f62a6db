from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hassenet import dense
from hassenet.errors import BadParams, TooLarge
from hassenet.stabilizer import (
    MAX_QUBITS,
    apply_clifford,
    deviation_from_entropy,
    init_tableau,
    measure_z_stab,
    mutual_information_stab,
    random_clifford_circuit,
    random_two_qubit_clifford,
    subset_entropy,
    two_qubit_clifford_table,
)

OMEGA = np.block([[np.zeros((2, 2), int), np.eye(2, dtype=int)], [np.eye(2, dtype=int), np.zeros((2, 2), int)]])


def _dense_run(n, gates):
    vec = dense.zero_state(n)
    for g, qs in gates:
        vec = dense.apply_matrix(vec, dense.GATES[g], list(qs))
    return dense.PureState(vec)


def _tab_run(n, gates):
    tab = init_tableau(n)
    tab.program_(gates)
    return tab


def _symplectic(tab) -> bytes:
    return np.hstack([tab.x, tab.z]).astype(np.uint8).tobytes()


def _sp4_oracle() -> set[bytes]:
    """All 4x4 matrices over GF(2) preserving the symplectic form, by exhaustion."""
    bits = (np.arange(2**16)[:, None] >> np.arange(16)) & 1
    ms = bits.reshape(-1, 4, 4)
    prod = np.einsum("nij,jk,nlk->nil", ms, OMEGA, ms) % 2
    keep = ms[(prod == OMEGA).all(axis=(1, 2))]
    return {m.astype(np.uint8).tobytes() for m in keep}


def test_initial_tableau_stabilizes_zero():
    t = init_tableau(3)
    assert t.stabilizers() == ["+ZII", "+IZI", "+IIZ"]
    assert t.is_valid()


@pytest.mark.parametrize("n", [0, MAX_QUBITS + 1])
def test_tableau_size_limits(n):
    with pytest.raises((BadParams, TooLarge)):
        init_tableau(n)


def test_bell_pair_entropies():
    t = _tab_run(2, [("H", (0,)), ("CNOT", (0, 1))])
    assert subset_entropy(t, [0]) == 1
    assert subset_entropy(t, [0, 1]) == 0
    assert mutual_information_stab(t, [0], [1]) == 2


def test_unknown_gate_rejected():
    with pytest.raises(BadParams):
        apply_clifford(init_tableau(1), "T", [0])


def test_deterministic_and_random_measurements():
    rng = np.random.default_rng(1)
    bit, _ = measure_z_stab(_tab_run(1, [("X", (0,))]), 0, rng)
    assert bit == 1
    outs = [measure_z_stab(_tab_run(1, [("H", (0,))]), 0, rng)[0] for _ in range(400)]
    assert 140 < sum(outs) < 260


def test_bell_measurements_are_correlated():
    rng = np.random.default_rng(2)
    for _ in range(50):
        t = _tab_run(2, [("H", (0,)), ("CNOT", (0, 1))])
        a = t.measure_(0, rng)
        assert t.measure_(1, rng) == a


def test_deviation_from_entropy_values():
    # maximally mixed subset: zero deviation; pure: 2(1 - 2^-k)
    assert deviation_from_entropy(3, 3) == 0.0
    assert deviation_from_entropy(0, 1) == pytest.approx(1.0)
    assert deviation_from_entropy(0, 3) == pytest.approx(1.75)
    rho = dense.partial_trace(_dense_run(3, [("H", (0,)), ("CNOT", (0, 1))]), [0, 2])
    assert dense.deviation_from_mixed(rho) == pytest.approx(deviation_from_entropy(1, 2))


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_random_circuits_keep_a_valid_tableau(n, seed):
    t = _tab_run(n, random_clifford_circuit(n, np.random.default_rng(seed)))
    assert t.is_valid()
    assert subset_entropy(t, range(n)) == 0


@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_subset_entropy_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    gates = random_clifford_circuit(n, rng)
    psi, tab = _dense_run(n, gates), _tab_run(n, gates)
    for _ in range(4):
        k = int(rng.integers(1, n + 1))
        sub = sorted(rng.choice(n, k, replace=False).tolist())
        assert subset_entropy(tab, sub) == pytest.approx(dense.subset_entropy(psi, sub), abs=1e-9)


def test_extend_appends_fresh_zero_qubits():
    t = _tab_run(2, [("H", (0,)), ("CNOT", (0, 1))])
    new = t.extend_(2)
    assert new == [2, 3]
    assert t.n == 4 and t.is_valid()
    assert subset_entropy(t, [2, 3]) == 0
    assert subset_entropy(t, [0]) == 1


def test_two_qubit_table_is_the_whole_group():
    table = two_qubit_clifford_table()
    assert len(table) == 11520
    images = Counter(_symplectic(_tab_run(2, w)) for w in table)
    sp4 = _sp4_oracle()
    assert len(sp4) == 720
    assert set(images) == sp4
    assert set(images.values()) == {16}


def test_two_qubit_sampler_is_uniform_over_symplectic_classes():
    # each word's class is computed once by simulation, then looked up per draw
    cls = {w: _symplectic(_tab_run(2, w)) for w in two_qubit_clifford_table()}
    rng = np.random.default_rng(3)
    draws = 11520 * 20
    counts = Counter(cls[tuple(random_two_qubit_clifford(rng))] for _ in range(draws))
    assert set(counts) == _sp4_oracle()
    expected = draws / 720
    sigma = np.sqrt(expected * (1 - 1 / 720))
    assert max(abs(c - expected) for c in counts.values()) < 5 * sigma


def test_random_one_qubit_clifford_has_24_elements():
    rng = np.random.default_rng(4)
    keys = set()
    for _ in range(2000):
        t = _tab_run(1, random_clifford_circuit(1, rng))
        keys.add(t.x.tobytes() + t.z.tobytes() + t.r.tobytes())
    assert len(keys) == 24
