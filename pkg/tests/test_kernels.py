from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hassenet import kernels
from hassenet.stabilizer import compile_program, init_tableau, random_clifford_circuit

from conftest import BACKENDS


def _rank_by_span(m: np.ndarray) -> int:
    # brute force: the row span of a rank-r matrix has 2^r elements
    rows = [int("".join(map(str, r)), 2) for r in m]
    span = {0}
    for r in rows:
        span |= {s ^ r for s in span}
    return len(span).bit_length() - 1


@given(st.integers(1, 7), st.integers(1, 9), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_gf2_rank_matches_span_count(rows, cols, seed):
    m = np.random.default_rng(seed).integers(0, 2, (rows, cols), dtype=np.uint8)
    want = _rank_by_span(m)
    for name in BACKENDS:
        assert kernels.load(name).gf2_rank(m) == want


def test_gf2_rank_edge_cases(kmod):
    assert kmod.gf2_rank(np.zeros((0, 4), dtype=np.uint8)) == 0
    assert kmod.gf2_rank(np.zeros((3, 3), dtype=np.uint8)) == 0
    assert kmod.gf2_rank(np.eye(70, dtype=np.uint8)) == 70


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
@pytest.mark.parametrize("n", [1, 2, 5, 33])
def test_backends_agree_on_programs_and_measurements(n):
    rng = np.random.default_rng(n)
    py, cy = kernels.load("python"), kernels.load("cython")
    for trial in range(5):
        ops = np.array(
            [(int(rng.integers(9)) if n > 1 else int(rng.integers(6)), *sorted(rng.choice(n, 2, replace=False)))
             if n > 1 else (int(rng.integers(6)), 0, -1) for _ in range(200)],
            dtype=np.int32,
        )
        ops[ops[:, 0] < kernels.CNOT, 2] = -1
        a, b = init_tableau(n), init_tableau(n)
        py.apply_program(a.x, a.z, a.r, ops)
        cy.apply_program(b.x, b.z, b.r, ops)
        assert a == b
        for q in range(n):
            bit = int(rng.integers(2))
            assert py.measure_z(a.x, a.z, a.r, q, bit) == cy.measure_z(b.x, b.z, b.r, q, bit)
            assert a == b


def test_single_gate_dispatch_matches_program(kmod):
    n = 3
    for code, a, b in itertools.product(range(9), range(n), range(n)):
        two = code in kernels.TWO_QUBIT
        if two == (a == b) or (not two and b != 0):
            continue
        t1, t2 = init_tableau(n), init_tableau(n)
        for t in (t1, t2):
            kmod.apply_gate(t.x, t.z, t.r, kernels.H, 0)
            kmod.apply_gate(t.x, t.z, t.r, kernels.S, 1)
        kmod.apply_gate(t1.x, t1.z, t1.r, code, a, b if two else -1)
        kmod.apply_program(t2.x, t2.z, t2.r, np.array([[code, a, b if two else -1]], dtype=np.int32))
        assert t1 == t2


def test_dispatch_reports_backend():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.load("python").__name__.endswith("_kernels_py")
