"""Stabilizer tableau simulation for Clifford-only runs.

The tableau keeps destabilizers and stabilizers (Aaronson-Gottesman layout)
so Z measurements are polynomial. Heavy loops live in ``kernels``.
"""
from __future__ import annotations

from collections import deque
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import BadIndex, BadParams, OverlappingSubsets, TooLarge

MAX_QUBITS = 4096

Gate = tuple[str, tuple[int, ...]]


class StabilizerTableau:
    """n-qubit stabilizer state.

    ``x``/``z`` have shape (2n, n); rows ``0..n-1`` are destabilizers and
    ``n..2n-1`` stabilizers. ``r`` holds the sign bit of each row.
    """

    __slots__ = ("x", "z", "r")

    def __init__(self, x: np.ndarray, z: np.ndarray, r: np.ndarray):
        self.x = x
        self.z = z
        self.r = r

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def copy(self) -> "StabilizerTableau":
        return StabilizerTableau(self.x.copy(), self.z.copy(), self.r.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, StabilizerTableau):
            return NotImplemented
        return (
            np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.r, other.r)
        )

    # in-place operations, used by the protocol engine's hot path

    def gate_(self, gate: str, *qubits: int) -> None:
        code = kernels.GATE_CODES.get(gate.upper())
        if code is None:
            raise BadParams(f"{gate!r} is not a supported Clifford gate")
        n = self.n
        for q in qubits:
            if not 0 <= q < n:
                raise BadIndex(f"qubit {q} outside tableau of {n}")
        if code in kernels.TWO_QUBIT:
            if len(qubits) != 2 or qubits[0] == qubits[1]:
                raise BadIndex(f"{gate} needs two distinct qubits, got {qubits}")
            kernels.apply_gate(self.x, self.z, self.r, code, qubits[0], qubits[1])
        else:
            if len(qubits) != 1:
                raise BadIndex(f"{gate} acts on one qubit, got {qubits}")
            kernels.apply_gate(self.x, self.z, self.r, code, qubits[0], -1)

    def program_(self, gates: Sequence[Gate], qubit_map: Sequence[int] | None = None) -> None:
        """Apply a gate list; ``qubit_map`` translates local to global indices."""
        ops = compile_program(gates, qubit_map)
        if ops.size:
            if ops[:, 1:].max() >= self.n:
                raise BadIndex("gate list addresses a qubit outside the tableau")
            kernels.apply_program(self.x, self.z, self.r, ops)

    def measure_(self, q: int, rng: np.random.Generator) -> int:
        if not 0 <= q < self.n:
            raise BadIndex(f"qubit {q} outside tableau of {self.n}")
        outcome, _ = kernels.measure_z(self.x, self.z, self.r, q, int(rng.integers(2)))
        return outcome

    def extend_(self, k: int = 1) -> list[int]:
        """Append ``k`` fresh |0> qubits; returns their indices."""
        n = self.n
        m = n + k
        if m > MAX_QUBITS:
            raise TooLarge(f"{m} qubits exceeds the tableau cap of {MAX_QUBITS}")
        x = np.zeros((2 * m, m), dtype=np.uint8)
        z = np.zeros((2 * m, m), dtype=np.uint8)
        r = np.zeros(2 * m, dtype=np.uint8)
        x[:n, :n] = self.x[:n]
        z[:n, :n] = self.z[:n]
        r[:n] = self.r[:n]
        x[m:m + n, :n] = self.x[n:]
        z[m:m + n, :n] = self.z[n:]
        r[m:m + n] = self.r[n:]
        for j in range(n, m):
            x[j, j] = 1
            z[m + j, j] = 1
        self.x, self.z, self.r = x, z, r
        return list(range(n, m))

    # inspection

    def stabilizers(self) -> list[str]:
        """Stabilizer generators as signed Pauli strings, qubit 0 leftmost."""
        n = self.n
        out = []
        for i in range(n, 2 * n):
            s = "".join("IXZY"[self.x[i, j] + 2 * self.z[i, j]] for j in range(n))
            out.append(("-" if self.r[i] else "+") + s)
        return out

    def is_valid(self) -> bool:
        """Generators commute, destabilizers pair up, full rank."""
        n = self.n
        x = self.x.astype(np.int64)
        z = self.z.astype(np.int64)
        sym = (x @ z.T + z @ x.T) % 2
        expect = np.zeros((2 * n, 2 * n), dtype=np.int64)
        expect[:n, n:] = np.eye(n, dtype=np.int64)
        expect[n:, :n] = np.eye(n, dtype=np.int64)
        # destabilizers among themselves may anticommute only via the pairing
        ok_stab = not sym[n:, n:].any()
        ok_pair = np.array_equal(sym[:n, n:], expect[:n, n:])
        full = kernels.gf2_rank(np.hstack([self.x[n:], self.z[n:]])) == n
        return bool(ok_stab and ok_pair and full)


def compile_program(gates: Sequence[Gate], qubit_map: Sequence[int] | None = None) -> np.ndarray:
    ops = np.zeros((len(gates), 3), dtype=np.int32)
    for k, (name, qs) in enumerate(gates):
        code = kernels.GATE_CODES.get(name.upper())
        if code is None:
            raise BadParams(f"{name!r} is not a supported Clifford gate")
        if qubit_map is not None:
            qs = tuple(qubit_map[q] for q in qs)
        ops[k, 0] = code
        ops[k, 1] = qs[0]
        ops[k, 2] = qs[1] if len(qs) > 1 else -1
    return ops


def init_tableau(n: int) -> StabilizerTableau:
    """|0...0>: destabilizers X_i, stabilizers Z_i."""
    if n < 1:
        raise BadParams(f"tableau needs at least one qubit, got {n}")
    if n > MAX_QUBITS:
        raise TooLarge(f"{n} qubits exceeds the tableau cap of {MAX_QUBITS}")
    x = np.zeros((2 * n, n), dtype=np.uint8)
    z = np.zeros((2 * n, n), dtype=np.uint8)
    x[np.arange(n), np.arange(n)] = 1
    z[n + np.arange(n), np.arange(n)] = 1
    return StabilizerTableau(x, z, np.zeros(2 * n, dtype=np.uint8))


def apply_clifford(tab: StabilizerTableau, gate: str, qubits: Sequence[int]) -> StabilizerTableau:
    out = tab.copy()
    out.gate_(gate, *qubits)
    return out


def measure_z_stab(tab: StabilizerTableau, qubit: int, rng: np.random.Generator) -> tuple[int, StabilizerTableau]:
    out = tab.copy()
    return out.measure_(qubit, rng), out


def subset_entropy(tab: StabilizerTableau, subset: Iterable[int]) -> int:
    """S(A) = rank of the stabilizers restricted to A, minus |A|."""
    a = sorted(set(int(q) for q in subset))
    if not a:
        return 0
    n = tab.n
    for q in a:
        if not 0 <= q < n:
            raise BadIndex(f"qubit {q} outside tableau of {n}")
    sub = np.hstack([tab.x[n:, a], tab.z[n:, a]])
    return kernels.gf2_rank(sub) - len(a)


def mutual_information_stab(tab: StabilizerTableau, a: Iterable[int], b: Iterable[int]) -> int:
    a = set(a)
    b = set(b)
    if a & b:
        raise OverlappingSubsets(f"subsets overlap on {sorted(a & b)}")
    return subset_entropy(tab, a) + subset_entropy(tab, b) - subset_entropy(tab, a | b)


def deviation_from_entropy(s: float, k: int) -> float:
    """``||rho - I/d||_1`` for a stabilizer reduced state on k qubits with entropy s.

    Such a state is uniform on 2^s eigenvalues, so the distance is closed form.
    """
    if k == 0:
        return 0.0
    return 2.0 * (1.0 - 2.0 ** (s - k))


# ---------------------------------------------------------------- two-qubit Cliffords

_GENERATORS: tuple[Gate, ...] = (
    ("H", (0,)), ("H", (1,)), ("S", (0,)), ("S", (1,)), ("CNOT", (0, 1)),
)


@lru_cache(maxsize=1)
def two_qubit_clifford_table() -> tuple[tuple[Gate, ...], ...]:
    """Every element of the two-qubit Clifford group (mod phase) as a gate word.

    Breadth-first search from the identity over {H, S, CNOT}; the tableau
    with signs is the group element's key, so the table has 11520 entries.
    """
    start = init_tableau(2)

    def key(t: StabilizerTableau) -> bytes:
        return t.x.tobytes() + t.z.tobytes() + t.r.tobytes()

    seen = {key(start): ()}
    queue = deque([(start, ())])
    while queue:
        tab, word = queue.popleft()
        for g in _GENERATORS:
            nxt = tab.copy()
            nxt.gate_(g[0], *g[1])
            k = key(nxt)
            if k not in seen:
                w = word + (g,)
                seen[k] = w
                queue.append((nxt, w))
    return tuple(seen.values())


@lru_cache(maxsize=1)
def _single_qubit_words() -> tuple[tuple[Gate, ...], ...]:
    # shortest words of C (x) I never touch qubit 1: the 24 one-qubit Cliffords
    return tuple(w for w in two_qubit_clifford_table() if all(qs == (0,) for _, qs in w))


def random_two_qubit_clifford(rng: np.random.Generator) -> list[Gate]:
    """Uniform sample from the 11520-element two-qubit Clifford group."""
    table = two_qubit_clifford_table()
    return list(table[int(rng.integers(len(table)))])


def random_clifford_circuit(k: int, rng: np.random.Generator, layers: int | None = None) -> list[Gate]:
    """Random Clifford on k qubits built from uniform two-qubit Cliffords.

    Exactly one uniform two-qubit Clifford when k == 2.
    """
    if k < 1:
        return []
    if k == 1:
        table = _single_qubit_words()
        return list(table[int(rng.integers(len(table)))])
    if k == 2:
        return random_two_qubit_clifford(rng)
    layers = 2 * k if layers is None else layers
    gates: list[Gate] = []
    for _ in range(layers):
        perm = rng.permutation(k)
        for j in range(0, k - 1, 2):
            a, b = int(perm[j]), int(perm[j + 1])
            for name, qs in random_two_qubit_clifford(rng):
                gates.append((name, tuple(a if q == 0 else b for q in qs)))
    return gates
