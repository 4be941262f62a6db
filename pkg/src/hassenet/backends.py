"""State backends driven by the protocol engine.

Both expose the same small mutable interface (gate, program, measure, grow,
depolarize, entropy) so a run can switch engines without branching.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import dense, kernels
from .dense import MAX_PURE_QUBITS, MixedState, PureState
from .errors import BadParams, TooLarge
from .stabilizer import Gate, StabilizerTableau, deviation_from_entropy, init_tableau
from .stabilizer import subset_entropy as stab_entropy

_PAULIS = ("X", "Y", "Z")


class DenseBackend:
    kind = "dense"

    def __init__(self, n: int):
        if n > MAX_PURE_QUBITS:
            raise TooLarge(f"{n} qubits exceeds the statevector cap of {MAX_PURE_QUBITS}")
        self.vec = dense.zero_state(n)

    @property
    def n(self) -> int:
        return int(self.vec.size).bit_length() - 1

    def grow(self, k: int = 1) -> list[int]:
        n = self.n
        if n + k > MAX_PURE_QUBITS:
            raise TooLarge(f"{n + k} qubits exceeds the statevector cap of {MAX_PURE_QUBITS}")
        # new qubits are the high bits, all |0>
        out = np.zeros(self.vec.size << k, dtype=complex)
        out[: self.vec.size] = self.vec
        self.vec = out
        return list(range(n, n + k))

    def gate(self, name: str, *qs: int) -> None:
        name = name.upper()
        if name == "X":
            v = self.vec.reshape(-1, 2, 1 << qs[0])
            v[:, [0, 1], :] = v[:, [1, 0], :]
        elif name == "Z":
            self.vec.reshape(-1, 2, 1 << qs[0])[:, 1, :] *= -1
        elif name == "H":
            v = self.vec.reshape(-1, 2, 1 << qs[0])
            a = v[:, 0, :].copy()
            b = v[:, 1, :]
            v[:, 0, :] = (a + b) * dense._SQ2
            v[:, 1, :] = (a - b) * dense._SQ2
        else:
            self.vec = dense.apply_matrix(self.vec, dense.GATES[name], qs)

    def unitary(self, matrix: np.ndarray, qs: Sequence[int]) -> None:
        self.vec = dense.apply_matrix(self.vec, np.asarray(matrix, dtype=complex), list(qs))

    def program(self, gates: Sequence[Gate], qubit_map: Sequence[int]) -> None:
        for name, local in gates:
            self.gate(name, *(qubit_map[q] for q in local))

    def measure(self, q: int, rng: np.random.Generator) -> int:
        p1 = dense.prob_one(self.vec, q)
        outcome = int(rng.random() < p1)
        v = self.vec.reshape(-1, 2, 1 << q)
        v[:, 1 - outcome, :] = 0
        self.vec /= np.linalg.norm(self.vec)
        return outcome

    def depolarize(self, q: int, p: float, rng: np.random.Generator) -> str:
        """With probability p apply a uniform Pauli (I, X, Y or Z): rho -> (1-p) rho + p I/2."""
        if p <= 0 or rng.random() >= p:
            return "I"
        pauli = ("I",) + _PAULIS
        choice = pauli[int(rng.integers(4))]
        if choice != "I":
            self.gate(choice, q)
        return choice

    def reduced(self, qs: Sequence[int]) -> MixedState:
        return dense.partial_trace(PureState(self.vec), qs)

    def entropy(self, qs: Sequence[int]) -> float:
        return dense.subset_entropy(PureState(self.vec), qs)

    def deviation(self, qs: Sequence[int]) -> float:
        return dense.deviation_from_mixed(self.reduced(qs))

    def snapshot(self) -> PureState:
        return PureState(self.vec.copy())


class StabilizerBackend:
    kind = "stabilizer"

    def __init__(self, n: int):
        self.tab = init_tableau(n)

    @property
    def n(self) -> int:
        return self.tab.n

    def grow(self, k: int = 1) -> list[int]:
        return self.tab.extend_(k)

    def gate(self, name: str, *qs: int) -> None:
        code = kernels.GATE_CODES.get(name)
        t = self.tab
        if code is None or max(qs) >= t.n:
            t.gate_(name, *qs)  # slow path validates and raises
        elif len(qs) == 2 and code in kernels.TWO_QUBIT and qs[0] != qs[1]:
            kernels.apply_gate(t.x, t.z, t.r, code, qs[0], qs[1])
        elif len(qs) == 1 and code not in kernels.TWO_QUBIT:
            kernels.apply_gate(t.x, t.z, t.r, code, qs[0], -1)
        else:
            t.gate_(name, *qs)

    def unitary(self, matrix, qs) -> None:
        raise BadParams("the stabilizer engine only runs Clifford gate lists")

    def program(self, gates: Sequence[Gate], qubit_map: Sequence[int]) -> None:
        self.tab.program_(gates, qubit_map)

    def measure(self, q: int, rng: np.random.Generator) -> int:
        return self.tab.measure_(q, rng)

    def depolarize(self, q: int, p: float, rng: np.random.Generator) -> str:
        if p <= 0 or rng.random() >= p:
            return "I"
        choice = ("I",) + _PAULIS
        c = choice[int(rng.integers(4))]
        if c != "I":
            self.gate(c, q)
        return c

    def reduced(self, qs):
        raise BadParams("reduced density matrices need the dense engine")

    def entropy(self, qs: Sequence[int]) -> float:
        return float(stab_entropy(self.tab, qs))

    def deviation(self, qs: Sequence[int]) -> float:
        return deviation_from_entropy(self.entropy(qs), len(set(qs)))

    def snapshot(self) -> StabilizerTableau:
        return self.tab.copy()


def make_backend(engine: str, n: int):
    if engine == "dense":
        return DenseBackend(n)
    if engine == "stabilizer":
        return StabilizerBackend(n)
    raise BadParams(f"unknown engine {engine!r}")
