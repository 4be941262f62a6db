"""Exact statevector and reduced-density-matrix routines.

Qubit ordering is little-endian: global qubit ``q`` is bit ``q`` of the
basis-state index. Entropies are in bits. Norms follow the trace-norm
convention ``||M||_1 = Tr sqrt(M^dagger M)``, so two states are at most 2 apart.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadAmplitudes,
    BadCut,
    BadIndex,
    DimensionMismatch,
    OverlappingSubsets,
    QubitNotFresh,
    SubsetMismatch,
    SubsetTooLarge,
    TooLarge,
)

MAX_PURE_QUBITS = 24
MAX_DENSITY_QUBITS = 12
EIG_CLIP = 1e-12
NORM_TOL = 1e-10

_SQ2 = 1 / np.sqrt(2)
GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "S": np.diag([1, 1j]),
    "SDG": np.diag([1, -1j]),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
}
# two-qubit matrices act on (first, second) with ``first`` as the low bit
GATES["CNOT"] = np.array(
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
)
GATES["CX"] = GATES["CNOT"]
GATES["CZ"] = np.diag([1, 1, 1, -1]).astype(complex)
GATES["SWAP"] = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


@dataclass(frozen=True)
class QubitRegister:
    """Bijection between (node, local index) and global qubit index."""

    slots: tuple[tuple[int, int], ...]
    reserved: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def for_network(cls, node_qubits: Sequence[int], extras: Mapping[str, int] | None = None) -> "QubitRegister":
        """Network qubits by (node, local) ascending, then reserved systems.

        ``extras`` maps a label such as ``"R'"`` or ``"D"`` to its qubit count;
        each gets the next free node id.
        """
        slots = [(node, j) for node, k in enumerate(node_qubits) for j in range(k)]
        reserved = {}
        next_id = len(node_qubits)
        for label, k in (extras or {}).items():
            reserved[label] = next_id
            slots.extend((next_id, j) for j in range(k))
            next_id += 1
        return cls(tuple(slots), reserved)

    @property
    def n(self) -> int:
        return len(self.slots)

    def index(self, node: int, local: int) -> int:
        try:
            return self.slots.index((node, local))
        except ValueError:
            raise BadIndex(f"no qubit ({node}, {local}) in register") from None

    def qubits_of(self, node: int) -> list[int]:
        return [q for q, (nd, _) in enumerate(self.slots) if nd == node]

    def reserved_qubits(self, label: str) -> list[int]:
        if label not in self.reserved:
            return []
        return self.qubits_of(self.reserved[label])

    def owner(self, q: int) -> int:
        return self.slots[q][0]


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    register: QubitRegister | None = None

    @property
    def n(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class MixedState:
    rho: np.ndarray
    subset: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.subset)


@dataclass(frozen=True)
class Unitary:
    matrix: np.ndarray
    qubits: tuple[int, ...]

    def __post_init__(self):
        d = 2 ** len(self.qubits)
        if self.matrix.shape != (d, d):
            raise DimensionMismatch(
                f"matrix of shape {self.matrix.shape} cannot act on {len(self.qubits)} qubits"
            )

    def is_unitary(self, tol: float = NORM_TOL) -> bool:
        m = self.matrix
        return bool(np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=tol))

    def dagger(self) -> "Unitary":
        return Unitary(self.matrix.conj().T, self.qubits)


# ---------------------------------------------------------------- helpers


def _n_of(vec: np.ndarray) -> int:
    return int(vec.size).bit_length() - 1


def _check_qubits(qubits: Iterable[int], n: int) -> list[int]:
    qs = [int(q) for q in qubits]
    if len(set(qs)) != len(qs):
        raise BadIndex(f"repeated qubit in {qs}")
    for q in qs:
        if not 0 <= q < n:
            raise BadIndex(f"qubit {q} outside register of {n}")
    return qs


def apply_matrix(vec: np.ndarray, matrix: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Return ``matrix`` applied to ``qubits`` of a raw amplitude vector.

    ``qubits[0]`` is the low bit of the matrix index.
    """
    n = _n_of(vec)
    k = len(qubits)
    if matrix.shape != (2 ** k, 2 ** k):
        raise DimensionMismatch(f"{matrix.shape} matrix on {k} qubits")
    axes = [n - 1 - q for q in reversed(qubits)]
    psi = vec.reshape((2,) * n)
    ut = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(ut, psi, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return np.ascontiguousarray(out).reshape(-1)


def _bit_view(vec: np.ndarray, q: int) -> np.ndarray:
    """View of shape (high, 2, low) whose middle axis is qubit ``q``."""
    return vec.reshape(-1, 2, 1 << q)


# ---------------------------------------------------------------- states


def _amplitudes_for(a) -> np.ndarray:
    if isinstance(a, str):
        table = {
            "0": [1, 0],
            "1": [0, 1],
            "+": [_SQ2, _SQ2],
            "-": [_SQ2, -_SQ2],
        }
        if a not in table:
            raise BadAmplitudes(f"unknown single-qubit label {a!r}")
        return np.array(table[a], dtype=complex)
    amp = np.asarray(a, dtype=complex)
    if amp.shape != (2,):
        raise BadAmplitudes(f"single-qubit amplitudes need length 2, got {amp.shape}")
    if abs(np.linalg.norm(amp) - 1) > NORM_TOL:
        raise BadAmplitudes(f"amplitudes {amp} are not normalized")
    return amp


def init_product_state(register: QubitRegister | int, assignments: Sequence | None = None) -> PureState:
    """Product state with one entry per qubit: '0', '1', '+', '-' or (a, b)."""
    reg = register if isinstance(register, QubitRegister) else None
    n = reg.n if reg is not None else int(register)
    if n > MAX_PURE_QUBITS:
        raise TooLarge(f"{n} qubits exceeds the statevector cap of {MAX_PURE_QUBITS}")
    if assignments is None:
        assignments = ["0"] * n
    if len(assignments) != n:
        raise BadAmplitudes(f"{len(assignments)} assignments for {n} qubits")
    vec = np.ones(1, dtype=complex)
    # little-endian: qubit 0 is the fastest-varying index
    for a in assignments:
        vec = np.kron(_amplitudes_for(a), vec)
    return PureState(vec, reg)


def zero_state(n: int) -> np.ndarray:
    vec = np.zeros(2 ** n, dtype=complex)
    vec[0] = 1
    return vec


def prepare(state: PureState, qubits: Sequence[int], target: np.ndarray) -> PureState:
    """Replace fresh |0...0> qubits by the k-qubit state ``target``."""
    vec = state.amplitudes
    n = _n_of(vec)
    qs = _check_qubits(qubits, n)
    k = len(qs)
    target = np.asarray(target, dtype=complex).reshape(-1)
    if target.size != 2 ** k:
        raise DimensionMismatch(f"target of size {target.size} for {k} qubits")
    axes = [n - 1 - q for q in reversed(qs)]
    psi = np.moveaxis(vec.reshape((2,) * n), axes, list(range(k))).reshape(2 ** k, -1)
    if np.linalg.norm(psi[1:]) > NORM_TOL:
        raise QubitNotFresh(f"qubits {qs} are not all in |0>")
    rest = psi[0]
    out = np.outer(target, rest).reshape((2,) * n)
    out = np.moveaxis(out, list(range(k)), axes)
    return PureState(np.ascontiguousarray(out).reshape(-1), state.register)


def bell_pair(state: PureState, qubit_a: int, qubit_b: int) -> PureState:
    return ghz(state, [qubit_a, qubit_b])


def ghz(state: PureState, qubits: Sequence[int]) -> PureState:
    k = len(qubits)
    t = np.zeros(2 ** k, dtype=complex)
    t[0] = t[-1] = _SQ2
    return prepare(state, qubits, t)


def w_state(state: PureState, qubits: Sequence[int]) -> PureState:
    k = len(qubits)
    t = np.zeros(2 ** k, dtype=complex)
    for j in range(k):
        t[1 << j] = 1 / np.sqrt(k)
    return prepare(state, qubits, t)


def apply_unitary(state: PureState, u: Unitary) -> PureState:
    n = state.n
    _check_qubits(u.qubits, n)
    return PureState(apply_matrix(state.amplitudes, u.matrix, u.qubits), state.register)


def apply_gate(state: PureState, name: str, *qubits: int) -> PureState:
    return apply_unitary(state, Unitary(GATES[name.upper()], tuple(qubits)))


def prob_one(vec: np.ndarray, q: int) -> float:
    v = _bit_view(vec, q)
    return float(np.sum(np.abs(v[:, 1, :]) ** 2))


def collapse(vec: np.ndarray, q: int, outcome: int) -> np.ndarray:
    out = vec.copy()
    v = _bit_view(out, q)
    v[:, 1 - outcome, :] = 0
    nrm = np.linalg.norm(out)
    if nrm < 1e-300:
        raise ValueError(f"outcome {outcome} on qubit {q} has zero probability")
    return out / nrm


def measure_z(state: PureState, qubit: int, rng: np.random.Generator) -> tuple[int, PureState]:
    """Born-rule Z measurement; one uniform draw from ``rng`` per call."""
    _check_qubits([qubit], state.n)
    p1 = prob_one(state.amplitudes, qubit)
    outcome = int(rng.random() < p1)
    return outcome, PureState(collapse(state.amplitudes, qubit, outcome), state.register)


# ---------------------------------------------------------------- reduced states


def partial_trace(state: PureState | MixedState, keep: Iterable[int]) -> MixedState:
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise BadIndex("partial trace needs a nonempty keep set")
    if len(keep) > MAX_DENSITY_QUBITS:
        raise SubsetTooLarge(f"{len(keep)} qubits exceeds the density cap of {MAX_DENSITY_QUBITS}")
    k = len(keep)
    if isinstance(state, MixedState):
        sub = list(state.subset)
        missing = [q for q in keep if q not in sub]
        if missing:
            raise SubsetMismatch(f"qubits {missing} not in the state's subset {sub}")
        m = len(sub)
        t = state.rho.reshape((2,) * (2 * m))
        row_keep = [m - 1 - sub.index(q) for q in reversed(keep)]
        row_rest = [a for a in range(m) if a not in row_keep]
        perm = row_keep + row_rest + [a + m for a in row_keep] + [a + m for a in row_rest]
        dk, dr = 2 ** k, 2 ** (m - k)
        t = np.transpose(t, perm).reshape(dk, dr, dk, dr)
        return MixedState(np.einsum("iaja->ij", t), tuple(keep))
    vec = state.amplitudes
    n = _n_of(vec)
    _check_qubits(keep, n)
    axes = [n - 1 - q for q in reversed(keep)]
    rest = [a for a in range(n) if a not in axes]
    mat = np.transpose(vec.reshape((2,) * n), axes + rest).reshape(2 ** k, -1)
    return MixedState(mat @ mat.conj().T, tuple(keep))


def l1_norm(m: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(m), compute_uv=False)))


def trace_distance_L1(a: MixedState, b: MixedState) -> float:
    """``||a - b||_1`` (not halved), in [0, 2]."""
    if tuple(a.subset) != tuple(b.subset):
        raise SubsetMismatch(f"subsets differ: {a.subset} vs {b.subset}")
    diff = a.rho - b.rho
    # Hermitian difference: the trace norm is the sum of |eigenvalues|
    return float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


def _spectrum_entropy(p: np.ndarray) -> float:
    p = np.clip(np.real(p), 0, None)
    p = p[p > EIG_CLIP]
    return float(-np.sum(p * np.log2(p)))


def entropy(rho: MixedState | np.ndarray) -> float:
    """Von Neumann entropy in bits."""
    m = rho.rho if isinstance(rho, MixedState) else np.asarray(rho)
    return _spectrum_entropy(np.linalg.eigvalsh((m + m.conj().T) / 2))


def schmidt_probabilities(vec: np.ndarray, cut: Sequence[int]) -> np.ndarray:
    n = _n_of(vec)
    cut = sorted(cut)
    axes = [n - 1 - q for q in reversed(cut)]
    rest = [a for a in range(n) if a not in axes]
    mat = np.transpose(vec.reshape((2,) * n), axes + rest).reshape(2 ** len(cut), -1)
    s = np.linalg.svd(mat, compute_uv=False)
    return s ** 2


def subset_entropy(state: PureState | MixedState, subset: Iterable[int]) -> float:
    """Entropy of the reduced state on ``subset``.

    Pure states use the Schmidt spectrum, so no density matrix is formed.
    """
    subset = sorted(set(int(q) for q in subset))
    if not subset:
        return 0.0
    if isinstance(state, MixedState):
        return entropy(partial_trace(state, subset))
    n = state.n
    _check_qubits(subset, n)
    if len(subset) == n:
        return 0.0
    return _spectrum_entropy(schmidt_probabilities(state.amplitudes, subset))


def mutual_information(state: PureState | MixedState, a: Iterable[int], b: Iterable[int]) -> float:
    a = set(int(q) for q in a)
    b = set(int(q) for q in b)
    if a & b:
        raise OverlappingSubsets(f"subsets overlap on {sorted(a & b)}")
    if not a or not b:
        return 0.0
    return subset_entropy(state, a) + subset_entropy(state, b) - subset_entropy(state, a | b)


def maximally_mixed(subset: Sequence[int]) -> MixedState:
    d = 2 ** len(subset)
    return MixedState(np.eye(d, dtype=complex) / d, tuple(sorted(subset)))


def deviation_from_mixed(rho: MixedState) -> float:
    """``||rho - I/d||_1``."""
    d = rho.rho.shape[0]
    ev = np.linalg.eigvalsh((rho.rho + rho.rho.conj().T) / 2)
    return float(np.sum(np.abs(ev - 1 / d)))


# ---------------------------------------------------------------- random unitaries


def haar_unitary(k: int, rng: np.random.Generator, qubits: Sequence[int] | None = None) -> Unitary:
    """Haar-random unitary on ``k`` qubits.

    Ginibre matrix, QR, then the phases of R's diagonal are folded into Q so
    that the result is Haar distributed rather than QR-convention biased.
    """
    if k > MAX_DENSITY_QUBITS:
        raise TooLarge(f"Haar unitary on {k} qubits exceeds the cap of {MAX_DENSITY_QUBITS}")
    d = 2 ** k
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    q = q * (diag / np.abs(diag))
    return Unitary(q, tuple(range(k)) if qubits is None else tuple(qubits))


# ---------------------------------------------------------------- bipartite analysis


def _check_cut(state: PureState, cut: Iterable[int]) -> list[int]:
    cut = sorted(set(int(q) for q in cut))
    n = state.n
    if not cut or len(cut) >= n or any(not 0 <= q < n for q in cut):
        raise BadCut(f"cut {cut} is not a proper nonempty subset of {n} qubits")
    return cut


def schmidt_spectrum(state: PureState, cut: Iterable[int]) -> np.ndarray:
    """Squared Schmidt coefficients across ``cut``, descending."""
    cut = _check_cut(state, cut)
    p = schmidt_probabilities(state.amplitudes, cut)
    return np.sort(p)[::-1]


def nielsen_convertible(source: Sequence[float], target: Sequence[float], tol: float = 1e-12) -> bool:
    """True iff ``source`` can be turned into ``target`` by LOCC.

    That holds exactly when the source spectrum is majorized by the target's.
    """
    m = max(len(source), len(target))
    a = np.sort(np.pad(np.asarray(source, float), (0, m - len(source))))[::-1]
    b = np.sort(np.pad(np.asarray(target, float), (0, m - len(target))))[::-1]
    return bool(np.all(np.cumsum(a) <= np.cumsum(b) + tol))


def distillation_rate(state: PureState, cut: Iterable[int]) -> float:
    """Asymptotic EPR rate of a pure bipartite state: the entropy of one side."""
    cut = _check_cut(state, cut)
    return subset_entropy(state, cut)


def fidelity_pure(psi: np.ndarray, rho: MixedState) -> float:
    psi = np.asarray(psi, dtype=complex)
    return float(np.real(psi.conj() @ rho.rho @ psi))
