"""Resource accounting for protocol runs.

Stocks ([qq], [cc], GHZ, W, ...) are balances per party set. Channel uses
([c→c], [q→q]) have no stock; they are metered per directed (src, dst) pair.
Every history entry points at the trace event that caused it.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import BadParams, InsufficientBalance

QQ = "[qq]"
CC = "[cc]"
CBIT = "[c→c]"
QBIT = "[q→q]"
GHZ = "GHZ"
W = "W"
CNOT = "[CNOT]"

CHANNEL_SPECIES = frozenset({CBIT, QBIT})
PAIR_SPECIES = frozenset({QQ, CC})
_ALIASES = {"[c->c]": CBIT, "[q->q]": QBIT, "[qqq]": GHZ}


def canonical_species(label: str) -> str:
    return _ALIASES.get(label, label)


@dataclass(frozen=True)
class Entry:
    event: int
    op: str  # credit | debit | use | produce
    species: str
    parties: tuple[int, ...]
    amount: int


def _parties(species: str, parties: Sequence[int]) -> tuple[int, ...]:
    ps = tuple(int(p) for p in parties)
    if len(set(ps)) != len(ps):
        raise BadParams(f"repeated party in {ps}")
    if species in CHANNEL_SPECIES:
        if len(ps) != 2:
            raise BadParams(f"{species} needs a (src, dst) pair, got {ps}")
        return ps
    if species in PAIR_SPECIES and len(ps) != 2:
        raise BadParams(f"{species} is shared by exactly two parties, got {ps}")
    if species in (GHZ, W) and len(ps) < 3:
        raise BadParams(f"{species} needs at least three parties, got {ps}")
    return tuple(sorted(ps))


@dataclass
class Ledger:
    balances: dict[tuple[str, tuple[int, ...]], int] = field(default_factory=dict)
    history: list[Entry] = field(default_factory=list)

    def balance(self, species: str, parties: Sequence[int]) -> int:
        species = canonical_species(species)
        return self.balances.get((species, _parties(species, parties)), 0)

    def credit(self, species: str, parties: Sequence[int], amount: int, event: int) -> "Ledger":
        species = canonical_species(species)
        if species in CHANNEL_SPECIES:
            raise BadParams(f"{species} is a channel use, not a stock")
        if amount < 1:
            raise BadParams(f"amount must be >= 1, got {amount}")
        key = (species, _parties(species, parties))
        self.balances[key] = self.balances.get(key, 0) + amount
        self.history.append(Entry(event, "credit", key[0], key[1], amount))
        return self

    def debit(self, species: str, parties: Sequence[int], amount: int, event: int, *, exempt: bool = False) -> "Ledger":
        """Remove stock. ``exempt`` (infinite endowment) tops up a shortfall first."""
        species = canonical_species(species)
        if amount < 1:
            raise BadParams(f"amount must be >= 1, got {amount}")
        key = (species, _parties(species, parties))
        have = self.balances.get(key, 0)
        if have < amount:
            if not exempt:
                raise InsufficientBalance(f"need {amount} {species} on {key[1]}, have {have}")
            self.credit(species, parties, amount - have, event)
        self.balances[key] -= amount
        self.history.append(Entry(event, "debit", key[0], key[1], amount))
        return self

    def use_channel(self, species: str, src: int, dst: int, amount: int, event: int) -> "Ledger":
        species = canonical_species(species)
        if species not in CHANNEL_SPECIES:
            raise BadParams(f"{species} is not a channel species")
        if amount < 1:
            raise BadParams(f"amount must be >= 1, got {amount}")
        self.history.append(Entry(event, "use", species, _parties(species, (src, dst)), amount))
        return self

    def produce(self, species: str, parties: Sequence[int], amount: int, event: int) -> "Ledger":
        """Record an achieved effect (e.g. one [q→q] from teleportation)."""
        species = canonical_species(species)
        self.history.append(Entry(event, "produce", species, _parties(species, parties), amount))
        return self

    def mark(self) -> int:
        return len(self.history)

    def since(self, mark: int) -> list[Entry]:
        return self.history[mark:]


def credit(ledger: Ledger, species: str, parties: Sequence[int], amount: int, event: int) -> Ledger:
    return ledger.credit(species, parties, amount, event)


def debit(ledger: Ledger, species: str, parties: Sequence[int], amount: int, event: int, exempt: bool = False) -> Ledger:
    return ledger.debit(species, parties, amount, event, exempt=exempt)


def replay(history: Iterable[Entry]) -> dict[tuple[str, tuple[int, ...]], int]:
    """Balances recomputed from credits and debits alone."""
    out: dict[tuple[str, tuple[int, ...]], int] = {}
    for e in history:
        if e.op == "credit":
            out[(e.species, e.parties)] = out.get((e.species, e.parties), 0) + e.amount
        elif e.op == "debit":
            out[(e.species, e.parties)] = out.get((e.species, e.parties), 0) - e.amount
    return out


def _party_string(parties: Sequence[int], names: Mapping[int, str] | None) -> str:
    return "".join((names or {}).get(p, f"P{p}") for p in parties)


def species_report(ledger: Ledger, names: Mapping[int, str] | None = None, with_parties: bool = True) -> str:
    """Balances as ``((x1,y1,parties),(x2,y2,parties),...)``."""
    items = sorted((k, v) for k, v in ledger.balances.items() if v > 0)
    if not with_parties:
        agg: Counter = Counter()
        for (species, _), v in items:
            agg[species] += v
        return "(" + ",".join(f"({v},{s})" for s, v in sorted(agg.items())) + ")"
    return "(" + ",".join(
        f"({v},{species},{_party_string(parties, names)})" for (species, parties), v in items
    ) + ")"


# ---------------------------------------------------------------- inequalities


@dataclass(frozen=True)
class Term:
    count: int
    species: str
    parties: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.count < 1:
            raise BadParams(f"term count must be >= 1, got {self.count}")

    def render(self, names: Mapping[int, str] | None = None) -> str:
        c = "" if self.count == 1 else str(self.count)
        if self.parties is None:
            return f"{c}{self.species}"
        sep = "→" if self.species in CHANNEL_SPECIES else ""
        return f"{c}{self.species}_{{{sep.join((names or {}).get(p, f'P{p}') for p in self.parties)}}}"


@dataclass(frozen=True)
class ResourceInequality:
    consumed: tuple[Term, ...]
    produced: tuple[Term, ...]

    def render(self, names: Mapping[int, str] | None = None) -> str:
        lhs = " + ".join(t.render(names) for t in self.consumed)
        rhs = " + ".join(t.render(names) for t in self.produced)
        return f"{lhs} ≥ {rhs}"

    def __str__(self) -> str:
        return self.render()


_TERM = re.compile(r"^\s*(\d*)\s*(\[[^\]]+\]|[A-Za-z]+)\s*$")


def parse_inequality(text: str) -> ResourceInequality:
    """Parse e.g. ``"[qq] + 2[c->c] >= [q->q]"`` (party subscripts not supported)."""
    parts = re.split(r">=|≥", text)
    if len(parts) != 2:
        raise BadParams(f"inequality needs exactly one '>=': {text!r}")

    def side(s: str) -> tuple[Term, ...]:
        terms = []
        for chunk in s.split("+"):
            m = _TERM.match(chunk)
            if not m:
                raise BadParams(f"cannot parse term {chunk!r}")
            terms.append(Term(int(m.group(1) or 1), canonical_species(m.group(2))))
        return tuple(terms)

    return ResourceInequality(side(parts[0]), side(parts[1]))


@dataclass
class InequalityReport:
    inequality: str
    passed: bool
    consumed: dict[str, int]
    produced: dict[str, int]
    mismatches: list[str]

    def to_dict(self) -> dict:
        return {
            "inequality": self.inequality,
            "passed": self.passed,
            "consumed": self.consumed,
            "produced": self.produced,
            "mismatches": self.mismatches,
        }


def _tally(entries: Iterable[Entry], ops: set[str]) -> Counter:
    c: Counter = Counter()
    for e in entries:
        if e.op in ops:
            c[(e.species, e.parties)] += e.amount
    return c


def _match(terms: Sequence[Term], actual: Counter, side: str) -> tuple[list[str], dict[str, int]]:
    problems = []
    by_species: Counter = Counter()
    for (species, _), v in actual.items():
        by_species[species] += v
    claimed: Counter = Counter()
    for t in terms:
        if t.parties is None:
            got = by_species[t.species]
        else:
            got = actual[(t.species, tuple(t.parties) if t.species in CHANNEL_SPECIES else tuple(sorted(t.parties)))]
        claimed[t.species] += got
        if got != t.count:
            problems.append(f"{side}: expected {t.count} {t.render()}, observed {got}")
    for species, v in by_species.items():
        if claimed[species] != v:
            problems.append(f"{side}: {v - claimed[species]} {species} not covered by the inequality")
    readable = {f"{s}{''.join(f'P{p}' for p in ps)}": v for (s, ps), v in sorted(actual.items())}
    return problems, readable


def check_inequality(history: Iterable[Entry], ineq: ResourceInequality) -> InequalityReport:
    """Exact accounting check of one protocol's history slice.

    Consumed = stock debits plus channel uses; produced = credits plus effects.
    """
    history = list(history)
    consumed = _tally(history, {"debit", "use"})
    produced = _tally(history, {"credit", "produce"})
    p1, c_read = _match(ineq.consumed, consumed, "consumed")
    p2, p_read = _match(ineq.produced, produced, "produced")
    return InequalityReport(str(ineq), not (p1 or p2), c_read, p_read, p1 + p2)


TELEPORT = ResourceInequality((Term(1, QQ), Term(2, CBIT)), (Term(1, QBIT),))
SUPERDENSE = ResourceInequality((Term(1, QQ), Term(1, QBIT)), (Term(2, CBIT),))
SWAP = ResourceInequality((Term(2, QQ), Term(2, CBIT)), (Term(1, QQ),))
DISTRIBUTED_CNOT = ResourceInequality((Term(1, QQ), Term(2, CBIT)), (Term(1, CNOT),))
COIN = ResourceInequality((Term(1, QQ),), (Term(1, CC),))


def controlled_teleport_inequality(q: int, r: int, s: int) -> ResourceInequality:
    return ResourceInequality(
        (Term(1, GHZ, (q, r, s)), Term(2, CBIT, (q, r)), Term(2, CBIT, (r, s))),
        (Term(1, QBIT, (q, s)),),
    )
