from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hassenet import ledger as L
from hassenet.errors import BadParams, InsufficientBalance


def test_credit_debit_and_party_order():
    led = L.Ledger()
    L.credit(led, "[qq]", (2, 0), 3, event=0)
    assert led.balance("[qq]", (0, 2)) == 3
    L.debit(led, "[qq]", (0, 2), 2, event=1)
    assert led.balance("[qq]", (2, 0)) == 1
    with pytest.raises(InsufficientBalance):
        L.debit(led, "[qq]", (0, 2), 2, event=2)


def test_exempt_debit_tops_up_first():
    led = L.Ledger()
    L.debit(led, L.QQ, (0, 1), 1, event=4, exempt=True)
    assert [e.op for e in led.history] == ["credit", "debit"]
    assert led.balance(L.QQ, (0, 1)) == 0


def test_aliases_are_canonical():
    assert L.canonical_species("[c->c]") == L.CBIT
    assert L.canonical_species("[q->q]") == L.QBIT
    assert L.canonical_species("[qqq]") == L.GHZ


@pytest.mark.parametrize(
    "call",
    [
        lambda led: led.credit(L.CBIT, (0, 1), 1, 0),
        lambda led: led.credit(L.QQ, (0, 1), 0, 0),
        lambda led: led.credit(L.QQ, (0, 0), 1, 0),
        lambda led: led.credit(L.QQ, (0, 1, 2), 1, 0),
        lambda led: led.credit(L.GHZ, (0, 1), 1, 0),
        lambda led: led.use_channel(L.QQ, 0, 1, 1, 0),
        lambda led: led.use_channel(L.CBIT, 0, 1, 0, 0),
    ],
)
def test_rejected_entries(call):
    with pytest.raises(BadParams):
        call(L.Ledger())


def test_channel_direction_is_kept():
    led = L.Ledger().use_channel(L.CBIT, 3, 1, 2, 0)
    assert led.history[0].parties == (3, 1)


def test_species_report_both_notations():
    led = L.Ledger()
    led.credit(L.QQ, (0, 1), 2, 0)
    led.credit(L.QQ, (1, 2), 1, 0)
    led.credit(L.GHZ, (0, 1, 2), 1, 0)
    assert L.species_report(led) == "((1,GHZ,P0P1P2),(2,[qq],P0P1),(1,[qq],P1P2))"
    assert L.species_report(led, with_parties=False) == "((1,GHZ),(3,[qq]))"
    assert L.species_report(led, {0: "A", 1: "B"}).endswith("(1,[qq],BP2))")
    assert L.species_report(L.Ledger()) == "()"


def test_parse_inequality_round_trip():
    ineq = L.parse_inequality("[qq] + 2[c->c] >= [q->q]")
    assert ineq == L.TELEPORT
    assert str(ineq) == "[qq] + 2[c→c] ≥ [q→q]"
    assert L.parse_inequality("2[qq] + 2[c→c] ≥ [qq]") == L.SWAP
    for bad in ("[qq]", "[qq] >= >= [cc]", "[qq] + ?? >= [cc]", "0[qq] >= [cc]"):
        with pytest.raises(BadParams):
            L.parse_inequality(bad)


def _teleport_history(extra_bit=False):
    led = L.Ledger()
    led.credit(L.QQ, (0, 1), 1, 0)
    mark = led.mark()
    led.debit(L.QQ, (0, 1), 1, 1)
    led.use_channel(L.CBIT, 0, 1, 2 + int(extra_bit), 2)
    led.produce(L.QBIT, (0, 1), 1, 3)
    return led.since(mark)


def test_check_inequality_exact_accounting():
    assert L.check_inequality(_teleport_history(), L.TELEPORT).passed
    rep = L.check_inequality(_teleport_history(extra_bit=True), L.TELEPORT)
    assert not rep.passed
    assert any("expected 2" in m for m in rep.mismatches)
    assert not L.check_inequality(_teleport_history(), L.SUPERDENSE).passed


def test_controlled_teleport_inequality_checks_parties():
    ineq = L.controlled_teleport_inequality(0, 1, 2)
    led = L.Ledger()
    led.credit(L.GHZ, (0, 1, 2), 1, 0)
    m = led.mark()
    led.debit(L.GHZ, (2, 1, 0), 1, 1)
    led.use_channel(L.CBIT, 0, 1, 2, 2)
    led.use_channel(L.CBIT, 1, 2, 2, 3)
    led.produce(L.QBIT, (0, 2), 1, 4)
    assert L.check_inequality(led.since(m), ineq).passed
    led.use_channel(L.CBIT, 2, 1, 1, 5)
    assert not L.check_inequality(led.since(m), ineq).passed
    assert "GHZ_{P0P1P2}" in ineq.render()


ops = st.lists(
    st.tuples(st.sampled_from(["credit", "debit"]), st.sampled_from([(0, 1), (1, 2)]), st.integers(1, 3)),
    max_size=30,
)


@given(ops)
def test_replay_reproduces_balances(script):
    led = L.Ledger()
    for i, (op, parties, k) in enumerate(script):
        if op == "credit":
            led.credit(L.QQ, parties, k, i)
        else:
            led.debit(L.QQ, parties, k, i, exempt=True)
    assert {k: v for k, v in L.replay(led.history).items() if v} == {k: v for k, v in led.balances.items() if v}
    assert all(v >= 0 for v in led.balances.values())
