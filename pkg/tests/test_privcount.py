"""Blinded-counter aggregation: exactness, dropout policy, transport."""

import numpy as np
import pytest

from privmeter.events import Event
from privmeter.privacy import noise_spec_for
from privmeter.privcount import (
    CounterSpec, DataCollector, Q_DEFAULT, ShareKeeper, ShareMessage,
    TallyServer, TcpCollector, ValueMessage, replay_noise_total,
    run_round_in_memory, send_messages, stable_key,
)


def _ev(kind, relay="r0", t=0.0, **payload):
    return Event(seq=0, relay_id=relay, t=t, kind=kind,
                 payload=tuple(payload.items()))


def _noise_free(specs):
    return {s.counter_id: noise_spec_for(s.counter_id, "disabled", 0.1, 1e-9)
            for s in specs}


SPECS = [
    CounterSpec("streams", "ExitStream"),
    CounterSpec("streams_web", "ExitStream", match=lambda e: e["port"] == 443),
    CounterSpec("bytes", "ExitStream", value_field="bytes"),
    CounterSpec("double", "RendezvousCircuitEnd", scale=2),
]

EVENTS = [
    _ev("ExitStream", is_initial=True, target="a.example.com", port=443, bytes=100),
    _ev("ExitStream", is_initial=False, target="10.0.0.1", port=22, bytes=7),
    _ev("ExitStream", is_initial=False, target="b.example.com", port=443, bytes=50),
    _ev("RendezvousCircuitEnd", outcome="expired", cells=3),
    # no counter accepts this kind
    _ev("EntryConnection", client_ip=1, country="C1", asn=7),
]

TRUE_TOTALS = {"streams": 3, "streams_web": 2, "bytes": 157, "double": 2}


def test_stable_key_is_deterministic_and_distinct():
    assert stable_key("round-1") == stable_key("round-1")
    assert stable_key("round-1") != stable_key("round-2")
    assert 0 <= stable_key("x") < 2 ** 64


def test_counter_spec_validation():
    with pytest.raises(ValueError):
        CounterSpec("c", "ExitStream", scale=0)
    with pytest.raises(ValueError):
        CounterSpec("c", "ExitStream", modulus=2 ** 61 - 2)  # composite


def test_spec_accepts_and_delta():
    spec = CounterSpec("bytes", "ExitStream", value_field="bytes")
    assert spec.accepts(EVENTS[0]) and spec.delta(EVENTS[0]) == 100
    assert not spec.accepts(EVENTS[4])
    scaled = CounterSpec("d", "RendezvousCircuitEnd", scale=2)
    assert scaled.delta(EVENTS[3]) == 2


def test_noise_free_round_is_exact():
    streams = {f"dc{i}": EVENTS for i in range(4)}
    result = run_round_in_memory("r", SPECS, _noise_free(SPECS), streams,
                                 n_sks=3, seed=1)
    assert result.incomplete == ()
    assert result.totals == {k: 4 * v for k, v in TRUE_TOTALS.items()}


def test_noisy_round_equals_truth_plus_replayed_noise():
    noise = {s.counter_id: noise_spec_for(s.counter_id, "domains_connected",
                                          0.05, 1e-10) for s in SPECS}
    streams = {f"dc{i}": EVENTS for i in range(16)}
    result = run_round_in_memory("r9", SPECS, noise, streams, n_sks=3, seed=4)
    dc_seeds = [stable_key(f"4/{d}") for d in streams]
    replayed = replay_noise_total(dc_seeds, "r9", SPECS, noise)
    for cid, v in TRUE_TOTALS.items():
        assert result.totals[cid] - 16 * v == replayed[cid]


def test_blinded_values_leak_nothing_without_shares():
    """A single DC's reported value is uniform-looking: far from the count."""
    dc = DataCollector("dc0", seed=2)
    dc.init_round("r", SPECS, _noise_free(SPECS), ["sk0"])
    for ev in EVENTS:
        dc.observe(ev)
    (msg, *rest) = dc.end_round()
    # 3 observed events blinded into a value over the whole residue ring
    assert msg.value != TRUE_TOTALS[msg.counter_id]
    assert 0 <= msg.value < Q_DEFAULT


def test_observe_outside_round_raises():
    dc = DataCollector("dc0", seed=0)
    with pytest.raises(RuntimeError):
        dc.observe(EVENTS[0])


def test_dropout_drops_every_counter_not_partial_sums():
    streams = {f"dc{i}": EVENTS for i in range(4)}
    result = run_round_in_memory("r", SPECS, _noise_free(SPECS), streams,
                                 n_sks=2, seed=1, dropout_dcs=("dc2",))
    assert result.totals == {}
    assert set(result.incomplete) == set(TRUE_TOTALS)


def test_share_keeper_flags_missing_dc():
    sk = ShareKeeper("sk0")
    sk.receive("dc0", [ShareMessage("r", "c", 123)])
    sums, incomplete = sk.share_sums("r", ["dc0", "dc1"])
    assert sums == [] and incomplete == {"c"}
    sk.receive("dc1", [ShareMessage("r", "c", 77)])
    sums, incomplete = sk.share_sums("r", ["dc0", "dc1"])
    assert incomplete == set()
    assert sums[0].value == 200


def test_negative_totals_lift_to_signed_range():
    """Gaussian noise can push a small count below zero; the unblinded
    total must come back signed, not wrapped."""
    spec = [CounterSpec("c", "ExitStream")]
    noise = {"c": noise_spec_for("c", "exit_data_bytes", 0.3, 1e-11)}
    seen_negative = False
    for seed in range(6):
        result = run_round_in_memory(f"r{seed}", spec, noise,
                                     {"dc0": []}, n_sks=3, seed=seed)
        total = result.totals["c"]
        assert abs(total) < Q_DEFAULT // 4
        seen_negative |= total < 0
    assert seen_negative


def test_rounds_do_not_interfere():
    ts = TallyServer()
    sk = ShareKeeper("sk0")
    for rid, val in (("a", 5), ("b", 9)):
        dc = DataCollector("dc0", seed=7)
        out = dc.init_round(rid, [SPECS[0]], _noise_free(SPECS[:1]), ["sk0"])
        sk.receive("dc0", out["sk0"])
        for _ in range(val):
            dc.observe(EVENTS[0])
        ts.receive_dc("dc0", dc.end_round())
    for rid in ("a", "b"):
        sums, inc = sk.share_sums(rid, ["dc0"])
        ts.receive_sk("sk0", sums)
        ts.flag_incomplete(rid, inc)
    assert ts.aggregate("a", ["dc0"], ["sk0"]).totals["streams"] == 5
    assert ts.aggregate("b", ["dc0"], ["sk0"]).totals["streams"] == 9


def test_message_json_roundtrip():
    for msg in (ValueMessage("r", "c", 123456789), ShareMessage("r", "c", 42)):
        back = type(msg).from_json(msg.to_json())
        assert back == msg


def test_tcp_transport_roundtrip():
    msgs = [ValueMessage("r", f"c{i}", i * 17) for i in range(50)]
    coll = TcpCollector(ValueMessage)
    send_messages(coll.port, msgs)
    coll.close()
    assert coll.received == msgs


def test_seeded_rounds_reproduce():
    streams = {f"dc{i}": EVENTS for i in range(3)}
    noise = {s.counter_id: noise_spec_for(s.counter_id, "domains_connected",
                                          0.1, 1e-10) for s in SPECS}
    a = run_round_in_memory("r", SPECS, noise, streams, n_sks=3, seed=11)
    b = run_round_in_memory("r", SPECS, noise, streams, n_sks=3, seed=11)
    c = run_round_in_memory("r", SPECS, noise, streams, n_sks=3, seed=12)
    assert a.totals == b.totals
    assert a.totals != c.totals
