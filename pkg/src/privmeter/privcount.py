"""Blinded-counter secure aggregation.

Three party roles: data collectors (DCs) hold counters blinded by
Gaussian noise plus one uniform secret share per share keeper (SK);
SKs sum the shares they received; the tally server (TS) subtracts the
share sums from the counter sums, leaving exactly true count plus
noise.

Noise is drawn once at round start from a seeded stream and frozen.
The derivation is part of the module contract so tests can replay it
independently: for a DC with seed s, round id r and counters in spec
order, the draws are

    default_rng(SeedSequence((s, stable_key(r), 1))).normal(0, sigma_i)

rounded to the nearest integer, and share streams use tag 2 in place
of 1. Shares are handed to the SKs and erased from DC state; what
remains per counter is a single residue mod q.
"""

from __future__ import annotations

import hashlib
import json
import socket
import threading
from dataclasses import dataclass

import numpy as np

from privmeter.privacy import NoiseSpec

#: default counter modulus: a Mersenne prime wide enough that sums of
#: byte-scale counts plus noise never wrap
Q_DEFAULT = 2 ** 61 - 1

_NOISE_TAG = 1
_SHARE_TAG = 2


def is_probable_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 2**64."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def stable_key(text: str) -> int:
    """64-bit key for a string, stable across processes."""
    return int.from_bytes(hashlib.blake2s(text.encode()).digest()[:8], "big")


@dataclass(frozen=True)
class CounterSpec:
    """What one counter counts.

    match is an optional predicate on events selecting the histogram
    bin; value_field names an event payload field to add instead of 1
    (byte and cell counters); scale multiplies every increment (e.g. a
    rendezvous seen at the relay accounts for two spliced circuits).
    """

    counter_id: str
    event_kind: str
    action: str = "disabled"
    match: object = None
    value_field: str = None
    scale: int = 1
    modulus: int = Q_DEFAULT

    def __post_init__(self):
        if not is_probable_prime(self.modulus):
            raise ValueError(f"counter modulus {self.modulus} is not prime")
        if self.scale < 1:
            raise ValueError(f"counter scale must be >= 1, got {self.scale}")

    def accepts(self, event) -> bool:
        if event.kind != self.event_kind:
            return False
        return self.match is None or bool(self.match(event))

    def delta(self, event) -> int:
        base = 1 if self.value_field is None else int(event[self.value_field])
        return self.scale * base


@dataclass(frozen=True)
class ValueMessage:
    """DC->TS and SK->TS payload."""

    round_id: str
    counter_id: str
    value: int

    def to_json(self) -> str:
        return json.dumps({"round_id": self.round_id, "counter_id": self.counter_id,
                           "value": self.value})

    @classmethod
    def from_json(cls, s: str) -> "ValueMessage":
        d = json.loads(s)
        return cls(d["round_id"], d["counter_id"], int(d["value"]))


@dataclass(frozen=True)
class ShareMessage:
    """DC->SK payload."""

    round_id: str
    counter_id: str
    share: int

    def to_json(self) -> str:
        return json.dumps({"round_id": self.round_id, "counter_id": self.counter_id,
                           "share": self.share})

    @classmethod
    def from_json(cls, s: str) -> "ShareMessage":
        d = json.loads(s)
        return cls(d["round_id"], d["counter_id"], int(d["share"]))


class DataCollector:
    """Counts events into blinded residues."""

    def __init__(self, dc_id: str, seed: int):
        self.dc_id = dc_id
        self.seed = int(seed)
        self.round_id = None
        self.specs = []
        self.values = {}

    def init_round(self, round_id: str, counter_specs, noise_specs: dict,
                   sk_ids) -> dict:
        """Blind each counter; returns {sk_id: [ShareMessage, ...]}.

        Counter value after init is round(noise) + sum of shares mod q.
        The share records exist only in the returned messages.
        """
        if not sk_ids:
            raise ValueError("at least one share keeper required")
        for spec in counter_specs:
            if spec.counter_id not in noise_specs:
                raise ValueError(f"no noise spec for counter {spec.counter_id!r}")
        self.round_id = round_id
        self.specs = list(counter_specs)
        self.values = {}
        rkey = stable_key(round_id)
        rng_noise = np.random.default_rng(np.random.SeedSequence((self.seed, rkey, _NOISE_TAG)))
        rng_share = np.random.default_rng(np.random.SeedSequence((self.seed, rkey, _SHARE_TAG)))
        out = {sk: [] for sk in sk_ids}
        for spec in self.specs:
            q = spec.modulus
            sigma = noise_specs[spec.counter_id].sigma
            noise = int(round(rng_noise.normal(0.0, sigma))) if sigma > 0 else 0
            acc = noise % q
            for sk in sk_ids:
                share = int(rng_share.integers(0, q))
                acc = (acc + share) % q
                out[sk].append(ShareMessage(round_id, spec.counter_id, share))
            self.values[spec.counter_id] = acc
        return out

    def observe(self, event):
        """Route one event into every accepting counter."""
        if self.round_id is None:
            raise RuntimeError("observe() outside an active round")
        for spec in self.specs:
            if spec.accepts(event):
                q = spec.modulus
                self.values[spec.counter_id] = (self.values[spec.counter_id]
                                                + spec.delta(event)) % q

    def end_round(self) -> list:
        """Report blinded values to the TS and close the round."""
        msgs = [ValueMessage(self.round_id, cid, v) for cid, v in self.values.items()]
        self.round_id = None
        return msgs


class ShareKeeper:
    """Holds per-(DC, counter) shares; never sees event data."""

    def __init__(self, sk_id: str):
        self.sk_id = sk_id
        self.shares = {}  # (round_id, counter_id) -> {dc_id: share}

    def receive(self, dc_id: str, messages):
        for m in messages:
            self.shares.setdefault((m.round_id, m.counter_id), {})[dc_id] = m.share

    def share_sums(self, round_id: str, expected_dcs, modulus: int = Q_DEFAULT):
        """Per-counter share sums; counters missing a DC are incomplete."""
        sums, incomplete = [], set()
        expected = set(expected_dcs)
        for (rid, cid), per_dc in sorted(self.shares.items()):
            if rid != round_id:
                continue
            if not expected <= set(per_dc):
                incomplete.add(cid)
                continue
            total = sum(per_dc[dc] for dc in expected) % modulus
            sums.append(ValueMessage(round_id, cid, total))
        return sums, incomplete


@dataclass
class RoundResult:
    round_id: str
    totals: dict        # counter_id -> signed noisy total
    incomplete: tuple   # counter ids dropped for the round


class TallyServer:
    """Combines DC values and SK share sums into signed noisy totals."""

    def __init__(self):
        self.dc_values = {}   # (round_id, counter_id) -> {dc_id: value}
        self.sk_sums = {}     # (round_id, counter_id) -> {sk_id: sum}
        self.flagged = {}     # round_id -> set of incomplete counter ids

    def receive_dc(self, dc_id: str, messages):
        for m in messages:
            self.dc_values.setdefault((m.round_id, m.counter_id), {})[dc_id] = m.value

    def receive_sk(self, sk_id: str, messages):
        for m in messages:
            self.sk_sums.setdefault((m.round_id, m.counter_id), {})[sk_id] = m.value

    def flag_incomplete(self, round_id: str, counter_ids):
        self.flagged.setdefault(round_id, set()).update(counter_ids)

    def aggregate(self, round_id: str, dc_ids, sk_ids,
                  modulus: int = Q_DEFAULT) -> RoundResult:
        """total = sum(DC values) - sum(SK share sums) mod q, lifted to
        the signed range (-q/2, q/2]. Counters without a full set of
        reports are dropped rather than published partially."""
        dc_ids, sk_ids = set(dc_ids), set(sk_ids)
        totals = {}
        incomplete = set(self.flagged.get(round_id, set()))
        cids = {cid for (rid, cid) in self.dc_values if rid == round_id}
        cids |= {cid for (rid, cid) in self.sk_sums if rid == round_id}
        for cid in sorted(cids):
            if cid in incomplete:
                continue
            vals = self.dc_values.get((round_id, cid), {})
            sums = self.sk_sums.get((round_id, cid), {})
            if set(vals) != dc_ids or set(sums) != sk_ids:
                incomplete.add(cid)
                continue
            raw = (sum(vals.values()) - sum(sums.values())) % modulus
            totals[cid] = raw - modulus if raw > modulus // 2 else raw
        return RoundResult(round_id=round_id, totals=totals,
                           incomplete=tuple(sorted(incomplete)))


def replay_noise_total(dc_seeds, round_id: str, counter_specs, noise_specs) -> dict:
    """Independent replay of the frozen noise sum per counter across DCs."""
    totals = {spec.counter_id: 0 for spec in counter_specs}
    rkey = stable_key(round_id)
    for seed in dc_seeds:
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), rkey, _NOISE_TAG)))
        for spec in counter_specs:
            sigma = noise_specs[spec.counter_id].sigma
            draw = rng.normal(0.0, sigma)
            if sigma > 0:
                totals[spec.counter_id] += int(round(draw))
    return totals


def run_round_in_memory(round_id: str, counter_specs, noise_specs,
                        dc_event_streams: dict, n_sks: int = 3,
                        seed: int = 0, dropout_dcs=()) -> RoundResult:
    """Drive one full round over in-memory queues.

    dc_event_streams maps dc_id to an iterable of events. DCs listed in
    dropout_dcs initialize and observe but never report, exercising the
    drop-the-counter policy.
    """
    sk_ids = [f"sk{i}" for i in range(n_sks)]
    sks = {sid: ShareKeeper(sid) for sid in sk_ids}
    ts = TallyServer()
    dc_ids = sorted(dc_event_streams)
    dcs = {}
    for dc_id in dc_ids:
        dc = DataCollector(dc_id, seed=stable_key(f"{seed}/{dc_id}"))
        dcs[dc_id] = dc
        for sk_id, msgs in dc.init_round(round_id, counter_specs, noise_specs, sk_ids).items():
            sks[sk_id].receive(dc_id, msgs)
        for ev in dc_event_streams[dc_id]:
            dc.observe(ev)
    # a dropped DC sent its shares at init but never reports a value,
    # which makes every counter incomplete at the TS (no partial sums)
    for dc_id in dc_ids:
        if dc_id not in set(dropout_dcs):
            ts.receive_dc(dc_id, dcs[dc_id].end_round())
    modulus = counter_specs[0].modulus if counter_specs else Q_DEFAULT
    for sk_id in sk_ids:
        msgs, incomplete = sks[sk_id].share_sums(round_id, dc_ids, modulus)
        ts.receive_sk(sk_id, msgs)
        ts.flag_incomplete(round_id, incomplete)
    return ts.aggregate(round_id, dc_ids, sk_ids, modulus)


# ---------------------------------------------------------------------------
# Optional line-delimited JSON transport


class TcpCollector:
    """Accepts newline-delimited JSON messages on a local socket.

    A minimal stand-in for the authenticated channels of a real
    deployment; used to check that the message formats round-trip over
    a byte stream.
    """

    def __init__(self, kind):
        self.kind = kind  # ShareMessage or ValueMessage
        self.received = []
        self._srv = socket.create_server(("127.0.0.1", 0))
        self.port = self._srv.getsockname()[1]
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    def _serve(self):
        conn, _ = self._srv.accept()
        with conn, conn.makefile("r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    self.received.append(self.kind.from_json(line))

    def close(self):
        self._thread.join(timeout=5)
        self._srv.close()


def send_messages(port: int, messages):
    with socket.create_connection(("127.0.0.1", port)) as s, \
            s.makefile("w", encoding="utf-8") as f:
        for m in messages:
            f.write(m.to_json() + "\n")
