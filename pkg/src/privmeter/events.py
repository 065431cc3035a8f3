"""Synthetic relay traces with known ground truth.

A configured network of clients, relays and services is sampled into
per-relay event streams. Every total a protocol round can measure is
also recorded directly in a TruthSummary, so estimates made from the
noisy protocols can be scored against exact answers.

Client behavior follows the measured-network model: selective clients
contact g weight-chosen guards, promiscuous clients contact every
guard, domain visits follow a power law, onion descriptors are placed
on a fixed number of directory replicas.
"""

from __future__ import annotations

import ipaddress
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

EVENT_KINDS = (
    "EntryConnection", "EntryCircuit", "EntryBytes", "ExitStream",
    "DescriptorPublish", "DescriptorFetch", "RendezvousCircuitEnd",
    "RendezvousCells",
)

#: payload field order per kind, used for stable JSONL serialization
_PAYLOAD_FIELDS = {
    "EntryConnection": ("client_ip", "country", "asn"),
    "EntryCircuit": ("client_ip",),
    "EntryBytes": ("bytes",),
    "ExitStream": ("is_initial", "target", "port", "bytes"),
    "DescriptorPublish": ("onion_address",),
    "DescriptorFetch": ("onion_address", "hit"),
    "RendezvousCircuitEnd": ("outcome", "cells"),
    "RendezvousCells": ("cells",),
}

REND_OUTCOMES = ("succeeded", "conn_closed", "expired")

WEB_PORTS = (80, 443)


@dataclass(frozen=True)
class RelaySpec:
    """One measured relay: role flags plus network weight fraction per role."""

    relay_id: str
    guard: bool = False
    exit: bool = False
    hsdir: bool = False
    rendezvous: bool = False
    guard_weight: float = 0.0
    exit_weight: float = 0.0
    hsdir_weight: float = 0.0
    rend_weight: float = 0.0

    def __post_init__(self):
        for name in ("guard", "exit", "hsdir", "rendezvous"):
            flag = getattr(self, name)
            w = getattr(self, {"rendezvous": "rend_weight"}.get(name, f"{name}_weight"))
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"{self.relay_id}: {name} weight {w} outside [0,1]")
            if w > 0 and not flag:
                raise ValueError(f"{self.relay_id}: nonzero {name} weight without the role flag")


@dataclass(frozen=True)
class GroundTruthConfig:
    n_clients: int = 1000                    # selective clients
    guards_per_selective_client: int = 3     # the model's g
    n_promiscuous_clients: int = 0           # the model's p
    relays: tuple = ()
    ip_universe: int = 2 ** 32
    visits_per_client: float = 5.0           # mean exit-domain visits
    circuits_per_client: float = 3.0         # mean circuits per contacted guard
    connections_per_client: float = 1.5      # mean TCP connections per contacted guard
    entry_bytes_per_client: float = 50_000.0
    initial_stream_fraction: float = 0.6
    ip_target_fraction: float = 0.1          # streams addressed to a bare IP
    ipv6_target_fraction: float = 0.0        # of those, share using IPv6 literals
    web_port_fraction: float = 0.9
    domain_alpha: float = 1.0
    domain_universe: int = 1000
    domain_tlds: tuple = ("com", "net", "org", "ru", "de")
    onion_universe: int = 100
    onion_publish_fraction: float = 0.5
    onion_fetch_fraction: float = 0.3
    onion_replicas: int = 6
    fetch_failure_prob: float = 0.1
    n_rend_circuits: int = 0
    rend_outcome_probs: tuple = (0.08, 0.04, 0.88)   # succeeded, conn_closed, expired
    cells_per_rend_circuit: float = 1500.0
    n_days: int = 1
    churn_per_day: int = 0                   # fresh client IPs arriving each later day
    epoch_length: int = 86400
    rng_seed: int = 0

    def __post_init__(self):
        counts = dict(n_clients=self.n_clients, n_promiscuous=self.n_promiscuous_clients,
                      domain_universe=self.domain_universe, onion_universe=self.onion_universe,
                      n_rend_circuits=self.n_rend_circuits, churn_per_day=self.churn_per_day)
        for name, v in counts.items():
            if v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")
        if self.guards_per_selective_client < 1:
            raise ValueError("guards_per_selective_client must be >= 1")
        if self.domain_alpha <= 0:
            raise ValueError(f"domain_alpha must be > 0, got {self.domain_alpha}")
        if self.n_days < 1 or self.epoch_length <= 0:
            raise ValueError("n_days and epoch_length must be positive")
        if self.onion_replicas < 1:
            raise ValueError("onion_replicas must be >= 1")
        for name in ("onion_publish_fraction", "onion_fetch_fraction", "fetch_failure_prob",
                     "initial_stream_fraction", "ip_target_fraction", "ipv6_target_fraction",
                     "web_port_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")
        probs = self.rend_outcome_probs
        if len(probs) != len(REND_OUTCOMES) or any(p < 0 for p in probs) \
                or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise ValueError(f"rend_outcome_probs must be 3 probabilities summing to 1, got {probs}")
        for role in ("guard", "exit", "hsdir", "rend"):
            total = sum(getattr(r, f"{role}_weight") for r in self.relays)
            if total > 1.0 + 1e-9:
                raise ValueError(f"total {role} weight {total} exceeds 1")
        ids = [r.relay_id for r in self.relays]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate relay ids")

    def relay(self, relay_id: str) -> RelaySpec:
        for r in self.relays:
            if r.relay_id == relay_id:
                return r
        raise KeyError(f"unknown relay {relay_id!r}")


@dataclass(frozen=True)
class Event:
    seq: int
    relay_id: str
    t: float
    kind: str
    payload: tuple  # ordered (field, value) pairs per _PAYLOAD_FIELDS

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        want = _PAYLOAD_FIELDS[self.kind]
        got = tuple(k for k, _ in self.payload)
        if got != want:
            raise ValueError(f"{self.kind} payload fields {got} != {want}")

    def __getitem__(self, key):
        for k, v in self.payload:
            if k == key:
                return v
        raise KeyError(key)

    def to_json(self) -> str:
        doc = {"seq": self.seq, "relay": self.relay_id, "t": self.t, "kind": self.kind}
        doc.update(dict(self.payload))
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "Event":
        doc = json.loads(line)
        kind = doc["kind"]
        payload = tuple((k, doc[k]) for k in _PAYLOAD_FIELDS[kind])
        return cls(seq=doc["seq"], relay_id=doc["relay"], t=doc["t"], kind=kind,
                   payload=payload)


@dataclass
class TruthSummary:
    """Exact network-wide totals plus per-relay local totals."""

    totals: dict = field(default_factory=dict)
    per_relay: dict = field(default_factory=dict)

    def local(self, relay_id: str, statistic: str):
        return self.per_relay.get(relay_id, {}).get(statistic, 0)

    def to_json(self) -> str:
        return json.dumps({"totals": self.totals, "per_relay": self.per_relay},
                          sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "TruthSummary":
        doc = json.loads(s)
        return cls(totals=doc["totals"], per_relay=doc["per_relay"])


class Trace:
    """Immutable per-relay event streams, ordered by (t, seq)."""

    def __init__(self, events_by_relay: dict):
        self._events = {
            rid: tuple(sorted(evs, key=lambda e: (e.t, e.seq)))
            for rid, evs in events_by_relay.items()
        }

    @property
    def relay_ids(self):
        return tuple(sorted(self._events))

    def events_for_relay(self, relay_id: str):
        if relay_id not in self._events:
            raise KeyError(f"unknown relay {relay_id!r}")
        return self._events[relay_id]

    def all_events(self):
        merged = [e for evs in self._events.values() for e in evs]
        merged.sort(key=lambda e: (e.t, e.seq))
        return tuple(merged)

    def counts_by_kind(self) -> dict:
        out = {}
        for evs in self._events.values():
            for e in evs:
                out[e.kind] = out.get(e.kind, 0) + 1
        return out

    def write_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for e in self.all_events():
                f.write(e.to_json() + "\n")

    @classmethod
    def read_jsonl(cls, path, relay_ids=()):
        by_relay = {rid: [] for rid in relay_ids}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                e = Event.from_json(line)
                by_relay.setdefault(e.relay_id, []).append(e)
        return cls(by_relay)


def events_for_relay(trace: Trace, relay_id: str):
    """Ordered event stream of one relay (ties broken by sequence number)."""
    return trace.events_for_relay(relay_id)


# ---------------------------------------------------------------------------
# IP attribution


class PrefixTable:
    """Synthetic /8 prefix table mapping the high byte to (country, ASN)."""

    def __init__(self, rows):
        self.country = [""] * 256
        self.asn = [0] * 256
        for prefix, country, asn in rows:
            self.country[int(prefix)] = country
            self.asn[int(prefix)] = int(asn)

    @classmethod
    def bundled(cls) -> "PrefixTable":
        text = resources.files("privmeter").joinpath("data", "ip_prefixes.csv").read_text()
        rows = []
        for line in text.splitlines()[1:]:
            if line.strip():
                p, c, a = line.split(",")
                rows.append((int(p), c, int(a)))
        return cls(rows)

    def lookup(self, ip: int):
        hb = (int(ip) >> 24) & 0xFF
        return self.country[hb], self.asn[hb]


# ---------------------------------------------------------------------------
# Sampling helpers


def zipf_table(alpha: float, n: int) -> np.ndarray:
    """Normalized Zipf probabilities p_i proportional to (i+1)^-alpha."""
    ranks = np.arange(1, n + 1, dtype=np.float64)
    w = ranks ** (-alpha)
    return w / w.sum()


def zipf_sample(rng: np.random.Generator, alpha: float, n: int, size: int) -> np.ndarray:
    """Inverse-CDF sampling over the precomputed Zipf table (0-based ids)."""
    if size == 0:
        return np.zeros(0, dtype=np.int64)
    cdf = np.cumsum(zipf_table(alpha, n))
    u = rng.random(size)
    return np.searchsorted(cdf, u, side="right").clip(0, n - 1)


def _unique_ips(rng: np.random.Generator, count: int, universe: int) -> np.ndarray:
    """Distinct uint32 addresses; exact choice for small universes, probed
    rejection for the full 32-bit space."""
    if count > universe:
        raise ValueError(f"cannot draw {count} distinct IPs from universe {universe}")
    if count == 0:
        return np.zeros(0, dtype=np.uint32)
    if universe <= 10_000_000:
        return rng.choice(universe, size=count, replace=False).astype(np.uint32)
    seen = np.zeros(0, dtype=np.uint64)
    need = count
    while need > 0:
        draw = rng.integers(0, universe, size=int(need * 1.1) + 8, dtype=np.uint64)
        seen = np.unique(np.concatenate([seen, draw]))
        need = count - seen.size
    return rng.permutation(seen)[:count].astype(np.uint32)


def _gumbel_topk(rng: np.random.Generator, weights: np.ndarray, n_rows: int,
                 k: int, chunk: int = 65536) -> np.ndarray:
    """Row-wise weighted sampling of k distinct indices (Gumbel top-k)."""
    logw = np.log(np.maximum(weights, 1e-300))
    cols = weights.size
    out = np.empty((n_rows, k), dtype=np.int32)
    for lo in range(0, n_rows, chunk):
        hi = min(lo + chunk, n_rows)
        g = rng.gumbel(size=(hi - lo, cols)) + logw
        out[lo:hi] = np.argpartition(g, cols - k, axis=1)[:, cols - k:]
    return out


def _poisson_times(rng, lam_total: float, t0: float, t1: float):
    n = rng.poisson(lam_total)
    return np.sort(rng.uniform(t0, t1, size=n))


# ---------------------------------------------------------------------------
# Generation


class _Emitter:
    def __init__(self):
        self.seq = 0
        self.by_relay = {}

    def emit(self, relay_id, t, kind, **payload):
        fields = _PAYLOAD_FIELDS[kind]
        ev = Event(seq=self.seq, relay_id=relay_id, t=float(t), kind=kind,
                   payload=tuple((k, payload[k]) for k in fields))
        self.seq += 1
        self.by_relay.setdefault(relay_id, []).append(ev)


def generate_ground_truth(config: GroundTruthConfig):
    """Sample the configured network into (Trace, TruthSummary).

    Deterministic for a fixed config: every random stream is spawned
    from SeedSequence(config.rng_seed).
    """
    root = np.random.SeedSequence(config.rng_seed)
    seeds = root.spawn(6)
    rng_clients = np.random.default_rng(seeds[0])
    rng_entry = np.random.default_rng(seeds[1])
    rng_exit = np.random.default_rng(seeds[2])
    rng_onion = np.random.default_rng(seeds[3])
    rng_rend = np.random.default_rng(seeds[4])
    rng_churn = np.random.default_rng(seeds[5])

    em = _Emitter()
    for r in config.relays:
        em.by_relay.setdefault(r.relay_id, [])
    prefixes = PrefixTable.bundled()
    truth = TruthSummary(per_relay={r.relay_id: {} for r in config.relays})
    epoch_end = float(config.n_days * config.epoch_length)

    # ---- client population
    n_sel = config.n_clients
    n_prom = config.n_promiscuous_clients
    n_churn = config.churn_per_day * max(config.n_days - 1, 0)
    all_ips = _unique_ips(rng_clients, n_sel + n_prom + n_churn, config.ip_universe)
    sel_ips = all_ips[:n_sel]
    prom_ips = all_ips[n_sel:n_sel + n_prom]
    churn_ips = all_ips[n_sel + n_prom:]

    guard_relays = [r for r in config.relays if r.guard]
    gw = np.array([r.guard_weight for r in guard_relays], dtype=np.float64)
    rest_w = max(1.0 - gw.sum(), 0.0)

    # each selective client picks g distinct guards from the measured
    # guards plus virtual rest-of-network buckets holding the remaining
    # weight; a pick landing in a rest bucket is unobserved
    g = config.guards_per_selective_client
    n_rest = max(64, 4 * g)
    if gw.size:
        g_eff = min(g, gw.size + (n_rest if rest_w > 0 else 0))
        pool = np.concatenate([gw, np.full(n_rest, rest_w / n_rest)]) if rest_w > 0 else gw
        picks = _gumbel_topk(rng_clients, pool, n_sel, g_eff) if n_sel else \
            np.zeros((0, g_eff), dtype=np.int32)
        observed_at = {j: np.nonzero((picks == j).any(axis=1))[0] for j in range(len(guard_relays))}
    else:
        observed_at = {}

    day1_end = float(config.epoch_length)

    # ---- entry events per measured guard
    sel_day1 = set()
    for j, relay in enumerate(guard_relays):
        idx = observed_at.get(j, np.zeros(0, dtype=np.int64))
        ips_here = np.concatenate([sel_ips[idx], prom_ips]) if (idx.size or prom_ips.size) \
            else np.zeros(0, dtype=np.uint32)
        # churning clients appear on their arrival day at every guard
        # they use; model them as selective with one guard for simplicity
        churn_here = churn_ips[rng_churn.random(churn_ips.size) < min(
            1.0, relay.guard_weight * g)] if churn_ips.size else np.zeros(0, dtype=np.uint32)
        n_local_unique = int(ips_here.size + churn_here.size)
        rl = truth.per_relay[relay.relay_id]
        rl["unique_client_ips"] = n_local_unique
        rl["unique_client_ips_day1"] = int(ips_here.size)
        conns = circuits = byte_total = 0
        for day in range(config.n_days):
            t0, t1 = day * config.epoch_length, (day + 1) * config.epoch_length
            if day == 0:
                day_ips = ips_here
            else:
                day_ips = np.concatenate([
                    ips_here,
                    churn_here[(day - 1) * churn_here.size // max(config.n_days - 1, 1):
                               day * churn_here.size // max(config.n_days - 1, 1)],
                ])
            if not day_ips.size:
                continue
            n_conn = rng_entry.poisson(config.connections_per_client, size=day_ips.size) + 1
            n_circ = rng_entry.poisson(config.circuits_per_client, size=day_ips.size)
            for ip, nc, ncirc in zip(day_ips.tolist(), n_conn.tolist(), n_circ.tolist()):
                country, asn = prefixes.lookup(ip)
                for t in rng_entry.uniform(t0, t1, size=nc):
                    em.emit(relay.relay_id, t, "EntryConnection",
                            client_ip=int(ip), country=country, asn=asn)
                for t in rng_entry.uniform(t0, t1, size=ncirc):
                    em.emit(relay.relay_id, t, "EntryCircuit", client_ip=int(ip))
                conns += int(nc)
                circuits += int(ncirc)
            nb = rng_entry.poisson(config.entry_bytes_per_client * day_ips.size)
            if nb > 0:
                em.emit(relay.relay_id, rng_entry.uniform(t0, t1), "EntryBytes", bytes=int(nb))
                byte_total += int(nb)
        rl["entry_connections"] = conns
        rl["entry_circuits"] = circuits
        rl["entry_bytes"] = byte_total
        countries = {prefixes.lookup(ip)[0] for ip in ips_here.tolist()}
        asns = {prefixes.lookup(ip)[1] for ip in ips_here.tolist()}
        rl["unique_countries"] = len(countries)
        rl["unique_as"] = len(asns)

    n_unique_net = int(n_sel + n_prom + n_churn)
    truth.totals["unique_client_ips"] = n_unique_net
    truth.totals["unique_client_ips_day1"] = int(n_sel + n_prom)
    net_ips = all_ips.tolist()
    truth.totals["unique_countries"] = len({prefixes.lookup(ip)[0] for ip in net_ips})
    truth.totals["unique_as"] = len({prefixes.lookup(ip)[1] for ip in net_ips})

    # ---- exit streams
    exit_relays = [r for r in config.relays if r.exit]
    n_clients_active = n_sel + n_prom
    total_visits = rng_exit.poisson(config.visits_per_client * n_clients_active)
    domain_ids = zipf_sample(rng_exit, config.domain_alpha, config.domain_universe,
                             total_visits)
    is_initial = rng_exit.random(total_visits) < config.initial_stream_fraction
    is_ip = rng_exit.random(total_visits) < config.ip_target_fraction
    is_v6 = is_ip & (rng_exit.random(total_visits) < config.ipv6_target_fraction)
    is_web = rng_exit.random(total_visits) < config.web_port_fraction
    stream_bytes = rng_exit.geometric(1.0 / 20_000.0, size=total_visits)
    ip_targets = rng_exit.integers(0, 2 ** 32, size=total_visits, dtype=np.uint64)

    truth.totals["exit_streams"] = int(total_visits)
    truth.totals["exit_streams_initial"] = int(is_initial.sum())
    truth.totals["exit_streams_ipv4"] = int((is_ip & ~is_v6).sum())
    truth.totals["exit_streams_ipv6"] = int(is_v6.sum())
    truth.totals["exit_streams_hostname"] = int((~is_ip).sum())
    truth.totals["exit_streams_web"] = int(is_web.sum())
    truth.totals["exit_streams_nonweb"] = int((~is_web).sum())
    truth.totals["unique_sld"] = int(np.unique(domain_ids[~is_ip]).size) if total_visits else 0
    truth.totals["exit_bytes"] = int(stream_bytes.sum())

    if exit_relays and total_visits:
        ew = np.array([r.exit_weight for r in exit_relays])
        assign = rng_exit.random(total_visits)
        edges = np.concatenate([[0.0], np.cumsum(ew)])
        which = np.searchsorted(edges, assign, side="right") - 1
        observed = which < len(exit_relays)  # beyond the last edge: unobserved
        for j, relay in enumerate(exit_relays):
            sel = np.nonzero(observed & (which == j))[0]
            rl = truth.per_relay[relay.relay_id]
            rl["exit_streams"] = int(sel.size)
            rl["exit_streams_initial"] = int(is_initial[sel].sum())
            rl["exit_streams_ipv4"] = int((is_ip[sel] & ~is_v6[sel]).sum())
            rl["exit_streams_ipv6"] = int(is_v6[sel].sum())
            rl["exit_streams_hostname"] = int((~is_ip[sel]).sum())
            rl["exit_streams_web"] = int(is_web[sel].sum())
            rl["exit_streams_nonweb"] = int((~is_web[sel]).sum())
            rl["unique_sld"] = int(np.unique(domain_ids[sel][~is_ip[sel]]).size)
            rl["exit_bytes"] = int(stream_bytes[sel].sum())
            times = rng_exit.uniform(0.0, epoch_end, size=sel.size)
            for i, t in zip(sel.tolist(), times.tolist()):
                if is_v6[i]:
                    # documentation-prefix v6 literal carrying the v4 bits
                    target = str(ipaddress.IPv6Address(
                        (0x20010db8 << 96) | int(ip_targets[i])))
                elif is_ip[i]:
                    target = str(ipaddress.IPv4Address(int(ip_targets[i])))
                else:
                    target = domain_name(int(domain_ids[i]), config)
                port = 443 if is_web[i] else 6667
                em.emit(relay.relay_id, t, "ExitStream", is_initial=bool(is_initial[i]),
                        target=target, port=port, bytes=int(stream_bytes[i]))

    # ---- onion service descriptors
    hsdir_relays = [r for r in config.relays if r.hsdir]
    n_pub = int(round(config.onion_universe * config.onion_publish_fraction))
    n_fetch = int(round(config.onion_universe * config.onion_fetch_fraction))
    truth.totals["onions_published"] = n_pub
    truth.totals["onions_fetched"] = n_fetch
    if hsdir_relays:
        hw = np.array([r.hsdir_weight for r in hsdir_relays])
        edges = np.concatenate([[0.0], np.cumsum(hw)])
        for relay in hsdir_relays:
            truth.per_relay[relay.relay_id].update(
                onions_published=0, onions_fetched=0, fetches_ok=0, fetches_failed=0)
        if n_pub:
            # replica placement: each published onion lands on
            # onion_replicas directory slots, each slot independently on
            # a measured relay with its weight fraction
            placement = rng_onion.random((n_pub, config.onion_replicas))
            which = np.searchsorted(edges, placement, side="right") - 1
            which[placement >= edges[-1]] = -1
            for j, relay in enumerate(hsdir_relays):
                onion_rows = np.nonzero((which == j).any(axis=1))[0]
                rl = truth.per_relay[relay.relay_id]
                rl["onions_published"] = int(onion_rows.size)
                for o in onion_rows.tolist():
                    t = rng_onion.uniform(0.0, epoch_end)
                    em.emit(relay.relay_id, t, "DescriptorPublish",
                            onion_address=onion_name(o))
        if n_fetch:
            fetched_ids = rng_onion.choice(max(n_pub, 1), size=n_fetch, replace=n_fetch > n_pub)
            fetched_ids = np.unique(fetched_ids)[:n_fetch]
            truth.totals["onions_fetched"] = int(fetched_ids.size)
            placement = rng_onion.random((fetched_ids.size, config.onion_replicas))
            which = np.searchsorted(edges, placement, side="right") - 1
            which[placement >= edges[-1]] = -1
            for j, relay in enumerate(hsdir_relays):
                rows = np.nonzero((which == j).any(axis=1))[0]
                rl = truth.per_relay[relay.relay_id]
                rl["onions_fetched"] = int(rows.size)
                for o in rows.tolist():
                    t = rng_onion.uniform(0.0, epoch_end)
                    hit = bool(rng_onion.random() >= config.fetch_failure_prob)
                    em.emit(relay.relay_id, t, "DescriptorFetch",
                            onion_address=onion_name(int(fetched_ids[o])), hit=hit)
                    rl["fetches_ok" if hit else "fetches_failed"] += 1

    # ---- rendezvous circuits
    rend_relays = [r for r in config.relays if r.rendezvous]
    n_rend = config.n_rend_circuits
    truth.totals["rend_circuits"] = n_rend
    # the relay at the rendezvous point splices two circuits per rendezvous
    truth.totals["rend_circuits_rp"] = 2 * n_rend
    if rend_relays and n_rend:
        rw = np.array([r.rend_weight for r in rend_relays])
        edges = np.concatenate([[0.0], np.cumsum(rw)])
        assign = rng_rend.random(n_rend)
        which = np.searchsorted(edges, assign, side="right") - 1
        which[assign >= edges[-1]] = -1
        outcomes = rng_rend.choice(len(REND_OUTCOMES), size=n_rend,
                                   p=np.asarray(config.rend_outcome_probs))
        cells = rng_rend.geometric(1.0 / config.cells_per_rend_circuit, size=n_rend)
        cells[outcomes != 0] = np.minimum(cells[outcomes != 0], 20)  # failed circuits move little
        for name in REND_OUTCOMES:
            truth.totals[f"rend_{name}"] = int((outcomes == REND_OUTCOMES.index(name)).sum())
        truth.totals["rend_cells"] = int(cells.sum())
        for j, relay in enumerate(rend_relays):
            rows = np.nonzero(which == j)[0]
            rl = truth.per_relay[relay.relay_id]
            rl["rend_circuits"] = int(rows.size)
            rl["rend_circuits_rp"] = 2 * int(rows.size)
            rl["rend_cells"] = int(cells[rows].sum())
            for name in REND_OUTCOMES:
                rl[f"rend_{name}"] = int((outcomes[rows] == REND_OUTCOMES.index(name)).sum())
            times = rng_rend.uniform(0.0, epoch_end, size=rows.size)
            for i, t in zip(rows.tolist(), times.tolist()):
                em.emit(relay.relay_id, t, "RendezvousCircuitEnd",
                        outcome=REND_OUTCOMES[int(outcomes[i])], cells=int(cells[i]))
            if rows.size:
                em.emit(relay.relay_id, epoch_end - 1.0, "RendezvousCells",
                        cells=int(cells[rows].sum()))

    return Trace(em.by_relay), truth


def domain_name(domain_id: int, config: GroundTruthConfig) -> str:
    """Synthetic visit target: d<i>.example.<tld> with a deterministic TLD mix."""
    tld = config.domain_tlds[domain_id % len(config.domain_tlds)]
    return f"d{domain_id}.example.{tld}"


def onion_name(onion_id: int) -> str:
    return f"o{onion_id:06d}.onion"


def synthetic_suffix_rules(config: GroundTruthConfig):
    """Extra public-suffix rules making each synthetic domain its own SLD."""
    return [f"example.{tld}" for tld in config.domain_tlds]


def classify_target(target: str) -> str:
    """"ipv4", "ipv6" or "hostname"."""
    try:
        return "ipv" + str(ipaddress.ip_address(target).version)
    except ValueError:
        return "hostname"
