"""Campaign orchestration: simulated deployments running measurement
rounds over generated traces.

One deployment holds the party layout (tally server, share keepers or
computation parties, data collectors), a relay-to-DC assignment and the
privacy budget. A campaign takes a schedule of rounds, refuses it
unless the safety checks pass, generates the synthetic world once, and
executes the rounds sequentially. Every measured statistic is scored
against the recorded ground truth, so a report line carries the local
estimate, the network-wide estimate, the true value and a coverage
flag.

Round windows participate in schedule validation only; each executed
round observes the whole trace with fresh protocol randomness, which
makes repeated rounds of one campaign independent noisy measurements
of the same underlying truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

from privmeter.events import (
    GroundTruthConfig, RelaySpec, Trace, TruthSummary, WEB_PORTS,
    classify_target, generate_ground_truth, synthetic_suffix_rules,
)
from privmeter.inference import (
    Estimate, extrapolate_by_fraction, hsdir_extrapolate, normal_ci,
    quadrature_sigma, range_bound,
)
from privmeter.matchers import SuffixList, registrable_or_none
from privmeter.privacy import (
    ActionBounds, PrivacyParams, Round, allocate_privacy_budget,
    noise_spec_for, sensitivity_for_counter, validate_schedule,
)
from privmeter.privcount import (
    CounterSpec, DataCollector, ShareKeeper, TallyServer, TcpCollector,
    ValueMessage, send_messages, stable_key,
)
from privmeter.psc import NoiseBinParams, estimate_from_round, run_psc_round

__all__ = [
    "CATALOG", "DeploymentConfig", "PartyFailure", "RoundReport",
    "RunReport", "ScheduleError", "StatEntry", "StatisticDef",
    "load_schedule", "role_fraction", "run_campaign", "run_round",
    "sample_deployment", "sample_schedule", "save_schedule",
]


class ScheduleError(ValueError):
    """A campaign was handed a schedule the safety rules reject."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class PartyFailure(RuntimeError):
    """Party loss the dropout policy cannot absorb."""


# ---------------------------------------------------------------------------
# statistic catalog


@dataclass(frozen=True)
class SubCounter:
    """One blinded counter inside a counter-family statistic."""

    sub: str
    truth_key: str
    event_kind: str
    match: object = None
    value_field: str = None
    scale: int = 1


@dataclass(frozen=True)
class StatisticDef:
    """How one named statistic is measured and scored.

    protocol picks the machinery (blinded counters vs set union), role
    names the relay role whose summed weight is the observed fraction,
    action names the per-user daily bound calibrating the noise.
    """

    name: str
    protocol: str            # "privcount" | "psc"
    role: str                # "guard" | "exit" | "hsdir" | "rend"
    action: str
    subs: tuple = ()         # privcount counter family
    items: object = None     # psc: callable(events, deployment) -> item list
    truth_key: str = ""
    network_method: str = "fraction"   # "fraction" | "range" | "replicas"
    universe_attr: str = ""  # GroundTruthConfig attr capping a range bound

    def __post_init__(self):
        if self.protocol not in ("privcount", "psc"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.protocol == "privcount" and not self.subs:
            raise ValueError(f"{self.name}: counter statistic without counters")
        if self.protocol == "psc" and self.items is None:
            raise ValueError(f"{self.name}: set statistic without an item extractor")


def _match_initial(e):
    return bool(e["is_initial"])


def _match_target_class(cls_name):
    def match(e):
        return classify_target(e["target"]) == cls_name
    return match


def _match_web(e):
    return e["port"] in WEB_PORTS


def _match_nonweb(e):
    return e["port"] not in WEB_PORTS


def _match_outcome(name):
    def match(e):
        return e["outcome"] == name
    return match


def _field_items(kind, field_name):
    def items(events, deployment):
        return [e[field_name] for e in events if e.kind == kind]
    return items


def _sld_items(events, deployment):
    rules = synthetic_suffix_rules(deployment.truth_config)
    suffixes = SuffixList(rules)
    out = []
    for e in events:
        if e.kind != "ExitStream":
            continue
        target = e["target"]
        if classify_target(target) != "hostname":
            continue
        sld = registrable_or_none(target, suffixes)
        if sld is not None:
            out.append(sld)
    return out


CATALOG = {
    "exit_taxonomy": StatisticDef(
        name="exit_taxonomy", protocol="privcount", role="exit",
        action="domains_connected",
        subs=(
            SubCounter("total", "exit_streams", "ExitStream"),
            SubCounter("initial", "exit_streams_initial", "ExitStream",
                       match=_match_initial),
            SubCounter("ipv4", "exit_streams_ipv4", "ExitStream",
                       match=_match_target_class("ipv4")),
            SubCounter("ipv6", "exit_streams_ipv6", "ExitStream",
                       match=_match_target_class("ipv6")),
            SubCounter("hostname", "exit_streams_hostname", "ExitStream",
                       match=_match_target_class("hostname")),
            SubCounter("web", "exit_streams_web", "ExitStream",
                       match=_match_web),
            SubCounter("nonweb", "exit_streams_nonweb", "ExitStream",
                       match=_match_nonweb),
        )),
    "exit_bytes": StatisticDef(
        name="exit_bytes", protocol="privcount", role="exit",
        action="exit_data_bytes",
        subs=(SubCounter("total", "exit_bytes", "ExitStream",
                         value_field="bytes"),)),
    "rend_taxonomy": StatisticDef(
        name="rend_taxonomy", protocol="privcount", role="rend",
        action="rendezvous_connections",
        subs=(
            # the relay at the rendezvous point carries both spliced sides
            SubCounter("circuits_rp", "rend_circuits_rp",
                       "RendezvousCircuitEnd", scale=2),
            SubCounter("succeeded", "rend_succeeded", "RendezvousCircuitEnd",
                       match=_match_outcome("succeeded")),
            SubCounter("conn_closed", "rend_conn_closed",
                       "RendezvousCircuitEnd",
                       match=_match_outcome("conn_closed")),
            SubCounter("expired", "rend_expired", "RendezvousCircuitEnd",
                       match=_match_outcome("expired")),
        )),
    "rend_cells": StatisticDef(
        name="rend_cells", protocol="privcount", role="rend",
        action="rendezvous_data_bytes",
        subs=(SubCounter("total", "rend_cells", "RendezvousCircuitEnd",
                         value_field="cells"),)),
    "unique_client_ips": StatisticDef(
        name="unique_client_ips", protocol="psc", role="guard",
        action="unique_ips",
        items=_field_items("EntryConnection", "client_ip"),
        truth_key="unique_client_ips", network_method="range",
        universe_attr="ip_universe"),
    "unique_countries": StatisticDef(
        name="unique_countries", protocol="psc", role="guard",
        action="unique_ips",
        items=_field_items("EntryConnection", "country"),
        truth_key="unique_countries", network_method="range"),
    "unique_as": StatisticDef(
        name="unique_as", protocol="psc", role="guard",
        action="unique_ips",
        items=_field_items("EntryConnection", "asn"),
        truth_key="unique_as", network_method="range"),
    "unique_sld": StatisticDef(
        name="unique_sld", protocol="psc", role="exit",
        action="domains_connected", items=_sld_items,
        truth_key="unique_sld", network_method="range",
        universe_attr="domain_universe"),
    "onions_published": StatisticDef(
        name="onions_published", protocol="psc", role="hsdir",
        action="new_onion_addresses",
        items=_field_items("DescriptorPublish", "onion_address"),
        truth_key="onions_published", network_method="replicas",
        universe_attr="onion_universe"),
    "onions_fetched": StatisticDef(
        name="onions_fetched", protocol="psc", role="hsdir",
        action="descriptor_fetches",
        items=_field_items("DescriptorFetch", "onion_address"),
        truth_key="onions_fetched", network_method="replicas",
        universe_attr="onion_universe"),
}

_ROLE_WEIGHT_ATTR = {"guard": "guard_weight", "exit": "exit_weight",
                     "hsdir": "hsdir_weight", "rend": "rend_weight"}


def role_fraction(truth_config: GroundTruthConfig, role: str) -> float:
    """Summed network weight of the measured relays holding a role."""
    attr = _ROLE_WEIGHT_ATTR[role]
    return float(sum(getattr(r, attr) for r in truth_config.relays))


# ---------------------------------------------------------------------------
# deployment


@dataclass(frozen=True)
class DeploymentConfig:
    """Party layout plus everything a round needs besides its schedule."""

    truth_config: GroundTruthConfig
    privacy: PrivacyParams = PrivacyParams()
    bounds: ActionBounds = ActionBounds()
    n_share_keepers: int = 3
    n_computation_parties: int = 3
    n_data_collectors: int = 16
    relay_to_dc: tuple = ()      # ((relay_id, dc_id), ...); empty derives 1:1
    psc_bins: int = 2 ** 12
    psc_noise_per_cp: int | None = None   # None: calibrated from the budget
    escrow: bool = False
    transport: str = "memory"    # "memory" | "tcp"
    dropout_dcs: tuple = ()
    dropout_share_keepers: tuple = ()
    dropout_computation_parties: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.n_share_keepers < 1:
            raise ValueError("need at least one share keeper")
        if self.n_computation_parties < 1:
            raise ValueError("need at least one computation party")
        if self.n_data_collectors < 1:
            raise ValueError("need at least one data collector")
        if self.transport not in ("memory", "tcp"):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.psc_bins < 2 or self.psc_bins & (self.psc_bins - 1):
            raise ValueError("psc_bins must be a power of two >= 2")
        if self.psc_noise_per_cp is not None and self.psc_noise_per_cp < 0:
            raise ValueError("psc_noise_per_cp must be >= 0")
        mapping = self.relay_to_dc
        relay_ids = [r.relay_id for r in self.truth_config.relays]
        if not mapping:
            if len(relay_ids) > self.n_data_collectors:
                raise ValueError(
                    f"{len(relay_ids)} relays exceed "
                    f"{self.n_data_collectors} data collectors")
            mapping = tuple((rid, f"dc{i:02d}") for i, rid in enumerate(relay_ids))
            object.__setattr__(self, "relay_to_dc", mapping)
        assigned = {rid for rid, _ in mapping}
        missing = set(relay_ids) - assigned
        if missing:
            raise ValueError(f"relays without a data collector: {sorted(missing)}")
        dc_ids = set(self.dc_ids)
        bad = {dc for _, dc in mapping} - dc_ids
        if bad:
            raise ValueError(f"mapping names unknown data collectors: {sorted(bad)}")

    @property
    def dc_ids(self) -> tuple:
        return tuple(f"dc{i:02d}" for i in range(self.n_data_collectors))

    @property
    def sk_ids(self) -> tuple:
        return tuple(f"sk{i}" for i in range(self.n_share_keepers))

    @property
    def cp_ids(self) -> tuple:
        return tuple(f"cp{i}" for i in range(self.n_computation_parties))

    def relays_for_dc(self, dc_id: str) -> tuple:
        return tuple(rid for rid, dc in self.relay_to_dc if dc == dc_id)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["truth_config"]["relays"] = [asdict(r) for r in self.truth_config.relays]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "DeploymentConfig":
        doc = dict(doc)
        tc = dict(doc.pop("truth_config"))
        tc["relays"] = tuple(RelaySpec(**r) for r in tc.get("relays", ()))
        for key in ("domain_tlds", "rend_outcome_probs"):
            if key in tc:
                tc[key] = tuple(tc[key])
        doc["truth_config"] = GroundTruthConfig(**tc)
        doc["privacy"] = PrivacyParams(**doc.get("privacy", {}))
        doc["bounds"] = ActionBounds(**doc.get("bounds", {}))
        for key in ("relay_to_dc", "dropout_dcs", "dropout_share_keepers",
                    "dropout_computation_parties"):
            if key in doc:
                doc[key] = tuple(tuple(x) if isinstance(x, list) else x
                                 for x in doc[key])
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DeploymentConfig":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# reports


def _estimate_to_dict(est: Estimate | None):
    if est is None:
        return None
    return {"point": est.point, "ci95": list(est.ci95), "scope": est.scope,
            "method": est.method, "note": est.note}


def _estimate_from_dict(doc):
    if doc is None:
        return None
    return Estimate(point=doc["point"], ci95=tuple(doc["ci95"]),
                    scope=doc["scope"], method=doc.get("method", ""),
                    note=doc.get("note", ""))


@dataclass(frozen=True)
class StatEntry:
    """One scored measurement row."""

    statistic: str
    sub: str
    protocol: str
    truth: float | None
    local: Estimate | None
    network: Estimate | None
    fraction: float | None = None
    note: str = ""

    @property
    def covered(self):
        """True iff the network interval contains the truth; None when
        either side is missing. Derived, so it cannot disagree with the
        interval."""
        if self.truth is None or self.network is None:
            return None
        return bool(self.network.lo <= self.truth <= self.network.hi)

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "sub": self.sub,
                "protocol": self.protocol, "truth": self.truth,
                "local": _estimate_to_dict(self.local),
                "network": _estimate_to_dict(self.network),
                "fraction": self.fraction, "covered": self.covered,
                "note": self.note}

    @classmethod
    def from_dict(cls, doc: dict) -> "StatEntry":
        return cls(statistic=doc["statistic"], sub=doc["sub"],
                   protocol=doc["protocol"], truth=doc["truth"],
                   local=_estimate_from_dict(doc["local"]),
                   network=_estimate_from_dict(doc["network"]),
                   fraction=doc.get("fraction"), note=doc.get("note", ""))


@dataclass
class RoundReport:
    round_id: str
    protocol: str
    start: float
    end: float
    statistics: tuple
    entries: tuple
    noise_audit: tuple
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"round_id": self.round_id, "protocol": self.protocol,
                "start": self.start, "end": self.end,
                "statistics": sorted(self.statistics),
                "entries": [e.to_dict() for e in self.entries],
                "noise_audit": list(self.noise_audit),
                "extras": self.extras}

    @classmethod
    def from_dict(cls, doc: dict) -> "RoundReport":
        return cls(round_id=doc["round_id"], protocol=doc["protocol"],
                   start=doc["start"], end=doc["end"],
                   statistics=tuple(doc["statistics"]),
                   entries=tuple(StatEntry.from_dict(e) for e in doc["entries"]),
                   noise_audit=tuple(doc["noise_audit"]),
                   extras=doc.get("extras", {}))


@dataclass
class RunReport:
    seed: int
    rounds: list
    schedule_audit: dict
    coverage: dict

    def entries(self):
        return [e for r in self.rounds for e in r.entries]

    def to_json(self, indent: int | None = 2) -> str:
        doc = {"seed": self.seed,
               "rounds": [r.to_dict() for r in self.rounds],
               "schedule_audit": self.schedule_audit,
               "coverage": self.coverage}
        return json.dumps(doc, sort_keys=True, indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        doc = json.loads(text)
        return cls(seed=doc["seed"],
                   rounds=[RoundReport.from_dict(r) for r in doc["rounds"]],
                   schedule_audit=doc["schedule_audit"],
                   coverage=doc["coverage"])


def _coverage_summary(entries) -> dict:
    scored = [e for e in entries if e.covered is not None]
    n_cov = sum(1 for e in scored if e.covered)
    frac = n_cov / len(scored) if scored else None
    return {"scored": len(scored), "covered": n_cov, "fraction": frac}


# ---------------------------------------------------------------------------
# round execution


def _round_days(round_: Round, window: int) -> int:
    return max(1, int(math.ceil((round_.end - round_.start) / window - 1e-9)))


def _network_estimate(defn: StatisticDef, local: Estimate,
                      config: DeploymentConfig, fraction: float):
    if fraction <= 0.0:
        return None, f"no measured relay holds the {defn.role} role"
    if defn.network_method == "fraction":
        return extrapolate_by_fraction(local, fraction), ""
    if defn.network_method == "range":
        cap = (getattr(config.truth_config, defn.universe_attr)
               if defn.universe_attr else None)
        base = range_bound(local.point, fraction, universe_cap=cap)
        # the hard range assumes an exact local count; a noisy local
        # estimate widens it by its own interval
        lo = min(base.lo, max(local.lo, 0.0))
        hi = max(base.hi, local.hi / fraction)
        if cap is not None:
            hi = min(hi, float(cap))
        return Estimate(point=base.point, ci95=(lo, hi), scope="network",
                        method=base.method, note=local.note or base.note), ""
    if defn.network_method == "replicas":
        # a descriptor on R independently placed replicas is seen with
        # probability 1-(1-w)^R; dividing by w * divisor inverts that
        replicas = config.truth_config.onion_replicas
        divisor = -math.expm1(replicas * math.log1p(-fraction)) / fraction
        return hsdir_extrapolate(local, fraction, replication_divisor=divisor), ""
    raise ValueError(f"unknown network method {defn.network_method!r}")


def _via_tcp(messages, kind):
    collector = TcpCollector(kind)
    send_messages(collector.port, list(messages))
    collector.close()
    return collector.received


def _dc_streams(config: DeploymentConfig, trace: Trace) -> dict:
    streams = {}
    for dc_id in config.dc_ids:
        evs = []
        for rid in config.relays_for_dc(dc_id):
            if rid in trace.relay_ids:
                evs.extend(trace.events_for_relay(rid))
        evs.sort(key=lambda e: (e.t, e.seq))
        streams[dc_id] = tuple(evs)
    return streams


def _run_privcount_round(config: DeploymentConfig, round_: Round,
                         streams: dict, truth: TruthSummary,
                         seed: int) -> RoundReport:
    stats = sorted(round_.statistics)
    budget = allocate_privacy_budget(stats, config.privacy)
    days = _round_days(round_, config.privacy.adjacency_window)
    specs, noise_specs, rows = [], {}, []
    for stat in stats:
        defn = CATALOG[stat]
        eps, delta = budget[stat]
        k = len(defn.subs)
        for sub in defn.subs:
            cid = f"{stat}.{sub.sub}"
            specs.append(CounterSpec(
                counter_id=cid, event_kind=sub.event_kind, action=defn.action,
                match=sub.match, value_field=sub.value_field, scale=sub.scale))
            noise_specs[cid] = noise_spec_for(
                cid, defn.action, eps / k, delta / k, bounds=config.bounds,
                days=days)
            rows.append((defn, sub, cid))

    bad_sks = set(config.dropout_share_keepers) & set(config.sk_ids)
    if bad_sks:
        raise PartyFailure(
            f"share keeper loss is unrecoverable: {sorted(bad_sks)}")

    sks = {sid: ShareKeeper(sid) for sid in config.sk_ids}
    ts = TallyServer()
    dropped = set(config.dropout_dcs) & set(config.dc_ids)
    for dc_id in config.dc_ids:
        dc = DataCollector(dc_id, seed=stable_key(f"{seed}/{dc_id}"))
        for sk_id, msgs in dc.init_round(round_.round_id, specs, noise_specs,
                                         config.sk_ids).items():
            sks[sk_id].receive(dc_id, msgs)
        for ev in streams[dc_id]:
            dc.observe(ev)
        if dc_id in dropped:
            continue
        msgs = dc.end_round()
        if config.transport == "tcp":
            msgs = _via_tcp(msgs, ValueMessage)
        ts.receive_dc(dc_id, msgs)
    modulus = specs[0].modulus
    for sk_id in config.sk_ids:
        msgs, incomplete = sks[sk_id].share_sums(round_.round_id,
                                                 config.dc_ids, modulus)
        if config.transport == "tcp":
            msgs = _via_tcp(msgs, ValueMessage)
        ts.receive_sk(sk_id, msgs)
        ts.flag_incomplete(round_.round_id, incomplete)
    result = ts.aggregate(round_.round_id, config.dc_ids, config.sk_ids, modulus)
    if specs and not result.totals and not dropped:
        raise PartyFailure("no counter survived aggregation")

    n_dcs = len(config.dc_ids)
    entries = []
    for defn, sub, cid in rows:
        fraction = role_fraction(config.truth_config, defn.role)
        truth_val = truth.totals.get(sub.truth_key)
        truth_val = float(truth_val) if truth_val is not None else None
        if cid in result.incomplete or cid not in result.totals:
            entries.append(StatEntry(
                statistic=defn.name, sub=sub.sub, protocol="privcount",
                truth=truth_val, local=None, network=None, fraction=fraction,
                note="counter dropped: incomplete party reports"))
            continue
        # every DC adds one independent noise draw to the counter
        sigma = quadrature_sigma([noise_specs[cid].sigma] * n_dcs)
        local = normal_ci(float(result.totals[cid]), sigma)
        network, note = _network_estimate(defn, local, config, fraction)
        entries.append(StatEntry(
            statistic=defn.name, sub=sub.sub, protocol="privcount",
            truth=truth_val, local=local, network=network, fraction=fraction,
            note=note))

    extras = {"noisy_totals": {cid: result.totals[cid]
                               for cid in sorted(result.totals)},
              "incomplete_counters": sorted(result.incomplete),
              "dropped_dcs": sorted(dropped)}
    if "rend_taxonomy" in stats:
        shares, denom = {}, 0.0
        for out in ("succeeded", "conn_closed", "expired"):
            v = max(float(result.totals.get(f"rend_taxonomy.{out}", 0.0)), 0.0)
            shares[out] = v
            denom += v
        if denom > 0:
            extras["outcome_shares"] = {k: v / denom for k, v in shares.items()}
    audit = [noise_specs[cid].to_dict() | {"statistic": defn.name, "days": days}
             for defn, sub, cid in rows]
    return RoundReport(round_id=round_.round_id, protocol="privcount",
                       start=round_.start, end=round_.end,
                       statistics=tuple(stats), entries=tuple(entries),
                       noise_audit=tuple(audit), extras=extras)


def _run_psc_round(config: DeploymentConfig, round_: Round, streams: dict,
                   truth: TruthSummary, seed: int) -> RoundReport:
    stats = sorted(round_.statistics)
    budget = allocate_privacy_budget(stats, config.privacy)
    days = _round_days(round_, config.privacy.adjacency_window)
    bad_cps = set(config.dropout_computation_parties) & set(config.cp_ids)
    if bad_cps:
        raise PartyFailure(
            f"computation party loss halts joint decryption: {sorted(bad_cps)}")
    dropped = set(config.dropout_dcs) & set(config.dc_ids)
    live_dcs = [d for d in config.dc_ids if d not in dropped]

    entries, audit, extras = [], [], {"raw_counts": {}, "dropped_dcs": sorted(dropped)}
    n_cps = config.n_computation_parties
    for stat in stats:
        defn = CATALOG[stat]
        eps, delta = budget[stat]
        fraction = role_fraction(config.truth_config, defn.role)
        truth_val = truth.totals.get(defn.truth_key)
        truth_val = float(truth_val) if truth_val is not None else None
        if fraction <= 0.0:
            entries.append(StatEntry(
                statistic=stat, sub="", protocol="psc", truth=truth_val,
                local=None, network=None, fraction=fraction,
                note=f"no measured relay holds the {defn.role} role"))
            continue
        sens = sensitivity_for_counter(defn.action, config.bounds, days)
        if config.psc_noise_per_cp is not None:
            noise = NoiseBinParams(config.psc_noise_per_cp)
        else:
            noise = NoiseBinParams.from_privacy(eps, delta, sens, n_cps)
        itemsets = [defn.items(streams[d], config) for d in live_dcs]
        result = run_psc_round(itemsets, b=config.psc_bins, n_cps=n_cps,
                               noise=noise, seed=stable_key(f"{seed}:{stat}"),
                               escrow=config.escrow)
        extras["raw_counts"][stat] = result.raw_count
        if config.escrow:
            extras.setdefault("escrow", {})[stat] = {
                "occupied_truth": result.occupied_truth,
                "noise_flipped_truth": result.noise_flipped_truth}
        audit.append({"statistic": stat, "protocol": "psc",
                      "b": config.psc_bins, "n_noise_per_cp": noise.n_noise,
                      "n_noise_total": result.n_noise_total,
                      "epsilon_share": eps, "delta_share": delta,
                      "sensitivity": sens, "days": days,
                      "calibrated": config.psc_noise_per_cp is None})
        try:
            local = estimate_from_round(result)
        except ValueError as err:
            entries.append(StatEntry(
                statistic=stat, sub="", protocol="psc", truth=truth_val,
                local=None, network=None, fraction=fraction,
                note=f"cardinality interval unavailable: {err}"))
            continue
        network, note = _network_estimate(defn, local, config, fraction)
        entries.append(StatEntry(
            statistic=stat, sub="", protocol="psc", truth=truth_val,
            local=local, network=network, fraction=fraction, note=note))
    return RoundReport(round_id=round_.round_id, protocol="psc",
                       start=round_.start, end=round_.end,
                       statistics=tuple(stats), entries=tuple(entries),
                       noise_audit=tuple(audit), extras=extras)


def run_round(config: DeploymentConfig, round_: Round, trace: Trace = None,
              truth: TruthSummary = None) -> RoundReport:
    """Execute one measurement round and score it against the truth.

    Generates the synthetic world on demand when trace/truth are not
    supplied by a surrounding campaign.
    """
    unknown = sorted(s for s in round_.statistics if s not in CATALOG)
    if unknown:
        raise ValueError(f"unknown statistics: {unknown}")
    mismatched = sorted(s for s in round_.statistics
                        if CATALOG[s].protocol != round_.protocol)
    if mismatched:
        raise ValueError(
            f"round {round_.round_id} is {round_.protocol} but {mismatched} "
            f"are not")
    if not round_.statistics:
        raise ValueError(f"round {round_.round_id} measures nothing")
    if trace is None or truth is None:
        trace, truth = generate_ground_truth(config.truth_config)
    streams = _dc_streams(config, trace)
    seed = stable_key(f"{config.seed}:{round_.round_id}")
    if round_.protocol == "privcount":
        return _run_privcount_round(config, round_, streams, truth, seed)
    return _run_psc_round(config, round_, streams, truth, seed)


def run_campaign(config: DeploymentConfig, rounds) -> RunReport:
    """Validate the schedule, then run its rounds in start order.

    Raises ScheduleError before any round executes when the safety
    checks fail; an empty schedule yields an empty report.
    """
    rounds = list(rounds)
    violations = validate_schedule(rounds, config.privacy)
    if violations:
        raise ScheduleError(violations)
    audit = {"validated": True, "n_rounds": len(rounds), "violations": []}
    if not rounds:
        return RunReport(seed=config.seed, rounds=[], schedule_audit=audit,
                         coverage=_coverage_summary([]))
    trace, truth = generate_ground_truth(config.truth_config)
    streams = _dc_streams(config, trace)
    reports = []
    for round_ in sorted(rounds, key=lambda r: (r.start, r.end, r.round_id)):
        unknown = sorted(s for s in round_.statistics if s not in CATALOG)
        if unknown:
            raise ValueError(f"unknown statistics: {unknown}")
        seed = stable_key(f"{config.seed}:{round_.round_id}")
        if round_.protocol == "privcount":
            reports.append(_run_privcount_round(config, round_, streams,
                                                truth, seed))
        else:
            reports.append(_run_psc_round(config, round_, streams, truth, seed))
    entries = [e for r in reports for e in r.entries]
    return RunReport(seed=config.seed, rounds=reports, schedule_audit=audit,
                     coverage=_coverage_summary(entries))


# ---------------------------------------------------------------------------
# schedules on disk, sample deployment


def save_schedule(rounds, path) -> None:
    doc = [{"round_id": r.round_id, "protocol": r.protocol,
            "statistics": sorted(r.statistics), "start": r.start,
            "end": r.end} for r in rounds]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_schedule(path) -> list:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    return [Round(round_id=r["round_id"], protocol=r["protocol"],
                  statistics=frozenset(r["statistics"]), start=float(r["start"]),
                  end=float(r["end"])) for r in doc]


def sample_deployment(seed: int = 7) -> DeploymentConfig:
    """Small mixed-role network that runs a full campaign in seconds."""
    truth_config = GroundTruthConfig(
        n_clients=3000,
        guards_per_selective_client=3,
        n_promiscuous_clients=50,
        relays=(
            RelaySpec("guard-a", guard=True, guard_weight=0.05),
            RelaySpec("guard-b", guard=True, guard_weight=0.10),
            RelaySpec("exit-a", exit=True, exit_weight=0.08),
            RelaySpec("exit-b", exit=True, exit_weight=0.12),
            RelaySpec("hsdir-a", hsdir=True, hsdir_weight=0.05),
            RelaySpec("rp-a", rendezvous=True, rend_weight=0.10),
        ),
        visits_per_client=4.0,
        ipv6_target_fraction=0.25,
        domain_universe=500,
        onion_universe=300,
        n_rend_circuits=2000,
        rng_seed=seed)
    # budget-calibrated set noise needs millions of bins at epsilon shares
    # this small; the demo pins a modest bin count instead
    return DeploymentConfig(truth_config=truth_config, psc_noise_per_cp=400,
                            seed=seed)


def sample_schedule() -> list:
    day = 86400.0
    return [
        Round(round_id="r1-counters", protocol="privcount",
              statistics=frozenset({"exit_taxonomy", "exit_bytes",
                                    "rend_taxonomy", "rend_cells"}),
              start=0.0, end=day),
        Round(round_id="r2-sets", protocol="psc",
              statistics=frozenset({"unique_client_ips", "unique_countries",
                                    "unique_as", "unique_sld",
                                    "onions_published", "onions_fetched"}),
              start=2 * day, end=3 * day),
    ]
