"""Noise calibration and round-schedule safety rules.

Per-action daily bounds define the protected amount of user activity;
together with an (epsilon, delta) budget they fix the Gaussian noise
magnitude added to every counter. Schedules of measurement rounds are
checked against two safety rules: the two protocols never run in
parallel, and rounds measuring different statistic sets are separated
by at least one adjacency window.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.stats import norm

DAY_SECONDS = 86400


@dataclass(frozen=True)
class ActionBounds:
    """Daily per-user activity limits defining adjacency.

    Byte bounds are decimal megabytes. new_ips_day1/new_ips_2plus
    express the multi-day rule for distinct client IPs: a single user
    may add 4 IPs on the first day and 3 on each later day.
    """

    domains_connected: int = 20
    exit_data_bytes: int = 400_000_000
    new_ips_day1: int = 4
    new_ips_2plus: int = 3
    tcp_connections: int = 12
    entry_circuits: int = 651
    entry_data_bytes: int = 407_000_000
    descriptor_uploads: int = 450
    new_onion_addresses: int = 3
    descriptor_fetches: int = 30
    rendezvous_connections: int = 180
    rendezvous_data_bytes: int = 400_000_000

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"action bound {f.name} must be a positive integer, got {v!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ActionBounds":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "ActionBounds":
        return cls.from_dict(json.loads(s))


#: Actions a counter may declare, mapping to the bound that caps one
#: user's daily contribution to it. "disabled" marks a counter no
#: bounded action ever increments.
ACTIONS = tuple(f.name for f in fields(ActionBounds)) + ("unique_ips", "disabled")


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float = 0.3
    delta: float = 1e-11
    adjacency_window: int = DAY_SECONDS

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.adjacency_window <= 0:
            raise ValueError("adjacency_window must be positive")


def unique_ip_sensitivity(bounds: ActionBounds, days: int) -> int:
    """One user's worst-case distinct-IP contribution over a round of `days` days."""
    if days < 1:
        raise ValueError(f"days must be >= 1, got {days}")
    return bounds.new_ips_day1 + bounds.new_ips_2plus * (days - 1)


def sensitivity_for_counter(action: str, bounds: ActionBounds, days: int = 1) -> float:
    """Sensitivity of a counter declared to count `action`.

    One bounded user action moves at most one bin of a histogram
    family, so the per-counter sensitivity equals the daily bound
    itself (times the day rule for multi-day unique-IP rounds).
    """
    if action == "disabled":
        return 0.0
    if action == "unique_ips":
        return float(unique_ip_sensitivity(bounds, days))
    if action in ACTIONS:
        base = getattr(bounds, action)
        return float(base * days) if days > 1 else float(base)
    raise ValueError(f"counter declares unknown action {action!r}")


def gaussian_sigma(sensitivity: float, epsilon: float, delta: float) -> float:
    """Gaussian-mechanism noise scale sigma = sens * sqrt(2 ln(1.25/delta)) / epsilon."""
    if sensitivity < 0:
        raise ValueError(f"sensitivity must be >= 0, got {sensitivity}")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    return sensitivity * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


def dp_delta_bound(sigma: float, epsilon: float, sensitivity: float = 1.0,
                   grid: np.ndarray | None = None) -> float:
    """Largest observed DP excess max_S Pr[M(D1) in S] - e^eps * Pr[M(D0) in S].

    Evaluated over one-sided threshold sets [t, inf) for outputs of the
    Gaussian mechanism on adjacent inputs 0 and `sensitivity` (the
    worst sets for a Gaussian likelihood ratio are of this form). A
    correctly calibrated sigma keeps the returned value <= delta.
    """
    if grid is None:
        grid = np.linspace(-12.0 * sigma, 12.0 * sigma + sensitivity, 200_001)
    # Both adjacency directions; by symmetry threshold sets suffice.
    excess_hi = norm.sf(grid, loc=sensitivity, scale=sigma) - math.exp(epsilon) * norm.sf(grid, loc=0.0, scale=sigma)
    excess_lo = norm.cdf(grid, loc=0.0, scale=sigma) - math.exp(epsilon) * norm.cdf(grid, loc=sensitivity, scale=sigma)
    return float(max(excess_hi.max(), excess_lo.max()))


@dataclass(frozen=True)
class NoiseSpec:
    """Frozen record of how one counter's noise was calibrated."""

    counter_id: str
    sensitivity: float
    sigma: float
    epsilon_share: float
    delta_share: float

    def __post_init__(self):
        if self.sensitivity < 0 or self.sigma < 0:
            raise ValueError("sensitivity and sigma must be >= 0")
        want = gaussian_sigma(self.sensitivity, self.epsilon_share, self.delta_share)
        if not math.isclose(self.sigma, want, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(
                f"sigma {self.sigma} inconsistent with mechanism value {want} "
                f"for (sens={self.sensitivity}, eps={self.epsilon_share}, delta={self.delta_share})")

    def to_dict(self) -> dict:
        return asdict(self)


def allocate_privacy_budget(round_statistics: list[str],
                            params: PrivacyParams | None = None) -> dict[str, tuple[float, float]]:
    """Equal (epsilon, delta) split across the statistics of one round.

    The deployment budget is fixed per round; how to divide it among
    simultaneous statistics is our choice, recorded in the audit log.
    """
    if params is None:
        params = PrivacyParams()
    stats = list(round_statistics)
    if not stats:
        raise ValueError("round must measure at least one statistic")
    if len(set(stats)) != len(stats):
        raise ValueError("duplicate statistic in round")
    k = len(stats)
    return {s: (params.epsilon / k, params.delta / k) for s in stats}


def noise_spec_for(counter_id: str, action: str, epsilon_share: float,
                   delta_share: float, bounds: ActionBounds | None = None,
                   days: int = 1) -> NoiseSpec:
    """Calibrate one counter: look up sensitivity, compute sigma, freeze the record."""
    if bounds is None:
        bounds = ActionBounds()
    sens = sensitivity_for_counter(action, bounds, days)
    sigma = gaussian_sigma(sens, epsilon_share, delta_share)
    return NoiseSpec(counter_id=counter_id, sensitivity=sens, sigma=sigma,
                     epsilon_share=epsilon_share, delta_share=delta_share)


# ---------------------------------------------------------------------------
# Round schedules


@dataclass(frozen=True)
class Round:
    """One scheduled measurement: a protocol, a statistic set, a time window."""

    round_id: str
    protocol: str  # "privcount" | "psc"
    statistics: frozenset
    start: float
    end: float

    def __post_init__(self):
        if self.protocol not in ("privcount", "psc"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if not self.end > self.start:
            raise ValueError(f"round {self.round_id}: end must be after start")
        object.__setattr__(self, "statistics", frozenset(self.statistics))


@dataclass(frozen=True)
class ScheduleViolation:
    kind: str  # "parallel protocols" | "gap < 24h"
    round_ids: tuple
    detail: str

    def __str__(self):
        return f"{self.kind}: rounds {', '.join(self.round_ids)} ({self.detail})"


def _overlap(a: Round, b: Round) -> bool:
    return a.start < b.end and b.start < a.end


def validate_schedule(rounds: list[Round],
                      params: PrivacyParams | None = None) -> list[ScheduleViolation]:
    """Check every round pair against the two safety rules.

    Returns the (possibly empty) violation list rather than raising, so
    callers can report all problems at once. Rule 1: a blinded-counter
    round and a set-union round must never overlap in time. Rule 2: two
    rounds measuring distinct statistic sets must be separated by at
    least the adjacency window (default 24 simulated hours).
    """
    if params is None:
        params = PrivacyParams()
    gap_min = params.adjacency_window
    out = []
    ordered = sorted(rounds, key=lambda r: (r.start, r.end, r.round_id))
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if a.protocol != b.protocol and _overlap(a, b):
                out.append(ScheduleViolation(
                    kind="parallel protocols",
                    round_ids=(a.round_id, b.round_id),
                    detail=f"{a.protocol} [{a.start}, {a.end}) overlaps {b.protocol} [{b.start}, {b.end})"))
            if a.statistics != b.statistics:
                gap = max(a.start - b.end, b.start - a.end)
                if gap < gap_min:
                    out.append(ScheduleViolation(
                        kind="gap < 24h",
                        round_ids=(a.round_id, b.round_id),
                        detail=f"distinct statistic sets separated by {gap:g}s < {gap_min}s"))
    return out
