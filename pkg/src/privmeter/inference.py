"""Statistical inference: local noisy aggregates to network-wide estimates.

Estimators here share one convention: measured inputs arrive as
Estimate records (point plus 95% interval), outputs are new Estimate
records tagged with the producing method and a local/network scope.
Set-cardinality extrapolations treat the locally observed count as a
hard lower bound on any network-wide value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import brentq

#: two-sided 95% normal quantile as conventionally rounded in reports
Z95 = 1.96

_SCOPES = ("local", "network")


@dataclass(frozen=True)
class Estimate:
    """Point estimate with a 95% interval, scope, and method tag."""

    point: float
    ci95: tuple
    scope: str = "local"
    method: str = ""
    note: str = ""

    def __post_init__(self):
        lo, hi = self.ci95
        if not lo <= hi:
            raise ValueError(f"interval reversed: [{lo}, {hi}]")
        if self.scope not in _SCOPES:
            raise ValueError(f"scope must be one of {_SCOPES}")
        # a clamped point may sit outside its raw interval, but then the
        # note has to say so
        if not (lo <= self.point <= hi) and not self.note:
            raise ValueError(f"point {self.point} outside [{lo}, {hi}] "
                             "without an explanatory note")
        object.__setattr__(self, "ci95", (float(lo), float(hi)))

    @property
    def lo(self) -> float:
        return self.ci95[0]

    @property
    def hi(self) -> float:
        return self.ci95[1]

    def to_json(self) -> str:
        return json.dumps({"point": self.point, "ci95": list(self.ci95),
                           "scope": self.scope, "method": self.method,
                           "note": self.note})

    @classmethod
    def from_json(cls, text: str) -> "Estimate":
        d = json.loads(text)
        return cls(point=d["point"], ci95=tuple(d["ci95"]), scope=d["scope"],
                   method=d.get("method", ""), note=d.get("note", ""))


def quadrature_sigma(sigmas) -> float:
    """Combined sigma of independent noise draws."""
    arr = np.asarray(list(sigmas), dtype=float)
    if (arr < 0).any():
        raise ValueError("sigma must be >= 0")
    return float(np.sqrt((arr * arr).sum()))


def normal_ci(noisy_total: float, sigma: float, scope: str = "local") -> Estimate:
    """Interval for a count observed through additive N(0, sigma^2) noise."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    lo = noisy_total - Z95 * sigma
    hi = noisy_total + Z95 * sigma
    point, note = noisy_total, ""
    if noisy_total < 0:
        point, note = 0.0, "negative noisy total; point clamped at 0"
    return Estimate(point=point, ci95=(lo, hi), scope=scope,
                    method="normal_ci", note=note)


def extrapolate_by_fraction(estimate: Estimate, fraction: float) -> Estimate:
    """Scale a local measurement by the measuring fraction.

    Exactly linear: point and both interval endpoints are divided by
    the fraction, nothing else moves.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    return Estimate(point=estimate.point / fraction,
                    ci95=(estimate.lo / fraction, estimate.hi / fraction),
                    scope="network", method="extrapolate_by_fraction",
                    note=estimate.note)


# ---------------------------------------------------------------------------
# occupancy (balls in bins) machinery

def occupancy_mean(n, b: int):
    """E[occupied bins] after n balls into b bins: b(1-(1-1/b)^n)."""
    n = np.asarray(n, dtype=float)
    return b * -np.expm1(n * np.log1p(-1.0 / b))


def occupancy_var(n, b: int):
    """Exact variance of the occupied-bin count."""
    n = np.asarray(n, dtype=float)
    a1 = np.exp(n * np.log1p(-1.0 / b))        # (1-1/b)^n
    a2 = np.exp(n * np.log1p(-2.0 / b))        # (1-2/b)^n
    return b * a1 + b * (b - 1) * a2 - b * b * a1 * a1


def occupancy_slope(n, b: int):
    """d/dn of occupancy_mean, used for delta-method variance transfer."""
    n = np.asarray(n, dtype=float)
    l = np.log1p(-1.0 / b)
    return -b * l * np.exp(n * l)


def invert_occupancy(occupied: float, b: int) -> float:
    """Collision-corrected ball count with E[occupied] = the given value."""
    if occupied <= 0:
        return 0.0
    if occupied >= b:
        raise ValueError(f"occupied count {occupied} needs more than b={b} bins")
    return math.log1p(-occupied / b) / math.log1p(-1.0 / b)


#: above this b*n product the exact occupancy recurrence gives way to a
#: normal approximation
EXACT_OCCUPANCY_LIMIT = 10 ** 8


class PscCiTable:
    """Acceptance regions of raw counts for candidate cardinalities.

    For each candidate n, region(n) = central confidence region of
    raw = occupied(b, n) + Binomial(n_noise_total, 1/2). Regions are
    computed by the occupancy recurrence
    P(k|n) = P(k|n-1) * k/b + P(k-1|n-1) * (b-k+1)/b convolved with the
    binomial mass, exactly while b*n stays under EXACT_OCCUPANCY_LIMIT
    and by normal approximation beyond. Since raw counts are
    stochastically increasing in n, both region endpoints are
    nondecreasing and the confidence set for an observed raw count is a
    contiguous interval.
    """

    #: pmf snapshot spacing for rewinding the recurrence to smaller n
    CHECKPOINT_EVERY = 512

    def __init__(self, b: int, n_noise_total: int, confidence: float = 0.95):
        if b < 1:
            raise ValueError("b must be >= 1")
        if n_noise_total < 0:
            raise ValueError("n_noise_total must be >= 0")
        if not 0 < confidence < 1:
            raise ValueError("confidence must be in (0, 1)")
        self.b = b
        self.n_noise = n_noise_total
        self.confidence = confidence
        self._alpha = (1.0 - confidence) / 2.0
        self._z = float(stats.norm.ppf(1.0 - self._alpha))
        noise_pmf = (stats.binom.pmf(np.arange(n_noise_total + 1),
                                     n_noise_total, 0.5)
                     if n_noise_total else np.array([1.0]))
        self._noise_cdf = np.cumsum(noise_pmf)
        self._occ_pmf = np.array([1.0])   # occupancy pmf at current n
        self._n = 0
        self._ckpt = {0: self._occ_pmf.copy()}
        self._regions = {}

    def _cdf_at(self, r: int) -> float:
        """P(occupied + noise <= r) at the current occupancy pmf."""
        pmf = self._occ_pmf
        k_max = min(r, pmf.size - 1)
        if k_max < 0:
            return 0.0
        idx = np.minimum(r - np.arange(k_max + 1), self.n_noise)
        return float(np.dot(pmf[:k_max + 1], self._noise_cdf[idx]))

    def _quantile(self, target: float) -> int:
        """Smallest r with P(occupied + noise <= r) >= target."""
        lo, hi = -1, self._occ_pmf.size - 1 + self.n_noise
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._cdf_at(mid) >= target:
                hi = mid
            else:
                lo = mid
        return hi

    def _exact_region(self):
        return self._quantile(self._alpha), self._quantile(1.0 - self._alpha)

    def _normal_region(self, n: int):
        m = float(occupancy_mean(n, self.b)) + self.n_noise / 2.0
        s = math.sqrt(float(occupancy_var(n, self.b)) + self.n_noise / 4.0)
        return (int(math.floor(m - self._z * s)), int(math.ceil(m + self._z * s)))

    def _advance(self) -> None:
        self._n += 1
        p = self._occ_pmf
        k = np.arange(p.size)
        grown = np.zeros(min(p.size + 1, self.b + 1))
        grown[:p.size] += p * k / self.b
        shifted = p * (self.b - k) / self.b
        grown[1:p.size + 1] += shifted[:grown.size - 1]
        self._occ_pmf = grown
        if self._n % self.CHECKPOINT_EVERY == 0 and self._n not in self._ckpt:
            self._ckpt[self._n] = grown.copy()

    def _goto(self, n: int) -> None:
        if n < self._n:
            base = (n // self.CHECKPOINT_EVERY) * self.CHECKPOINT_EVERY
            while base not in self._ckpt:
                base -= self.CHECKPOINT_EVERY
            self._occ_pmf = self._ckpt[base].copy()
            self._n = base
        while self._n < n:
            self._advance()

    def region(self, n: int):
        if n in self._regions:
            return self._regions[n]
        if n * self.b > EXACT_OCCUPANCY_LIMIT:
            out = self._normal_region(n)
        else:
            self._goto(n)
            out = self._exact_region()
        self._regions[n] = out
        return out

    def ci(self, raw: int):
        """Interval of candidate n whose region contains the raw count.

        Both region endpoints are nondecreasing in n, so the endpoints
        of the confidence set are found by boundary bisection.
        """
        raw = int(raw)
        if raw < 0 or raw > self.b + self.n_noise:
            raise ValueError(f"raw count {raw} outside [0, b + noise bins]")
        noise_floor = (int(stats.binom.ppf(self._alpha, self.n_noise, 0.5))
                       if self.n_noise else 0)
        if raw >= self.b + noise_floor:
            raise ValueError(f"raw count {raw} cannot upper-bound the "
                             "cardinality: bins saturated")

        def hi_at(n):
            return self.region(n)[1]

        def lo_at(n):
            return self.region(n)[0]

        # smallest n with hi(n) >= raw
        if hi_at(0) >= raw:
            n_min = 0
        else:
            a, c = 0, 1
            while hi_at(c) < raw:
                a, c = c, c * 2
            while c - a > 1:
                mid = (a + c) // 2
                if hi_at(mid) >= raw:
                    c = mid
                else:
                    a = mid
            n_min = c
        if lo_at(n_min) > raw:
            raise ValueError(f"raw count {raw} infeasible for b={self.b}, "
                             f"n_noise={self.n_noise}")
        # largest n with lo(n) <= raw
        a, c = n_min, max(2 * n_min, 1)
        while lo_at(c) <= raw:
            a, c = c, c * 2
        while c - a > 1:
            mid = (a + c) // 2
            if lo_at(mid) <= raw:
                a = mid
            else:
                c = mid
        return n_min, a


_PSC_TABLES = {}


def psc_exact_ci(raw: int, b: int, n_noise_total: int,
                 confidence: float = 0.95) -> Estimate:
    """Cardinality interval for one raw non-zero-bin count."""
    key = (b, n_noise_total, confidence)
    if key not in _PSC_TABLES:
        if len(_PSC_TABLES) > 16:
            _PSC_TABLES.clear()
        _PSC_TABLES[key] = PscCiTable(b, n_noise_total, confidence)
    table = _PSC_TABLES[key]
    lo, hi = table.ci(int(raw))
    centered = max(float(raw) - n_noise_total / 2.0, 0.0)
    point = invert_occupancy(min(centered, b - 1), b) if centered < b else float(hi)
    point = min(max(point, float(lo)), float(hi))
    return Estimate(point=point, ci95=(float(lo), float(hi)), scope="local",
                    method="psc_exact_ci")


# ---------------------------------------------------------------------------
# power-law Monte-Carlo extrapolation of unique counts

@dataclass(frozen=True)
class PowerLawModel:
    """One candidate: visits follow a Zipf law with the given exponent
    over a fixed universe, scaled so the expected network-wide unique
    count equals `population`. The visit process is Poisson with the
    intensity implied by that scaling."""

    alpha: float
    population: int
    universe: int = 10 ** 6

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not 1 <= self.population < self.universe:
            raise ValueError("population must be in [1, universe)")


_ZIPF_CACHE = {}


def _zipf_weights(alpha: float, universe: int) -> np.ndarray:
    key = (round(alpha, 12), universe)
    if key not in _ZIPF_CACHE:
        if len(_ZIPF_CACHE) > 32:
            _ZIPF_CACHE.clear()
        w = np.arange(1, universe + 1, dtype=float) ** -alpha
        _ZIPF_CACHE[key] = w / w.sum()
    return _ZIPF_CACHE[key]


def _unique_mean(lam: float, q: np.ndarray) -> float:
    return float(-np.expm1(-q * lam).sum())


def _unique_stats(lam: float, q: np.ndarray):
    """(mean, d mean/d lam, sd) of the unique count at intensity lam."""
    miss = np.exp(-q * lam)
    mean = float((1.0 - miss).sum())
    slope = float((q * miss).sum())
    var = float((miss * (1.0 - miss)).sum())
    return mean, slope, math.sqrt(var)


_INTENSITY_CACHE = {}


def _solve_intensity(target: float, q: np.ndarray) -> float:
    """Intensity lam with E[unique(lam)] = target (monotone in lam)."""
    if target <= 0:
        return 0.0
    if target >= q.size:
        raise ValueError(f"target {target} not below universe {q.size}")
    key = (float(target), q.size, float(q[-1]))
    if key in _INTENSITY_CACHE:
        return _INTENSITY_CACHE[key]
    # E[unique(lam)] <= lam, so the root is bracketed below by the target
    lo, hi = max(float(target), 1.0), max(float(target), 1.0)
    while _unique_mean(hi, q) < target:
        lo, hi = hi, hi * 4.0
        if hi > 1e18:
            raise ValueError("intensity solve diverged")
    out = float(brentq(lambda lam: _unique_mean(lam, q) - target,
                       lo, hi, rtol=1e-12))
    if len(_INTENSITY_CACHE) > 4096:
        _INTENSITY_CACHE.clear()
    _INTENSITY_CACHE[key] = out
    return out


_GRID_CACHE = {}


def prepare_mc_grid(models, fraction: float, trials: int = 200,
                    seed: int = 0) -> dict:
    """Per-candidate acceptance regions for the local unique count.

    For each model, the expected visit intensity is solved so the
    network-wide unique count matches the candidate population; each
    trial then draws the network visit total, thins it by the measuring
    fraction, and draws the local unique count from the Poissonized
    occupancy law. Regions are central 95% ranges of those draws.
    Cached, so one grid serves many observations at the same fraction.
    """
    models = list(models)
    if not models:
        raise ValueError("candidate grid is empty")
    cache_key = (tuple(models), float(fraction), trials, seed)
    if cache_key in _GRID_CACHE:
        return _GRID_CACHE[cache_key]
    root = np.random.SeedSequence(seed)
    out = {}
    for model, ss in zip(models, root.spawn(len(models))):
        q = _zipf_weights(model.alpha, model.universe)
        lam_net = _solve_intensity(float(model.population), q)
        lam_loc = lam_net * fraction
        mu, slope, sd = _unique_stats(lam_loc, q)
        rng = np.random.default_rng(ss)
        v_net = rng.poisson(lam_net, size=trials)
        v_loc = rng.binomial(v_net, fraction)
        draws = np.rint(mu + slope * (v_loc - lam_loc)
                        + rng.normal(0.0, sd, size=trials))
        draws = np.clip(draws, 0, model.universe)
        lo, hi = np.quantile(draws, [0.025, 0.975])
        out[model] = {"accept": (float(lo), float(hi)), "lam_net": lam_net,
                      "seed": list(ss.spawn_key), "mean_local": mu}
    if len(_GRID_CACHE) > 64:
        _GRID_CACHE.clear()
    _GRID_CACHE[cache_key] = out
    return out


def mc_unique_extrapolate(local: Estimate, fraction: float, models,
                          trials: int = 200, seed: int = 0,
                          audit: list = None) -> Estimate:
    """Network-wide unique count from a local one via a power-law grid.

    Feasible candidates are those whose simulated local-count region
    covers the observation; the interval spans their populations,
    clipped to the hard range [local, local/fraction].
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    x = float(local.point)
    if fraction == 1.0:
        return Estimate(point=x, ci95=local.ci95, scope="network",
                        method="mc_unique_extrapolate",
                        note="fraction 1: local measurement is network-wide")
    grid = prepare_mc_grid(models, fraction, trials=trials, seed=seed)
    feasible = []
    for model, info in grid.items():
        lo, hi = info["accept"]
        ok = lo <= x <= hi
        if audit is not None:
            audit.append({"alpha": model.alpha, "population": model.population,
                          "universe": model.universe, "accept_lo": lo,
                          "accept_hi": hi, "trial_seed": info["seed"],
                          "feasible": ok})
        if ok:
            feasible.append((model, info))
    if not feasible:
        fallback = range_bound(x, fraction)
        return Estimate(point=fallback.point, ci95=fallback.ci95,
                        scope="network", method="mc_unique_extrapolate",
                        note="no feasible grid candidate; range-bound fallback")
    best, _ = min(feasible, key=lambda mi: abs(mi[1]["mean_local"] - x))
    q = _zipf_weights(best.alpha, best.universe)
    lam_loc = _solve_intensity(min(x, q.size - 1), q)
    point = _unique_mean(lam_loc / fraction, q)
    lo = min(float(m.population) for m, _ in feasible)
    hi = max(float(m.population) for m, _ in feasible)
    note = ""
    lo2, hi2 = max(lo, x), min(hi, x / fraction)
    if (lo2, hi2) != (lo, hi):
        note = "interval clipped to hard range [local, local/fraction]"
    point = min(max(point, lo2), hi2)
    return Estimate(point=point, ci95=(lo2, hi2), scope="network",
                    method="mc_unique_extrapolate", note=note)


def range_bound(local_count: float, fraction: float,
                universe_cap: float = None) -> Estimate:
    """Degenerate range [x, x/fraction] when no model is defensible."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    x = float(local_count)
    hi = x / fraction
    note = ""
    if universe_cap is not None and universe_cap < hi:
        hi = float(universe_cap)
        note = "upper end capped by universe size"
    return Estimate(point=x, ci95=(x, max(hi, x)), scope="network",
                    method="range_bound", note=note)


# ---------------------------------------------------------------------------
# guard model

@dataclass(frozen=True)
class GuardModel:
    """Clients contact g weight-proportional guards; p promiscuous
    clients contact every guard."""

    g: int
    p: int
    weights: tuple

    def __post_init__(self):
        if self.g < 1:
            raise ValueError("g must be >= 1")
        if self.p < 0:
            raise ValueError("p must be >= 0")


@dataclass(frozen=True)
class GuardFit:
    g: int
    feasible: bool
    p_range: tuple = None
    n_range: tuple = None


def _contact_prob(g: int, w: float) -> float:
    """Chance a selective client puts any guard in a subset of weight w."""
    return -math.expm1(g * math.log1p(-w))


def _guard_band(n: float, p: float, c: float, b: int, n_noise_total: int,
                extra_sd: float):
    """(mean, sd) of the noise-mean-corrected occupied-bin count a subset
    reports when the network holds n client IPs, p of them promiscuous."""
    s = max(n - p, 0.0)
    o_mean = p + s * c
    o_var = s * c * (1.0 - c)
    if b is None:
        return o_mean, math.sqrt(o_var + n_noise_total / 4.0 + extra_sd ** 2)
    mu = float(occupancy_mean(o_mean, b))
    slope = float(occupancy_slope(o_mean, b))
    var = (slope * slope * o_var + float(occupancy_var(o_mean, b))
           + n_noise_total / 4.0 + extra_sd ** 2)
    return mu, math.sqrt(var)


def _measurement_interval(value: float, p: float, c: float, b, n_noise_total,
                          extra_sd, z: float, n_cap: float):
    """[n_lo, n_hi] of network sizes whose band covers the value."""
    def upper_edge(n):
        m, s = _guard_band(n, p, c, b, n_noise_total, extra_sd)
        return m + z * s

    def lower_edge(n):
        m, s = _guard_band(n, p, c, b, n_noise_total, extra_sd)
        return m - z * s

    lo, hi = float(p), float(n_cap)
    if upper_edge(hi) < value or lower_edge(lo) > value:
        return None
    # smallest n with mean + z sd >= value
    a, b2 = lo, hi
    if upper_edge(a) >= value:
        n_lo = a
    else:
        for _ in range(60):
            mid = 0.5 * (a + b2)
            if upper_edge(mid) >= value:
                b2 = mid
            else:
                a = mid
        n_lo = b2
    # largest n with mean - z sd <= value
    a, b2 = lo, hi
    if lower_edge(b2) <= value:
        n_hi = b2
    else:
        for _ in range(60):
            mid = 0.5 * (a + b2)
            if lower_edge(mid) <= value:
                a = mid
            else:
                b2 = mid
        n_hi = a
    if n_hi < n_lo:
        return None
    return n_lo, n_hi


def fit_guard_model(measurements, g_candidates=(3, 4, 5), p_range=(0, 50_000),
                    b: int = None, n_noise_total: int = 0, extra_sd=0.0,
                    network_cap: float = None, z: float = Z95,
                    p_points: int = 200) -> dict:
    """Fit the promiscuous-client guard model to subset measurements.

    measurements: two (value, weight) pairs, value being the subset's
    noise-mean-corrected occupied-bin count (an Estimate's point is
    accepted) and weight its fraction of total guard weight. For each
    candidate g, every p in the search range is tested: the model band
    turns each measurement into an interval of network-wide IP counts,
    and p is feasible when the intervals intersect. Reported per g:
    the feasible p range and the union of the intersections.
    extra_sd adds per-measurement dispersion beyond the structural
    sampling/occupancy/noise terms (scalar or one value per
    measurement).
    """
    meas = []
    for value, weight in measurements:
        v = value.point if isinstance(value, Estimate) else float(value)
        if not 0 < weight < 1:
            raise ValueError(f"weight must be in (0, 1), got {weight}")
        meas.append((v, float(weight)))
    if len(meas) != 2:
        raise ValueError("exactly two subset measurements required")
    if len({w for _, w in meas}) != 2:
        raise ValueError("subset weights must be distinct")
    extra = np.broadcast_to(np.asarray(extra_sd, dtype=float), (2,))
    p_lo, p_hi = p_range
    if not 0 <= p_lo <= p_hi:
        raise ValueError(f"bad p search range {p_range}")
    n_cap = float(network_cap) if network_cap is not None else 4e9
    p_grid = np.unique(np.linspace(p_lo, p_hi, p_points + 1).round()
                       .astype(np.int64))

    def intersection(g, p):
        cur_lo, cur_hi = float(p), n_cap
        for (v, w), es in zip(meas, extra):
            c = _contact_prob(g, w)
            iv = _measurement_interval(v, p, c, b, n_noise_total, es, z, n_cap)
            if iv is None:
                return None
            cur_lo, cur_hi = max(cur_lo, iv[0]), min(cur_hi, iv[1])
            if cur_hi < cur_lo:
                return None
        return cur_lo, cur_hi

    out = {}
    for g in g_candidates:
        feas = [(p, intersection(g, p)) for p in p_grid]
        feas = [(p, iv) for p, iv in feas if iv is not None]
        if not feas:
            out[g] = GuardFit(g=g, feasible=False)
            continue
        first_p, last_p = feas[0][0], feas[-1][0]

        def refine(lo, hi, want_feasible_high):
            # bisect the feasibility boundary between two grid points
            for _ in range(30):
                mid = (lo + hi) // 2
                if mid in (lo, hi):
                    break
                ok = intersection(g, mid) is not None
                if ok == want_feasible_high:
                    hi = mid
                else:
                    lo = mid
            return lo, hi

        p_min = first_p
        if first_p > p_lo:
            _, p_min = refine(first_p - (p_grid[1] - p_grid[0]), first_p, True)
            if intersection(g, p_min) is None:
                p_min = first_p
        p_max = last_p
        if last_p < p_hi:
            p_max, _ = refine(last_p, last_p + (p_grid[1] - p_grid[0]), False)
            if intersection(g, p_max) is None:
                p_max = last_p
        ivs = [iv for _, iv in feas]
        for extra_p in (p_min, p_max):
            iv = intersection(g, extra_p)
            if iv is not None:
                ivs.append(iv)
        n_lo = min(iv[0] for iv in ivs)
        n_hi = max(iv[1] for iv in ivs)
        out[g] = GuardFit(g=g, feasible=True, p_range=(float(p_min), float(p_max)),
                          n_range=(n_lo, n_hi))
    return out


def simulate_guard_counts(n: int, p: int, g: int, w: float, b, n_noise_total,
                          trials: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of the corrected occupied-bin count under the guard model;
    validation oracle for the analytic band."""
    c = _contact_prob(g, w)
    obs = p + rng.binomial(n - p, c, size=trials)
    if b is not None:
        mu = occupancy_mean(obs, b)
        sd = np.sqrt(np.maximum(occupancy_var(obs, b), 0.0))
        obs = np.rint(mu + rng.normal(0.0, 1.0, size=trials) * sd)
    if n_noise_total:
        obs = obs + rng.binomial(n_noise_total, 0.5, size=trials) \
            - n_noise_total / 2.0
    return obs


# ---------------------------------------------------------------------------
# churn and onion-service extrapolation

def churn_rate(multi_day: Estimate, one_day: Estimate, days: int,
               mode: str = "conservative") -> Estimate:
    """Daily client-IP turnover from a D-day and a 1-day unique count.

    conservative: interval-arithmetic difference (lo_D - hi_1, hi_D - lo_1).
    paired: same-endpoint difference (lo_D - lo_1, hi_D - hi_1), for
    measurements whose interval endpoints move together.
    """
    if days < 2:
        raise ValueError("need at least two days to see churn")
    span = days - 1
    point = (multi_day.point - one_day.point) / span
    if mode == "conservative":
        lo = (multi_day.lo - one_day.hi) / span
        hi = (multi_day.hi - one_day.lo) / span
    elif mode == "paired":
        lo = (multi_day.lo - one_day.lo) / span
        hi = (multi_day.hi - one_day.hi) / span
    else:
        raise ValueError(f"unknown mode {mode!r}")
    note = ""
    if not lo <= point <= hi:
        note = f"{mode} endpoints do not bracket the point difference"
    return Estimate(point=point, ci95=(min(lo, hi), max(lo, hi)),
                    scope=multi_day.scope, method=f"churn_rate/{mode}",
                    note=note)


def hsdir_extrapolate(local: Estimate, weight: float,
                      replication_divisor: float = 2.0) -> Estimate:
    """Network-wide onion-service count from one directory's view.

    Descriptors are placed on several directories; with the v2 layout
    (two replicas, three spread positions each) a directory subset of
    the given weight sees each service about weight * divisor times,
    divisor 2 by default. The divisor is configurable because the
    effective overlap depends on deployment details.
    """
    if not 0 < weight <= 1:
        raise ValueError(f"weight must be in (0, 1], got {weight}")
    if replication_divisor < 1:
        raise ValueError("replication divisor must be >= 1")
    scale = weight * replication_divisor
    if scale > 1:
        raise ValueError("weight * divisor exceeds 1: subset would see "
                         "more than the whole network")
    return Estimate(point=local.point / scale,
                    ci95=(local.lo / scale, local.hi / scale),
                    scope="network", method="hsdir_extrapolate",
                    note=local.note)


__all__ = [
    "Z95", "Estimate", "quadrature_sigma", "normal_ci",
    "extrapolate_by_fraction", "occupancy_mean", "occupancy_var",
    "occupancy_slope", "invert_occupancy", "EXACT_OCCUPANCY_LIMIT",
    "PscCiTable", "psc_exact_ci", "PowerLawModel", "prepare_mc_grid",
    "mc_unique_extrapolate", "range_bound", "GuardModel", "GuardFit",
    "fit_guard_model", "simulate_guard_counts", "churn_rate",
    "hsdir_extrapolate",
]
