"""Top-level acceptance checks, one test per release criterion.

Each test is self-contained: it builds its own inputs, states its
tolerance inline, and fails loudly when the pipeline drifts. Oracles
are computed in-test from first principles wherever the checked code
path could otherwise mask its own regressions.
"""

import importlib.resources as resources
import time

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import norm

from privmeter.events import (
    Event, GroundTruthConfig, RelaySpec, generate_ground_truth,
)
from privmeter.harness import DeploymentConfig, ScheduleError, run_campaign
from privmeter.inference import (
    Estimate, PowerLawModel, churn_rate, extrapolate_by_fraction,
    fit_guard_model, mc_unique_extrapolate, normal_ci, occupancy_mean,
    occupancy_var, psc_exact_ci,
)
from privmeter.matchers import (
    bundled_ranked_list, bundled_suffix_list, registrable_or_none, sibling_set,
)
from privmeter.privacy import (
    PrivacyParams, Round, dp_delta_bound, gaussian_sigma, noise_spec_for,
    validate_schedule,
)
from privmeter.privcount import (
    CounterSpec, replay_noise_total, run_round_in_memory, stable_key,
)
from privmeter.psc.group import GROUP_DESK
from privmeter.psc.protocol import (
    NoiseBinParams, encode_item, hash_to_bin, run_psc_round,
)

DAY = 86400.0


def test_criterion_1_extrapolation_arithmetic():
    """Linear scaling, churn rate, and network-consensus sanity products."""
    t0 = time.perf_counter()

    local = Estimate(point=3.2e7, ci95=(3.2e7 - 6.2e6, 3.2e7 + 6.2e6),
                     scope="local")
    net = extrapolate_by_fraction(local, 0.015)
    margin = (net.hi - net.lo) / 2.0
    assert f"{net.point:.2g}" == "2.1e+09"
    assert f"{margin:.2g}" == "4.1e+08"

    one_day = Estimate(point=313_213.0, ci95=(313_039.0, 376_343.0),
                       scope="network")
    four_day = Estimate(point=672_303.0, ci95=(671_781.0, 1_118_147.0),
                        scope="network")
    churn = churn_rate(four_day, one_day, days=4)
    assert round(churn.point) == 119_697
    assert churn.point == pytest.approx((672_303 - 313_213) / 3)

    # measured guard fraction x choice parallelism x daily users, and the
    # inverse read off the one-day unique count
    assert abs(0.0119 * 3 * 2.15e6 - 76_755) <= 1.0
    assert abs(313_213 / 0.0119 / 3 - 8_773_473) <= 1.0

    assert time.perf_counter() - t0 < 1.0


def _mixed_counter_specs():
    specs = [
        CounterSpec(counter_id="streams", event_kind="ExitStream",
                    action="domains_connected"),
        CounterSpec(counter_id="web", event_kind="ExitStream",
                    action="domains_connected",
                    match=lambda e: e["port"] == 443),
        CounterSpec(counter_id="bytes", event_kind="ExitStream",
                    action="exit_data_bytes", value_field="bytes"),
        CounterSpec(counter_id="rend2", event_kind="RendezvousCircuitEnd",
                    action="rendezvous_connections", scale=2),
    ]
    noise = {
        "streams": noise_spec_for("streams", "domains_connected", 0.05, 2.5e-12),
        "web": noise_spec_for("web", "domains_connected", 0.1, 2.5e-12),
        "bytes": noise_spec_for("bytes", "exit_data_bytes", 0.05, 2.5e-12),
        "rend2": noise_spec_for("rend2", "rendezvous_connections", 0.2, 2.5e-12),
    }
    return specs, noise


def _random_events(rng, relay):
    evs, seq = [], 0
    for _ in range(int(rng.integers(0, 5))):
        evs.append(Event(seq=seq, relay_id=relay, t=float(rng.random()),
                         kind="ExitStream",
                         payload=(("is_initial", bool(rng.integers(2))),
                                  ("target", "d1.example.com"),
                                  ("port", int(rng.choice([80, 443, 22]))),
                                  ("bytes", int(rng.integers(0, 5000))))))
        seq += 1
    for _ in range(int(rng.integers(0, 3))):
        evs.append(Event(seq=seq, relay_id=relay, t=float(rng.random()),
                         kind="RendezvousCircuitEnd",
                         payload=(("outcome", "succeeded"),
                                  ("cells", int(rng.integers(0, 100))))))
        seq += 1
    return evs


def test_criterion_2_blinded_counter_exactness():
    """Aggregate minus ground truth equals the replayed noise, always."""
    t0 = time.perf_counter()
    specs, noise_specs = _mixed_counter_specs()
    dc_ids = [f"dc{i:02d}" for i in range(16)]
    for r in range(1000):
        rng = np.random.default_rng(r)
        streams = {d: _random_events(rng, d) for d in dc_ids}
        truth = dict.fromkeys(noise_specs, 0)
        for evs in streams.values():
            for e in evs:
                if e.kind == "ExitStream":
                    truth["streams"] += 1
                    truth["web"] += e["port"] == 443
                    truth["bytes"] += e["bytes"]
                else:
                    truth["rend2"] += 2
        rid = f"round-{r}"
        result = run_round_in_memory(rid, specs, noise_specs, streams,
                                     n_sks=3, seed=r)
        replay = replay_noise_total([stable_key(f"{r}/{d}") for d in dc_ids],
                                    rid, specs, noise_specs)
        for cid in noise_specs:
            assert result.totals[cid] - truth[cid] == replay[cid], (r, cid)
    assert time.perf_counter() - t0 < 30.0


def test_criterion_3_set_union_oracle_equivalence():
    """The decrypted raw count is exactly the bin occupancy of the union."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    exact = collided = 0
    for i in range(500):
        b = int(rng.choice([16, 32, 64, 128, 256]))
        n_dcs = int(rng.integers(1, 5))
        itemsets = [rng.integers(0, 10_000, size=rng.integers(0, 17)).tolist()
                    for _ in range(n_dcs)]
        union = set()
        for items in itemsets:
            union.update(items)
        assert sum(len(s) for s in itemsets) <= 64
        res = run_psc_round(itemsets, b=b, n_cps=int(rng.integers(1, 4)),
                            noise=NoiseBinParams(0), seed=9000 + i,
                            group=GROUP_DESK, escrow=True)
        assert res.raw_count == res.occupied_truth, i
        if res.occupied_truth == len(union):
            exact += 1
            assert res.raw_count == len(union)
        else:
            collided += 1
            assert res.occupied_truth < len(union)
    # both the collision-free and the collided branch must really occur
    assert exact >= 20 and collided >= 20
    assert time.perf_counter() - t0 < 60.0


def test_criterion_4_noise_accounting():
    """Mean raw count = expected occupancy + half the noise bins."""
    items = list(range(300))
    b, n_noise = 1024, 200
    raws = [run_psc_round([items], b=b, n_cps=2, noise=NoiseBinParams(100),
                          seed=r).raw_count for r in range(1000)]
    expected = float(occupancy_mean(300, b)) + n_noise / 2.0
    se = np.sqrt((float(occupancy_var(300, b)) + n_noise / 4.0) / len(raws))
    assert abs(np.mean(raws) - expected) <= 3.0 * se


def test_criterion_5_interval_coverage():
    t0 = time.perf_counter()

    # additive Gaussian noise: nominal 95% must hold to within one point
    rng = np.random.default_rng(7)
    truth, sigma = 1000.0, 50.0
    hits = 0
    for x in truth + rng.normal(0.0, sigma, size=10_000):
        est = normal_ci(float(x), sigma)
        hits += est.lo <= truth <= est.hi
    assert 0.94 <= hits / 10_000 <= 0.96

    # exact occupancy-inversion intervals on simulated set-union rounds
    rng = np.random.default_rng(8)
    n, b, n_noise = 300, 1024, 200
    hits = 0
    for _ in range(2000):
        occ = np.unique(rng.integers(0, b, size=n)).size
        raw = int(occ + rng.binomial(n_noise, 0.5))
        try:
            est = psc_exact_ci(raw, b, n_noise)
        except ValueError:
            continue  # counts as a miss
        hits += est.lo <= n <= est.hi
    assert hits / 2000 >= 0.93

    # end-to-end power-law extrapolation against an independent
    # Bernoulli-sum simulation of the local unique count
    universe, true_n, true_alpha, fraction = 10 ** 6, 100_000, 1.0, 0.05
    w = np.arange(1, universe + 1, dtype=float) ** -true_alpha
    q = w / w.sum()
    lam = brentq(lambda l: -np.expm1(-q * l).sum() - true_n,
                 true_n, 50 * true_n, rtol=1e-10)
    p_local = -np.expm1(-q * lam * fraction)
    models = [PowerLawModel(alpha=a, population=nn, universe=universe)
              for a in (0.9, 1.0, 1.1) for nn in range(60_000, 150_001, 2000)]
    hits = 0
    for i in range(200):
        rng = np.random.default_rng(1000 + i)
        local = float((rng.random(universe) < p_local).sum())
        est = mc_unique_extrapolate(
            Estimate(point=local, ci95=(local, local), scope="local"),
            fraction, models, seed=0)
        hits += est.lo <= true_n <= est.hi
    assert hits / 200 >= 0.90

    assert time.perf_counter() - t0 < 600.0


GUARD_B = 2 ** 20
GUARD_NOISE = 36342


def _recovery_campaign(i):
    cfg = GroundTruthConfig(
        n_clients=250_000, guards_per_selective_client=3,
        n_promiscuous_clients=20_000,
        relays=(RelaySpec("sub-a", guard=True, guard_weight=0.0042),
                RelaySpec("sub-b", guard=True, guard_weight=0.0088)),
        ip_universe=500_000, visits_per_client=0.0, circuits_per_client=0.0,
        connections_per_client=0.0, entry_bytes_per_client=0.0, rng_seed=i)
    trace, _ = generate_ground_truth(cfg)
    rng = np.random.default_rng(10_000 + i)
    key = rng.bytes(32)
    meas = []
    for rid, weight in (("sub-a", 0.0042), ("sub-b", 0.0088)):
        ips = {e["client_ip"] for e in trace.events_for_relay(rid)
               if e.kind == "EntryConnection"}
        occ = len({hash_to_bin(encode_item(ip), key, GUARD_B) for ip in ips})
        value = occ + rng.binomial(GUARD_NOISE, 0.5) - GUARD_NOISE / 2.0
        meas.append((float(value), weight))
    fits = fit_guard_model(meas, g_candidates=(1, 3), p_range=(0, 50_000),
                           b=GUARD_B, n_noise_total=GUARD_NOISE,
                           network_cap=cfg.ip_universe, p_points=60)
    f3, f1 = fits[3], fits[1]
    return (f3.feasible and f3.p_range[0] <= 20_000 <= f3.p_range[1]
            and not f1.feasible)


def test_criterion_6_guard_model_recovery():
    # regression against the published two-subset fit: endpoints of the
    # g=3 promiscuous-count and network-size intervals within 2%
    fits = fit_guard_model(
        [(148174.0, 0.004238174947911233), (269795.0, 0.008849453305824873)],
        g_candidates=(3,), p_range=(5000, 35000), b=GUARD_B,
        n_noise_total=GUARD_NOISE, extra_sd=(100.0, 350.0), p_points=60)
    fit = fits[3]
    assert fit.feasible
    assert fit.p_range[0] == pytest.approx(15_856, rel=0.02)
    assert fit.p_range[1] == pytest.approx(21_522, rel=0.02)
    assert fit.n_range[0] == pytest.approx(10_851_783, rel=0.02)
    assert fit.n_range[1] == pytest.approx(11_240_709, rel=0.02)

    # synthetic recovery: g=3, p=20,000 worlds measured through hashed
    # bins plus coin-flip noise; the fit must identify both parameters
    wins = sum(_recovery_campaign(i) for i in range(50))
    assert wins >= 45


def _schedule_oracle(rounds, gap_min):
    """Pairwise safety rules, restated independently of the library."""
    bad = []
    for i, a in enumerate(rounds):
        for b in rounds[i + 1:]:
            overlap = a.start < b.end and b.start < a.end
            if a.protocol != b.protocol and overlap:
                bad.append(("parallel protocols",
                            tuple(sorted((a.round_id, b.round_id)))))
            if a.statistics != b.statistics:
                gap = max(a.start - b.end, b.start - a.end)
                if gap < gap_min:
                    bad.append(("gap < 24h",
                                tuple(sorted((a.round_id, b.round_id)))))
    return sorted(bad)


def test_criterion_7_schedule_safety():
    pool = [("privcount", frozenset({"exit_bytes"})),
            ("privcount", frozenset({"exit_taxonomy", "exit_bytes"})),
            ("psc", frozenset({"unique_sld"})),
            ("psc", frozenset({"unique_client_ips", "unique_sld"}))]
    gap_min = PrivacyParams().adjacency_window
    rng = np.random.default_rng(3)
    rejected, accepted = [], []
    for _ in range(10_000):
        rounds = []
        for k in range(int(rng.integers(1, 5))):
            proto, stats = pool[int(rng.integers(len(pool)))]
            start = float(rng.integers(0, 24)) * 0.25 * DAY
            length = float(rng.integers(1, 9)) * 0.25 * DAY
            rounds.append(Round(round_id=f"r{k}", protocol=proto,
                                statistics=stats, start=start,
                                end=start + length))
        got = sorted((v.kind, tuple(sorted(v.round_ids)))
                     for v in validate_schedule(rounds))
        want = _schedule_oracle(rounds, gap_min)
        assert got == want, rounds
        (rejected if want else accepted).append(rounds)
    assert len(rejected) > 100 and len(accepted) > 100

    tiny = GroundTruthConfig(
        n_clients=40, relays=(RelaySpec("e", exit=True, exit_weight=0.1),),
        visits_per_client=2.0, domain_universe=50, rng_seed=1)
    dep = DeploymentConfig(truth_config=tiny, psc_noise_per_cp=40, seed=1)
    # a rejected schedule must fail before any round runs
    for rounds in rejected[:25]:
        with pytest.raises(ScheduleError):
            run_campaign(dep, rounds)
    # and accepted ones must actually execute
    for rounds in accepted[:3]:
        report = run_campaign(dep, rounds)
        assert len(report.rounds) == len(rounds)
        assert report.entries()


def test_criterion_8_matcher_correctness():
    suffixes = bundled_suffix_list()
    ranked = bundled_ranked_list()
    sizes = {name: len(sibling_set(name, ranked, suffixes))
             for name in ("google", "qq", "reddit")}
    assert sizes == {"google": 212, "qq": 3, "reddit": 3}

    text = resources.files("privmeter").joinpath("data/psl_check.txt").read_text()
    checked = 0
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        hostname, want = line.split("\t")
        got = registrable_or_none(hostname, suffixes)
        assert got == (None if want == "-" else want), hostname
        checked += 1
    assert checked >= 40


def test_criterion_9_gaussian_calibration():
    sigma = gaussian_sigma(1.0, 0.3, 1e-11)
    assert sigma == pytest.approx(23.83, abs=0.01)

    # the privacy inequality on one-sided threshold sets, both adjacency
    # directions, via the exact normal tail
    eps, delta = 0.3, 1e-11
    t = np.linspace(-10 * sigma, 1 + 10 * sigma, 4001)
    p_d1 = norm.sf(t, loc=1.0, scale=sigma)   # Pr[M(D1) in [t, inf)]
    p_d2 = norm.sf(t, loc=0.0, scale=sigma)
    assert np.all(p_d1 <= np.exp(eps) * p_d2 + delta + 1e-15)
    assert np.all(p_d2 <= np.exp(eps) * p_d1 + delta + 1e-15)
    assert dp_delta_bound(sigma, eps, sensitivity=1.0) <= delta
