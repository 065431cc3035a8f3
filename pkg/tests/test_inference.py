import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from privmeter.inference import (
    EXACT_OCCUPANCY_LIMIT, Estimate, PowerLawModel, PscCiTable, Z95,
    churn_rate, extrapolate_by_fraction, fit_guard_model, hsdir_extrapolate,
    invert_occupancy, mc_unique_extrapolate, normal_ci, occupancy_mean,
    occupancy_slope, occupancy_var, prepare_mc_grid, psc_exact_ci,
    quadrature_sigma, range_bound, simulate_guard_counts,
)


# ---------------------------------------------------------------------------
# Estimate container


def test_estimate_validates_interval():
    Estimate(point=5.0, ci95=(1.0, 9.0), scope="local")
    with pytest.raises(ValueError):
        Estimate(point=10.0, ci95=(1.0, 9.0), scope="local")
    with pytest.raises(ValueError):
        Estimate(point=5.0, ci95=(9.0, 1.0), scope="local")
    with pytest.raises(ValueError):
        Estimate(point=5.0, ci95=(1.0, 9.0), scope="galactic")
    # a note permits a point outside its interval (clamped estimates)
    Estimate(point=0.0, ci95=(1.0, 9.0), scope="local", note="clamped")


@given(point=st.floats(-1e9, 1e9), half=st.floats(0, 1e9),
       scope=st.sampled_from(["local", "network"]))
@settings(max_examples=60, deadline=None)
def test_estimate_json_roundtrip(point, half, scope):
    est = Estimate(point=point, ci95=(point - half, point + half), scope=scope,
                   method="m", note="n")
    back = Estimate.from_json(est.to_json())
    assert back == est
    doc = json.loads(est.to_json())
    assert set(doc) == {"point", "ci95", "scope", "method", "note"}


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=8))
@settings(max_examples=80, deadline=None)
def test_quadrature_sigma_properties(sigmas):
    got = quadrature_sigma(sigmas)
    assert got == pytest.approx(math.sqrt(sum(s * s for s in sigmas)))
    assert got >= max(sigmas) - 1e-9


def test_normal_ci_width_and_clamp():
    est = normal_ci(1000.0, 50.0)
    assert est.point == 1000.0
    assert est.hi - est.lo == pytest.approx(2 * Z95 * 50.0)
    clamped = normal_ci(-120.0, 50.0)
    assert clamped.point == 0.0 and clamped.note
    assert clamped.lo < 0  # the interval itself stays honest
    exact = normal_ci(7.0, 0.0)
    assert (exact.lo, exact.hi) == (7.0, 7.0)


def test_extrapolation_is_exactly_linear():
    local = Estimate(point=3.2e7, ci95=(3.2e7 - 6.2e6, 3.2e7 + 6.2e6),
                     scope="local")
    net = extrapolate_by_fraction(local, 0.015)
    assert net.scope == "network"
    assert net.point == 3.2e7 / 0.015
    assert net.lo == (3.2e7 - 6.2e6) / 0.015
    assert net.hi == (3.2e7 + 6.2e6) / 0.015
    with pytest.raises(ValueError):
        extrapolate_by_fraction(local, 0.0)


# ---------------------------------------------------------------------------
# occupancy law


def _occupancy_sim(n, b, trials, seed):
    rng = np.random.default_rng(seed)
    counts = np.empty(trials)
    for i in range(trials):
        counts[i] = np.unique(rng.integers(0, b, size=n)).size
    return counts


@pytest.mark.parametrize("n,b", [(50, 64), (300, 256), (1000, 1024)])
def test_occupancy_moments_against_simulation(n, b):
    sim = _occupancy_sim(n, b, 4000, seed=n)
    mean, var = occupancy_mean(n, b), occupancy_var(n, b)
    assert sim.mean() == pytest.approx(mean, abs=4 * math.sqrt(var / 4000))
    assert sim.var(ddof=1) == pytest.approx(var, rel=0.15)


def test_occupancy_edge_cases():
    assert occupancy_mean(0, 64) == 0.0
    assert occupancy_var(0, 64) == 0.0
    assert occupancy_mean(1, 64) == pytest.approx(1.0, rel=1e-12)
    assert occupancy_var(1, 64) == pytest.approx(0.0, abs=1e-12)


@given(ratio=st.floats(1e-3, 8.0),
       b=st.sampled_from([2 ** 10, 2 ** 16, 2 ** 20]))
@settings(max_examples=80, deadline=None)
def test_invert_occupancy_roundtrip(ratio, b):
    n = ratio * b
    occ = float(occupancy_mean(n, b))
    assert invert_occupancy(occ, b) == pytest.approx(n, rel=1e-9, abs=1e-6)


def test_occupancy_slope_is_derivative():
    n, b = 5000, 4096
    h = 1e-4
    numeric = (occupancy_mean(n + h, b) - occupancy_mean(n - h, b)) / (2 * h)
    assert occupancy_slope(n, b) == pytest.approx(numeric, rel=1e-6)


# ---------------------------------------------------------------------------
# exact PSC interval


def _region_oracle(n, b, n_noise, alpha):
    """Direct convolution of the occupancy pmf with Binomial(n_noise, 1/2)."""
    from scipy.stats import binom
    pmf = np.zeros(b + 1)
    pmf[0] = 1.0
    for _ in range(n):
        new = np.zeros(b + 1)
        ks = np.arange(b + 1)
        new += pmf * ks / b
        new[1:] += pmf[:-1] * (b - ks[:-1]) / b
        pmf = new
    noise = binom.pmf(np.arange(n_noise + 1), n_noise, 0.5)
    total = np.convolve(pmf, noise)
    cdf = np.cumsum(total)
    lo = int(np.searchsorted(cdf, alpha))
    hi = int(np.searchsorted(cdf, 1 - alpha))
    return lo, hi


@pytest.mark.parametrize("b,n_noise", [(32, 0), (32, 16), (64, 24)])
def test_region_matches_convolution_oracle(b, n_noise):
    table = PscCiTable(b=b, n_noise_total=n_noise)
    for n in (0, 1, 5, 17, 40):
        assert table.region(n) == _region_oracle(n, b, n_noise, 0.025)


def test_region_rewind_consistency():
    table = PscCiTable(b=64, n_noise_total=8)
    forward = {n: table.region(n) for n in range(0, 120, 7)}
    # fresh table queried in reverse order must agree (checkpoint rewind)
    table2 = PscCiTable(b=64, n_noise_total=8)
    for n in sorted(forward, reverse=True):
        assert table2.region(n) == forward[n]


def test_psc_exact_ci_contains_truth_shape():
    est = psc_exact_ci(40, b=256, n_noise_total=0)
    assert est.scope == "local" and est.method == "psc_exact_ci"
    assert est.lo <= est.point <= est.hi
    assert est.lo <= 40 <= est.hi + 10


def test_psc_exact_ci_frozen_large_inputs():
    """Normal-approximation path at full desk scale, zero noise."""
    a = psc_exact_ci(148174, b=2 ** 20, n_noise_total=0)
    assert a.point == pytest.approx(159747.33374494262, rel=1e-12)
    assert (a.lo, a.hi) == (159525.0, 159970.0)
    b = psc_exact_ci(269795, b=2 ** 20, n_noise_total=0)
    assert b.point == pytest.approx(311907.6487300428, rel=1e-12)
    assert (b.lo, b.hi) == (311463.0, 312353.0)


def test_psc_exact_ci_noise_mean_correction():
    # raw of 148174 with 36,342 noise bins carries mean 18,171 of noise
    est = psc_exact_ci(148174, b=2 ** 20, n_noise_total=36342)
    assert est.point == pytest.approx(
        invert_occupancy(148174 - 36342 / 2, 2 ** 20), rel=1e-6)
    assert est.hi < 159747  # strictly below the zero-noise estimate


def test_psc_exact_ci_error_paths():
    with pytest.raises(ValueError):
        psc_exact_ci(4096, b=4096, n_noise_total=0)     # saturated
    with pytest.raises(ValueError):
        psc_exact_ci(1500, b=4096, n_noise_total=36342)  # below noise floor
    with pytest.raises(ValueError):
        psc_exact_ci(-3, b=4096, n_noise_total=0)


def test_exact_limit_guard():
    # the exact recurrence is only used when n*b stays tractable
    assert EXACT_OCCUPANCY_LIMIT == 10 ** 8


# ---------------------------------------------------------------------------
# power-law extrapolation


ALPHA_FIT = 1.356861214335459


def _fixture_models(alphas, step=2000):
    return [PowerLawModel(alpha=a, population=n, universe=10 ** 6)
            for a in alphas for n in range(500_000, 530_001, step)]


def test_mc_fixture_single_alpha_recovers_paper_point():
    local = Estimate(point=35660.0, ci95=(35660.0, 35660.0), scope="local")
    est = mc_unique_extrapolate(local, 0.0124, _fixture_models([ALPHA_FIT]),
                                seed=0)
    assert est.method == "mc_unique_extrapolate"
    assert est.point == pytest.approx(513342.0, abs=1.0)
    assert (est.lo, est.hi) == (512000.0, 514000.0)


def test_mc_grid_is_cached():
    models = _fixture_models([ALPHA_FIT])
    a = prepare_mc_grid(models, 0.0124, seed=0)
    b = prepare_mc_grid(models, 0.0124, seed=0)
    assert a is b


def test_mc_fixture_alpha_band_stays_close():
    alphas = [ALPHA_FIT - 0.02, ALPHA_FIT, ALPHA_FIT + 0.02]
    local = Estimate(point=35660.0, ci95=(35660.0, 35660.0), scope="local")
    audit = []
    est = mc_unique_extrapolate(local, 0.0124, _fixture_models(alphas),
                                seed=0, audit=audit)
    assert len(audit) == 3 * 16
    assert sum(1 for a in audit if a["feasible"]) >= 1
    # the grid brackets the paper's point, so the clipped answer stays close
    assert est.point == pytest.approx(513342.0, rel=0.10)


def test_mc_full_fraction_short_circuits():
    local = Estimate(point=123.0, ci95=(120.0, 130.0), scope="local")
    est = mc_unique_extrapolate(local, 1.0, [])
    assert est.point == 123.0 and est.scope == "network"


def test_mc_fallback_when_no_model_fits():
    models = [PowerLawModel(alpha=1.0, population=10_000, universe=10 ** 6)]
    local = Estimate(point=900.0, ci95=(900.0, 900.0), scope="local")
    est = mc_unique_extrapolate(local, 0.0124, models, seed=0)
    assert "fallback" in est.note
    assert (est.lo, est.hi) == (900.0, pytest.approx(900.0 / 0.0124))


def test_range_bound_limits():
    est = range_bound(1000.0, 0.1)
    assert (est.lo, est.point <= est.hi, est.hi) == (1000.0, True, 10000.0)
    capped = range_bound(1000.0, 0.1, universe_cap=5000)
    assert capped.hi == 5000.0


# ---------------------------------------------------------------------------
# guard model


def test_guard_fit_reproduces_frozen_regression():
    fits = fit_guard_model(
        [(148174.0, 0.004238174947911233), (269795.0, 0.008849453305824873)],
        g_candidates=(3,), p_range=(5000, 35000), b=2 ** 20,
        n_noise_total=36342, extra_sd=(100.0, 350.0), p_points=60)
    fit = fits[3]
    assert fit.feasible
    assert fit.p_range == (15663.0, 21607.0)
    assert fit.n_range[0] == pytest.approx(10997462.503249075, rel=1e-9)
    assert fit.n_range[1] == pytest.approx(11330410.736374738, rel=1e-9)


def test_guard_band_matches_simulation():
    rng = np.random.default_rng(3)
    n, p, g, w = 500_000, 10_000, 3, 0.01
    draws = simulate_guard_counts(n, p, g, w, b=2 ** 20, n_noise_total=36342,
                                  trials=4000, rng=rng)
    # analytic center: p + (n-p) * c, pushed through occupancy
    c = -math.expm1(g * math.log1p(-w))
    center = occupancy_mean(p + (n - p) * c, 2 ** 20)
    assert draws.mean() == pytest.approx(center, rel=0.01)


def test_guard_fit_infeasible_under_cap():
    fits = fit_guard_model(
        [(148174.0, 0.004238174947911233), (269795.0, 0.008849453305824873)],
        g_candidates=(1,), p_range=(0, 35000), b=2 ** 20,
        n_noise_total=36342, extra_sd=(100.0, 350.0), p_points=60,
        network_cap=500_000)
    assert not fits[1].feasible


def test_guard_fit_input_validation():
    with pytest.raises(ValueError):
        fit_guard_model([(100.0, 0.5)])
    with pytest.raises(ValueError):
        fit_guard_model([(100.0, 0.5), (200.0, 0.5)])


# ---------------------------------------------------------------------------
# churn and directory extrapolation


ONE_DAY = Estimate(point=313213.0, ci95=(313039.0, 376343.0), scope="network")
FOUR_DAY = Estimate(point=672303.0, ci95=(671781.0, 1118147.0), scope="network")


def test_churn_paired_mode_reproduces_published_interval():
    est = churn_rate(FOUR_DAY, ONE_DAY, days=4, mode="paired")
    assert round(est.point) == 119697
    assert round(est.lo) == 119581  # (671781-313039)/3
    assert round(est.hi) == 247268  # (1118147-376343)/3


def test_churn_conservative_mode_is_wider():
    est = churn_rate(FOUR_DAY, ONE_DAY, days=4)
    assert est.method.endswith("conservative")
    assert round(est.lo) == 98479
    assert round(est.hi) == 268369
    paired = churn_rate(FOUR_DAY, ONE_DAY, days=4, mode="paired")
    assert est.hi - est.lo > paired.hi - paired.lo


def test_churn_needs_multiple_days():
    with pytest.raises(ValueError):
        churn_rate(FOUR_DAY, ONE_DAY, days=1)


PUBLISHED = Estimate(point=3900.0, ci95=(3769.0, 4045.0), scope="local")


def test_hsdir_published_extrapolation():
    default = hsdir_extrapolate(PUBLISHED, 0.0275)
    assert default.point == pytest.approx(70909.09, abs=0.01)
    exact = hsdir_extrapolate(PUBLISHED, 0.0275,
                              replication_divisor=2.002346339171799)
    assert exact.point == pytest.approx(70826.0, abs=0.01)
    # interval scaling lands near the published bounds
    assert exact.lo == pytest.approx(65738.0, rel=0.05)
    assert exact.hi == pytest.approx(76350.0, rel=0.05)


def test_hsdir_fetched_uses_full_replica_divisor():
    fetched = Estimate(point=2401.0, ci95=(1101.0, 3718.0), scope="local")
    est = hsdir_extrapolate(fetched, 0.00534, replication_divisor=6.0)
    assert est.point == pytest.approx(74900.0, rel=0.002)


def test_hsdir_scale_cannot_exceed_whole_network():
    with pytest.raises(ValueError):
        hsdir_extrapolate(PUBLISHED, 0.3, replication_divisor=6.0)
