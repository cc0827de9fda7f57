import math

import numpy as np
import pytest
from scipy.integrate import quad

from regionloc.bounds import (
    BoundRow,
    BoundScenario,
    compute_region_bounds,
    eta_from,
    lemma_six_violations,
    log_epsilon,
    mu,
    omega,
    q_function,
    rows_to_csv,
    sum_sq,
    theorem_one_check,
    theorem_two_check,
)
from regionloc.channel import ChannelParams
from regionloc.harness import REFERENCE_SENSORS, REFERENCE_SOURCE, reference_environment

PARAMS = ChannelParams(P=1.0, d0=0.1, beta=3.0, sigma=0.1)


@pytest.fixture(scope="module")
def scenario():
    return BoundScenario(reference_environment(), REFERENCE_SENSORS, REFERENCE_SOURCE, PARAMS)


def test_q_function_values():
    assert q_function(0.0) == 0.5
    for x in (0.5, 1.0, 2.0):
        assert q_function(x) + q_function(-x) == pytest.approx(1.0, abs=1e-15)
    tail, _ = quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), 1.0, np.inf, epsabs=1e-14)
    assert q_function(1.0) == pytest.approx(tail, abs=1e-10)


def test_eta_formula():
    assert eta_from(3.0, 0.0, 2.0, 3) == 0.0
    U, L, a, n = 0.7, 2.5, 2.0, 3
    assert eta_from(U, L, a, n) == pytest.approx(math.sqrt(U * U + L / (a * n)) - U)


def test_source_region_has_zero_margin(scenario):
    b = scenario.bounds[scenario.true_region]
    assert b.L == 0.0 and b.eta == 0.0
    assert scenario.true_region == 1


def test_bounds_against_random_sampling(scenario):
    env = scenario.env
    rng = np.random.default_rng(0)
    x0 = scenario.sensors
    for j in scenario.wrong_regions:
        reg = env.region(j)
        lo, hi = reg.bbox[:2], reg.bbox[2:]
        pts = rng.uniform(lo, hi, (1_000_000, 2))
        pts = pts[reg.contains(pts)]
        vals = sum_sq(PARAMS, x0, REFERENCE_SOURCE, pts)
        from regionloc.bounds import log_ratio
        gmax = np.abs(log_ratio(PARAMS, x0, REFERENCE_SOURCE, pts)).max()
        b = scenario.bounds[j]
        assert b.L <= vals.min() + 1e-12
        assert b.L >= 0.98 * vals.min()
        assert b.U >= gmax - 1e-12
        assert b.U <= 1.02 * gmax


def test_alpha_must_exceed_one(scenario):
    with pytest.raises(ValueError):
        compute_region_bounds(scenario.env.region(2), REFERENCE_SENSORS, REFERENCE_SOURCE, PARAMS, alpha=1.0)


def test_bounds_tighten_as_noise_shrinks(scenario):
    # the tail is monotone once exp(-L / 4 sigma^2) dominates the normalizer
    grid = [0.1, 0.05, 0.02, 0.01, 0.005, 0.001, 0.0002]
    for j in scenario.wrong_regions:
        b = scenario.bounds[j]
        area = scenario.env.region(j).area
        eps = [log_epsilon(b, area, scenario.env.total_area, s) for s in grid]
        mus = [mu(b, s) for s in grid]
        assert all(e2 < e1 for e1, e2 in zip(eps, eps[1:]))
        assert all(m2 >= m1 for m1, m2 in zip(mus, mus[1:]))
        assert mus[-1] > 0.99
    oms = [omega([scenario.bounds[j] for j in scenario.wrong_regions], s) for s in grid]
    assert all(o2 >= o1 for o1, o2 in zip(oms, oms[1:]))
    assert oms[-1] > 0.99


def test_vacuous_bound_passes():
    row = BoundRow(5.0, 2, -1.0, 0.0, 0.0, 0.0, 10)
    assert row.vacuous and row.passes()


def test_theorem_checks_smoke(scenario):
    rng = np.random.default_rng(1)
    rows = theorem_one_check(scenario, [0.1], 20, rng)
    assert [r.region for r in rows] == scenario.wrong_regions
    assert all(0 <= r.frequency <= 1 for r in rows)
    two = theorem_two_check(scenario, [0.1], 10, rng)
    assert two[0].identity_error < 1e-3
    text = rows_to_csv(rows)
    assert text.splitlines()[0].startswith("sigma,region,log_epsilon,mu,frequency")
    assert len(text.splitlines()) == len(rows) + 1


def test_lemma_six_smoke(scenario):
    j = scenario.wrong_regions[0]
    bad = lemma_six_violations(scenario.env.region(j), scenario.bounds[j], PARAMS, REFERENCE_SENSORS,
                               REFERENCE_SOURCE, 2000, np.random.default_rng(2))
    assert bad == 0
