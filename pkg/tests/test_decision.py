import warnings

import numpy as np
import pytest

from regionloc.channel import ChannelParams, MeasurementVector, noiseless_measurement, sample_measurement
from regionloc.decision import (
    ABSTAIN,
    AssumptionWarning,
    CommGraph,
    Decision,
    NoDecisionError,
    decide_all_to_all,
    decide_limited,
    majority_vote,
)
from regionloc.geometry import Environment, rectangle, unit_square, voronoi_partition
from regionloc.harness import REFERENCE_SENSORS, reference_environment
from regionloc.posterior import H0, HypothesisPosterior
from regionloc.quadrature import QuadratureSpec

PARAMS = ChannelParams(P=1.0, d0=0.1, beta=3.0, sigma=0.01)


def vote(chosen):
    return Decision(0, chosen, HypothesisPosterior([0.0], (chosen,)))


def test_graph_construction():
    g = CommGraph.from_edges(4, [(1, 0), (0, 1), (2, 3)])
    assert g.edges == {(0, 1), (2, 3)}
    assert g.closed_neighborhood(0) == [0, 1]
    assert CommGraph.complete(5).is_complete()
    with pytest.raises(ValueError):
        CommGraph.from_edges(3, [(1, 1)])
    with pytest.raises(ValueError):
        CommGraph.from_edges(3, [(0, 5)])


def test_k_nearest_is_symmetric():
    pts = np.random.default_rng(0).uniform(0, 1, (10, 2))
    g = CommGraph.k_nearest(pts, 2)
    assert all(g.degree(i) >= 2 for i in range(10))


def test_degree_warning():
    with pytest.warns(AssumptionWarning):
        CommGraph.from_edges(3, [(0, 1)]).check_limited()


def test_collinear_sensors_warn():
    env = Environment([rectangle(0, 0, 1, 1, 1)])
    sensors = np.array([[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]])
    z = noiseless_measurement(PARAMS, sensors, [0.2, 0.7], 0.1)
    with pytest.warns(AssumptionWarning):
        decide_all_to_all(z, sensors, env, PARAMS)


def test_small_sigma_all_to_all_finds_region():
    env = reference_environment()
    z = noiseless_measurement(PARAMS, REFERENCE_SENSORS, [0.7, 0.3], 0.01)
    assert decide_all_to_all(z, REFERENCE_SENSORS, env, PARAMS).chosen == 2


def test_symmetric_tie_goes_to_lowest_id():
    env = Environment([rectangle(0, 0, 1, 0.5, 1), rectangle(0, 0.5, 1, 1, 2)])
    sensors = np.array([[0.2, 0.5], [0.8, 0.5], [0.5, 0.5]])
    z = noiseless_measurement(PARAMS, sensors, [0.3, 0.5], 0.05)
    d = decide_all_to_all(z, sensors, env, PARAMS, QuadratureSpec(rel_tol=1e-6).exact(), check=False)
    assert d.scores[1] == pytest.approx(d.scores[2], abs=1e-6)
    assert d.chosen == 1 or d.scores[2] > d.scores[1]


def test_zero_noise_decisions_use_exact_location():
    sites = np.random.default_rng(4).uniform(0.05, 0.95, (12, 2))
    env = voronoi_partition(sites, unit_square())
    g = CommGraph.region_adjacency(env)
    rng = np.random.default_rng(5)
    p0 = PARAMS.with_sigma(0.0)
    for _ in range(50):
        s = rng.uniform(0, 1, 2)
        truth = int(env.locate(s)[0])
        z = sample_measurement(p0, sites, s, 1, rng)
        assert decide_all_to_all(z, sites, env, p0, check=False).chosen == truth
        ds = [decide_limited(i, z, sites, g, env, p0, check=False) for i in range(len(sites))]
        assert majority_vote(ds) == truth


def limited_setup():
    sites = np.random.default_rng(7).uniform(0.05, 0.95, (9, 2))
    env = voronoi_partition(sites, unit_square())
    return sites, env, CommGraph.region_adjacency(env)


def test_limited_source_in_own_region():
    sites, env, g = limited_setup()
    i = 4
    s = env.region(i + 1).centroid
    z = noiseless_measurement(PARAMS, sites, s, 0.01)
    d = decide_limited(i, z, sites, g, env, PARAMS, check=False)
    assert d.chosen == i + 1
    assert d.scores.hypothesis_ids[0] == H0


def test_limited_source_far_away_gives_outside():
    sites, env, g = limited_setup()
    far = max(range(9), key=lambda j: np.linalg.norm(sites[j] - sites[0]))
    assert far + 1 not in [k + 1 for k in g.closed_neighborhood(0)]
    z = noiseless_measurement(PARAMS, sites, sites[far], 0.01)
    assert decide_limited(0, z, sites, g, env, PARAMS, check=False).chosen == H0


def test_complete_graph_matches_all_to_all():
    sites, env, _ = limited_setup()
    g = CommGraph.complete(9)
    rng = np.random.default_rng(8)
    q = QuadratureSpec(rel_tol=1e-5)
    for _ in range(5):
        z = sample_measurement(PARAMS.with_sigma(0.3), sites, rng.uniform(0, 1, 2), 1, rng)
        a = decide_all_to_all(z, sites, env, PARAMS, q, check=False)
        b = decide_limited(3, z, sites, g, env, PARAMS, q, check=False)
        assert a.chosen == b.chosen


def test_majority_vote_rules():
    assert majority_vote([vote(2), vote(2), vote(3)]) == 2
    assert majority_vote([vote(1), vote(2)]) == 1
    assert majority_vote([vote(H0), vote(H0)]) == ABSTAIN
    assert majority_vote([vote(H0), vote(H0), vote(4)]) == 4


def test_decision_must_be_argmax():
    with pytest.raises(ValueError):
        Decision(0, 2, HypothesisPosterior([1.0, 0.0], (1, 2)))


def test_extreme_readings_still_decide():
    env = reference_environment()
    # readings far above anything the geometry allows: log space keeps every score finite
    z = MeasurementVector([5.0, 5.0, 5.0], 1, 0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = decide_all_to_all(z, REFERENCE_SENSORS, env, PARAMS)
    assert np.isfinite(d.scores.log_values).all()


def test_no_decision_error_when_nothing_is_admissible():
    from regionloc.decision import _decide
    with pytest.raises(NoDecisionError):
        _decide(0, HypothesisPosterior([-np.inf, -np.inf], (1, 2)))
