import math
from types import SimpleNamespace

import numpy as np
import pytest

from regionloc.asymptotic import (
    arc_argmax,
    arc_posteriors,
    circle_intersections,
    noiseless_locate,
    radius_from_power,
    trilaterate,
    two_sensor_locate,
)
from regionloc.channel import ChannelParams, MeasurementVector, mean_log_power, mean_log_powers
from regionloc.geometry import GeometryError, containing_region, unit_square, voronoi_partition
from regionloc.harness import reference_environment
from regionloc.posterior import joint_posterior
from regionloc.quadrature import QuadratureSpec

P = ChannelParams(P=1.0, d0=0.1, beta=3.0, sigma=0.005)


def test_radius_of_full_power_is_zero():
    assert radius_from_power(P, math.log(P.P)) == 0.0


def test_radius_quadratic_loss_example():
    p = SimpleNamespace(P=1.0, d0=1.0, beta=2.0)
    assert radius_from_power(p, math.log(0.1)) == pytest.approx(3.0)


def test_radius_rejects_impossible_reading():
    with pytest.raises(ValueError):
        radius_from_power(P, 0.5)


def test_radius_round_trip():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10_000):
        p = ChannelParams(P=rng.uniform(0.1, 10), d0=rng.uniform(0.01, 2), beta=rng.uniform(2.1, 5))
        x, s = rng.uniform(-3, 3, (2, 2))
        worst = max(worst, abs(radius_from_power(p, mean_log_power(p, x, s)) - np.linalg.norm(x - s)))
    assert worst < 1e-10


def test_circle_inside_region_wins_outright():
    env = reference_environment()
    x = np.array([0.2, 0.2])
    lp = mean_log_power(P, x, [0.3, 0.2])
    arcs = arc_posteriors(env, x, lp, P)
    assert [a.theta for a in arcs] == pytest.approx([2 * math.pi, 0, 0, 0])
    assert arc_argmax(arcs) == 1


def test_bisected_circle_gives_equal_values():
    env = reference_environment()
    x = np.array([0.5, 0.25])  # on the edge shared by regions 1 and 2
    arcs = arc_posteriors(env, x, mean_log_power(P, x, [0.5, 0.35]), P)
    assert arcs[0].value == pytest.approx(arcs[1].value)
    assert arcs[0].value > 0


def test_zero_radius_is_certain():
    env = reference_environment()
    x = np.array([0.7, 0.8])
    arcs = arc_posteriors(env, x, math.log(P.P), P)
    assert arc_argmax(arcs) == 4
    assert [a.certain for a in arcs] == [False, False, False, True]


def test_arc_argmax_matches_small_sigma_posterior():
    env = reference_environment()
    rng = np.random.default_rng(0)
    agree = checked = 0
    for _ in range(100):
        x, s = rng.uniform(0.05, 0.95, 2), rng.uniform(0, 1, 2)
        lp = mean_log_power(P, x, s)
        arcs = arc_posteriors(env, x, lp, P)
        v = sorted((a.value for a in arcs), reverse=True)
        if v[1] > 0.95 * v[0]:
            continue  # near-tie: resolution limited
        post = joint_posterior(MeasurementVector([lp], 1, 0.005), [x], [0], env.ids, env, P, QuadratureSpec())
        checked += 1
        agree += post.argmax() == arc_argmax(arcs)
    assert checked > 30
    assert agree >= 0.99 * checked


def test_circle_intersections():
    pts = circle_intersections([0, 0], 5.0, [8, 0], 5.0)
    assert np.allclose(sorted(map(tuple, pts)), [(4, -3), (4, 3)])
    assert circle_intersections([0, 0], 1.0, [2, 0], 1.0).shape == (1, 2)
    with pytest.raises(GeometryError):
        circle_intersections([0, 0], 1.0, [3, 0], 1.0)


def test_two_sensor_bisector_and_zero_radius():
    x = np.array([[0.3, 0.5], [0.7, 0.5]])
    env = voronoi_partition(x, unit_square())
    s = np.array([0.5, 0.8])
    r = np.linalg.norm(x - s, axis=1)
    assert two_sensor_locate(env, x[0], x[1], r[0], r[1]) == 1  # tie goes to the lower id
    r = np.linalg.norm(x - x[0], axis=1)
    assert two_sensor_locate(env, x[0], x[1], r[0], r[1]) == 1


def test_two_sensor_locate_is_exact():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        x = rng.uniform(0.05, 0.95, (2, 2))
        env = voronoi_partition(x, unit_square())
        s = rng.uniform(0, 1, 2)
        r = np.linalg.norm(x - s, axis=1)
        assert two_sensor_locate(env, x[0], x[1], r[0], r[1]) == containing_region(env, s)


def test_trilateration_recovers_source():
    rng = np.random.default_rng(2)
    for _ in range(200):
        x = rng.uniform(0, 1, (4, 2))
        s = rng.uniform(0, 1, 2)
        assert np.allclose(trilaterate(x, np.linalg.norm(x - s, axis=1)), s, atol=1e-9)
        assert np.allclose(noiseless_locate(P, x, mean_log_powers(P, x, s)[0]), s, atol=1e-9)
    with pytest.raises(GeometryError):
        trilaterate([[0, 0], [1, 1], [2, 2]], [1, 1, 1])
