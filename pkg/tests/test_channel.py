import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regionloc.channel import (
    ChannelParams,
    MeasurementVector,
    log_power_at_distance,
    mean_log_power,
    mean_log_powers,
    sample_measurement,
)


@pytest.mark.parametrize("kw", [{"P": 0}, {"d0": 0}, {"beta": 2.0}, {"sigma": -1}])
def test_params_validated(kw):
    with pytest.raises(ValueError):
        ChannelParams(**kw)


def test_sensor_at_source_gives_full_power():
    p = ChannelParams(P=2.0, d0=0.5, beta=3)
    assert mean_log_power(p, [1, 1], [1, 1]) == pytest.approx(math.log(2.0))


def test_known_value_quadratic_loss():
    # beta = 2 sits outside the validated parameter range; the formula itself still applies
    p = SimpleNamespace(P=1.0, d0=1.0, beta=2.0)
    assert log_power_at_distance(p, 3.0) == pytest.approx(math.log(0.1))


def test_known_value():
    p = ChannelParams(P=1, d0=1, beta=3)
    assert mean_log_power(p, [0, 0], [2, 0]) == pytest.approx(math.log(1 / 9))


def test_power_never_exceeds_transmit_power():
    rng = np.random.default_rng(0)
    p = ChannelParams(P=1.5, d0=0.2, beta=3.5)
    m = mean_log_powers(p, rng.uniform(-5, 5, (10, 2)), rng.uniform(-5, 5, (10_000, 2)))
    pw = np.exp(m)
    assert np.all(pw > 0) and np.all(pw <= 1.5)


def test_zero_noise_is_exact():
    p = ChannelParams(sigma=0.0)
    sensors = [[0, 0], [1, 0], [0, 1]]
    z = sample_measurement(p, sensors, [0.3, 0.4], 7, np.random.default_rng(1))
    assert np.array_equal(z.log_powers, mean_log_powers(p, sensors, [0.3, 0.4])[0])
    assert z.effective_sigma == 0.0


def test_single_sample_sigma():
    z = sample_measurement(ChannelParams(sigma=0.3), [[0, 0]], [1, 1], 1, np.random.default_rng(0))
    assert z.k == 1 and z.effective_sigma == 0.3


def test_aggregated_variance():
    p = ChannelParams(sigma=0.4)
    vals = np.array([
        sample_measurement(p, [[0, 0]], [0.5, 0.5], 25, np.random.default_rng(seed)).log_powers[0]
        for seed in range(10_000)
    ])
    assert vals.var() == pytest.approx(0.4**2 / 25, rel=0.1)


def test_linear_average_is_biased_upwards():
    p = ChannelParams(sigma=0.5)
    rng = np.random.default_rng(3)
    mean = mean_log_power(p, [0, 0], [0.5, 0.5])
    vals = [sample_measurement(p, [[0, 0]], [0.5, 0.5], 50, rng, linear_average=True).log_powers[0]
            for _ in range(500)]
    # log of the mean of lognormals sits near mean + sigma^2 / 2
    assert np.mean(vals) == pytest.approx(mean + 0.125, abs=0.02)


def test_csv_round_trip():
    z = MeasurementVector([-1.25, -2.5, -0.1], k=4, effective_sigma=0.15)
    trial, back = MeasurementVector.from_csv_row(z.to_csv_row(9), 0.3)
    assert trial == 9 and back.k == 4
    assert np.array_equal(back.log_powers, z.log_powers)
    assert back.effective_sigma == pytest.approx(0.15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(2.01, 6.0), st.floats(0.01, 5.0))
def test_log_power_decreasing_in_distance(d, beta, d0):
    p = ChannelParams(d0=d0, beta=beta)
    assert log_power_at_distance(p, d + 0.1) < log_power_at_distance(p, d) + 1e-15
