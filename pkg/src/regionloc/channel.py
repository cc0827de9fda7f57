"""Received power model with lognormal shadowing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import as_points


@dataclass(frozen=True)
class ChannelParams:
    """Path-loss model ``P_r = P d0 / (d0 + d**beta)`` plus log-domain noise.

    ``sigma`` is the standard deviation of the Gaussian noise added to
    ``ln P_r`` for a single sample.
    """

    P: float = 1.0
    d0: float = 1.0
    beta: float = 3.0
    sigma: float = 0.1

    def __post_init__(self):
        if not self.P > 0:
            raise ValueError("transmit power P must be positive")
        if not self.d0 > 0:
            raise ValueError("d0 must be positive")
        if not self.beta > 2:
            raise ValueError("path-loss exponent beta must exceed 2")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")

    def with_sigma(self, sigma: float) -> "ChannelParams":
        return ChannelParams(self.P, self.d0, self.beta, sigma)


def log_power_at_distance(params: ChannelParams, dist):
    """Noiseless ``ln P_r`` at the given distance(s)."""
    dist = np.asarray(dist, dtype=float)
    return math.log(params.P * params.d0) - np.log(params.d0 + dist**params.beta)


def mean_log_power(params: ChannelParams, sensor, source) -> float:
    d = float(np.linalg.norm(as_points(sensor)[0] - as_points(source)[0]))
    return float(log_power_at_distance(params, d))


def mean_log_powers(params: ChannelParams, sensors, sources) -> np.ndarray:
    """Noiseless log powers, shape ``(n_sources, n_sensors)``."""
    s = as_points(sensors)
    y = as_points(sources)
    d = np.linalg.norm(y[:, None, :] - s[None, :, :], axis=2)
    return log_power_at_distance(params, d)


@dataclass(frozen=True)
class MeasurementVector:
    log_powers: np.ndarray
    k: int = 1
    effective_sigma: float = 0.0

    def __post_init__(self):
        lp = np.asarray(self.log_powers, dtype=float).reshape(-1)
        lp.setflags(write=False)
        object.__setattr__(self, "log_powers", lp)
        if self.k < 1:
            raise ValueError("aggregation count k must be >= 1")

    def __len__(self) -> int:
        return len(self.log_powers)

    def restrict(self, sensors) -> "MeasurementVector":
        return MeasurementVector(self.log_powers[list(sensors)], self.k, self.effective_sigma)

    def to_csv_row(self, trial: int) -> str:
        vals = ",".join(repr(float(v)) for v in self.log_powers)
        return f"{trial},{self.k},{vals}"

    @classmethod
    def from_csv_row(cls, row: str, sigma: float) -> tuple[int, "MeasurementVector"]:
        """Parse ``trial,k,lnP_1,...``; ``sigma`` is the single-sample noise level."""
        fields = [f.strip() for f in row.split(",") if f.strip()]
        trial, k = int(fields[0]), int(fields[1])
        vals = np.array([float(f) for f in fields[2:]])
        return trial, cls(vals, k, sigma / math.sqrt(k))


def sample_measurement(
    params: ChannelParams,
    sensors,
    source,
    k: int,
    rng: np.random.Generator,
    *,
    linear_average: bool = False,
) -> MeasurementVector:
    """Draw ``k`` noisy readings per sensor and aggregate them.

    By default the ``k`` log readings are averaged, which makes the
    aggregated noise exactly ``N(0, sigma**2 / k)``.  ``linear_average``
    averages the linear powers instead and takes the log of the mean.
    The source is held fixed across the ``k`` samples.
    """
    if k < 1:
        raise ValueError("aggregation count k must be >= 1")
    mean = mean_log_powers(params, sensors, source)[0]
    n = len(mean)
    if params.sigma == 0:
        return MeasurementVector(mean.copy(), k, 0.0)
    noise = rng.normal(0.0, params.sigma, size=(k, n))
    if linear_average:
        samples = mean[None, :] + noise
        top = samples.max(axis=0)
        agg = top + np.log(np.mean(np.exp(samples - top), axis=0))
    else:
        agg = mean + noise.mean(axis=0)
    return MeasurementVector(agg, k, params.sigma / math.sqrt(k))


def noiseless_measurement(params: ChannelParams, sensors, source, sigma_eff: float = 0.0) -> MeasurementVector:
    """Exact readings tagged with a nominal effective noise level."""
    return MeasurementVector(mean_log_powers(params, sensors, source)[0], 1, sigma_eff)
