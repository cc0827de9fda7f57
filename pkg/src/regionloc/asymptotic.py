"""Zero-noise oracles: arc-length posteriors and two-sensor localization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams
from .geometry import Environment, GeometryError, as_points, containing_region, subtended_angle


@dataclass(frozen=True)
class ArcPosterior:
    """Limit of ``p(ln P_r | H_j) P(H_j)`` for one sensor as the noise vanishes.

    ``certain`` marks the zero-radius case, where the source sits on the
    sensor and its region wins outright (``value`` is left at 0 there).
    """

    region_id: int
    radius: float
    theta: float
    value: float
    certain: bool = False


def radius_from_power(params: ChannelParams, log_power: float) -> float:
    """Invert the noiseless channel: the source-sensor distance for a reading."""
    excess = math.log(params.P) - log_power
    if excess < -1e-12 * max(1.0, abs(log_power)):
        raise ValueError(f"log power {log_power} exceeds ln P = {math.log(params.P)}")
    if excess <= 0:
        return 0.0
    return (math.expm1(excess) * params.d0) ** (1.0 / params.beta)


def arc_value(params: ChannelParams, radius: float, theta: float, total_area: float) -> float:
    r = radius
    return (params.d0 + r**params.beta) * theta / (total_area * params.beta * r ** (params.beta - 2))


def arc_posteriors(env: Environment, sensor, log_power: float, params: ChannelParams) -> list[ArcPosterior]:
    r = radius_from_power(params, log_power)
    x = as_points(sensor)[0]
    if r == 0:
        home = containing_region(env, x)
        return [ArcPosterior(reg.index, 0.0, 2 * math.pi if reg.index == home else 0.0, 0.0, reg.index == home)
                for reg in env.regions]
    out = []
    for reg in env.regions:
        th = subtended_angle(reg, x, r)
        out.append(ArcPosterior(reg.index, r, th, arc_value(params, r, th, env.total_area)))
    return out


def arc_argmax(posts: list[ArcPosterior]) -> int:
    """Best region under the arc values; lowest id on ties."""
    for p in posts:
        if p.certain:
            return p.region_id
    top = max(p.value for p in posts)
    return min(p.region_id for p in posts if p.value == top)


def circle_intersections(c1, r1: float, c2, r2: float, tol: float = 1e-12) -> np.ndarray:
    """Intersection points of two circles, ``(k, 2)`` with k in {1, 2}."""
    a = as_points(c1)[0]
    b = as_points(c2)[0]
    d = float(np.linalg.norm(b - a))
    scale = max(d, r1, r2, 1.0)
    if d == 0:
        raise GeometryError("concentric circles")
    if d > r1 + r2 + tol * scale or d < abs(r1 - r2) - tol * scale:
        raise GeometryError("circles do not intersect")
    along = (d * d + r1 * r1 - r2 * r2) / (2 * d)
    h2 = r1 * r1 - along * along
    u = (b - a) / d
    base = a + along * u
    if h2 <= (tol * scale) ** 2:
        return base.reshape(1, 2)
    h = math.sqrt(h2)
    perp = np.array([-u[1], u[0]])
    return np.array([base + h * perp, base - h * perp])


def two_sensor_locate(env: Environment, x1, x2, r1: float, r2: float) -> int:
    """Region holding the source given exact distances to two sensors.

    ``env`` should be the two Voronoi cells of ``x1`` and ``x2``; whichever
    intersection points fall inside the environment share a cell.
    """
    pts = circle_intersections(x1, r1, x2, r2)
    ids = env.locate(pts)
    inside = ids[ids > 0]
    if len(inside) == 0:
        # intersection grazing the outer boundary; accept within tolerance
        tol = 1e-9 * env.scale
        for p in pts:
            for reg in env.regions:
                if reg.contains(p, tol=tol)[0]:
                    return reg.index
        raise GeometryError("no circle intersection lies in the environment")
    return int(inside[0])


def trilaterate(sensors, radii) -> np.ndarray:
    """Point at the given exact distances from three or more non-collinear sensors.

    Linear least squares on the circle equations differenced against the
    first sensor, then a few Gauss-Newton steps on the distances.
    """
    pos = as_points(sensors)
    r = np.asarray(radii, dtype=float)
    if len(pos) < 3:
        raise GeometryError("trilateration needs at least three sensors")
    a = 2.0 * (pos[1:] - pos[0])
    b = (pos[1:] ** 2).sum(1) - (pos[0] ** 2).sum() - r[1:] ** 2 + r[0] ** 2
    y, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < 2:
        raise GeometryError("sensors are collinear; the location is ambiguous")
    for _ in range(3):
        diff = y - pos
        d = np.linalg.norm(diff, axis=1)
        ok = d > 0
        if not ok.all():
            break
        step, *_ = np.linalg.lstsq(diff / d[:, None], r - d, rcond=None)
        y = y + step
    return y


def noiseless_locate(params: ChannelParams, sensors, log_powers) -> np.ndarray:
    """Source position recovered from exact readings."""
    radii = [radius_from_power(params, lp) for lp in np.asarray(log_powers, dtype=float)]
    return trilaterate(sensors, radii)
