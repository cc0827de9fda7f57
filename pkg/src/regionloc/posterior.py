"""Regional posteriors ``p(z | H_j) P(H_j)`` by adaptive cubature.

The integrand for region ``W_j`` is the Gaussian log-likelihood of the
measured log powers given a source at ``y``, averaged over ``W_j`` with the
uniform prior ``1/A``.  All values are returned as natural logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .channel import ChannelParams, MeasurementVector, log_power_at_distance
from .geometry import Environment, PolygonRegion, as_points, triangle_distance_range
from .quadrature import RULE_WEIGHTS, QuadratureSpec, integrate_log, refine_uniform, rule_points

H0 = 0


@dataclass(frozen=True)
class HypothesisPosterior:
    log_values: np.ndarray
    hypothesis_ids: tuple[int, ...]

    def __post_init__(self):
        lv = np.asarray(self.log_values, dtype=float).reshape(-1)
        if len(lv) == 0 or len(lv) != len(self.hypothesis_ids):
            raise ValueError("need one log value per hypothesis")
        if np.isnan(lv).any() or np.isposinf(lv).any():
            raise ValueError("log values must be finite or -inf")
        object.__setattr__(self, "log_values", lv)
        object.__setattr__(self, "hypothesis_ids", tuple(int(h) for h in self.hypothesis_ids))

    def __getitem__(self, hypothesis: int) -> float:
        return float(self.log_values[self.hypothesis_ids.index(hypothesis)])

    def argmax(self) -> int:
        """Hypothesis with the largest value; ties go to the lowest id."""
        top = self.log_values.max()
        return min(h for h, v in zip(self.hypothesis_ids, self.log_values) if v == top)

    def shares(self) -> np.ndarray:
        lv = self.log_values
        top = lv.max()
        if not np.isfinite(top):
            return np.full(len(lv), np.nan)
        w = np.exp(lv - top)
        return w / w.sum()

    def to_csv(self) -> str:
        rows = ["region,log_value"]
        rows += [f"{h},{float(v)!r}" for h, v in zip(self.hypothesis_ids, self.log_values)]
        return "\n".join(rows) + "\n"


class DeltaRegimeError(ValueError):
    """Posterior requested with zero effective noise."""


@lru_cache(maxsize=256)
def _region_triangles(region: PolygonRegion) -> np.ndarray:
    return region.triangles()


def _tri_sensor_distance_range(tris: np.ndarray, sensors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bracket the distance from each sensor to each triangle, ``(T, n)``.

    Uses the disk centred at the centroid through the farthest vertex, so
    the bracket is valid but not tight.
    """
    c = tris.mean(axis=1)
    rad = np.sqrt(((tris - c[:, None, :]) ** 2).sum(axis=-1)).max(axis=1)
    dc = np.sqrt(((c[:, None, :] - sensors[None, :, :]) ** 2).sum(axis=-1))
    return np.maximum(dc - rad[:, None], 0.0), dc + rad[:, None]


def _pow_half(d2: np.ndarray, beta: float) -> np.ndarray:
    """``d2 ** (beta / 2)`` in place, with cheap paths for common exponents."""
    if beta == 3.0:
        s = np.sqrt(d2)
        d2 *= s
    elif beta == 4.0:
        d2 *= d2
    elif beta == 2.0:
        pass
    else:
        np.power(d2, 0.5 * beta, out=d2)
    return d2


# cap on cached mean log powers per scenario (float64 entries)
CACHE_ENTRIES = 4_000_000


class _MeshCache:
    """Mean log powers on the shallow levels of every region's refinement tree.

    The first few levels are shared by every trial and every decider of a
    scenario, so their channel values are computed once.  Level ``l`` holds
    rule-node values ``(B 4^l, 7, N)`` and per-triangle values at the nearest
    and farthest distance ``(B 4^l, N)``.
    """

    def __init__(self, env: Environment, sensors: np.ndarray, params: ChannelParams):
        self.params = params
        self.sensors = sensors
        tris, self.offset = [], {}
        start = 0
        for r in env.regions:
            t = _region_triangles(r)
            self.offset[r] = start
            tris.append(t)
            start += len(t)
        self.base = np.concatenate(tris)
        n = len(self.base) * len(RULE_WEIGHTS) * len(sensors)
        self.max_level = -1
        while n * 4 ** (self.max_level + 1) <= CACHE_ENTRIES and self.max_level < 6:
            self.max_level += 1
        self.levels: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def base_nodes(self, region: PolygonRegion) -> np.ndarray | None:
        start = self.offset.get(region)
        if start is None:
            return None
        return np.arange(start, start + len(_region_triangles(region)))

    def level(self, level: int):
        got = self.levels.get(level)
        if got is None:
            tris = refine_uniform(self.base, level)
            pts = rule_points(tris).reshape(-1, 2)
            d = np.linalg.norm(pts[:, None, :] - self.sensors[None], axis=2)
            m = log_power_at_distance(self.params, d).reshape(len(tris), len(RULE_WEIGHTS), -1)
            dmin, dmax = triangle_distance_range(tris, self.sensors)
            got = (m, log_power_at_distance(self.params, dmin), log_power_at_distance(self.params, dmax))
            self.levels[level] = got
        return got


@lru_cache(maxsize=4)
def _mesh_cache(env: Environment, key: bytes, shape: tuple, P: float, d0: float, beta: float) -> _MeshCache:
    sensors = np.frombuffer(key, dtype=float).reshape(shape)
    return _MeshCache(env, sensors, ChannelParams(P, d0, beta, 0.0))


def mesh_cache(env: Environment, sensors: np.ndarray, params: ChannelParams) -> _MeshCache:
    pos = np.ascontiguousarray(sensors, dtype=float)
    return _mesh_cache(env, pos.tobytes(), pos.shape, params.P, params.d0, params.beta)


class _LogLikelihood:
    """``log p(z | y)`` restricted to a subset of sensors, with interval bounds.

    Implements the cubature integrand protocol; tree nodes on cached levels
    read channel values from ``cache`` instead of recomputing them.
    """

    def __init__(self, z: np.ndarray, sensors: np.ndarray, params: ChannelParams, sigma: float,
                 used: np.ndarray | None = None, cache: _MeshCache | None = None):
        self.z = z
        self.sensors = sensors
        self.params = params
        self.used = used
        self.cache = cache
        self.inv2var = 1.0 / (2.0 * sigma * sigma)
        self.sq_norms = np.einsum("ij,ij->i", sensors, sensors)
        self.log_pd0 = math.log(params.P * params.d0)
        self.log_norm = -0.5 * len(z) * math.log(2.0 * math.pi * sigma * sigma)

    def _cached(self, nodes: np.ndarray, level: int) -> bool:
        return (self.cache is not None and 0 <= level <= self.cache.max_level
                and len(nodes) > 0 and nodes.min() >= 0)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        d2 = np.einsum("ij,ij->i", pts, pts)[:, None] - 2.0 * (pts @ self.sensors.T) + self.sq_norms
        np.maximum(d2, 0.0, out=d2)
        _pow_half(d2, self.params.beta)
        d2 += self.params.d0
        np.log(d2, out=d2)
        # residual z - (ln(P d0) - ln(d0 + d^beta))
        d2 += self.z - self.log_pd0
        return self.log_norm - self.inv2var * np.einsum("ij,ij->i", d2, d2)

    def rule_values(self, tris: np.ndarray, nodes: np.ndarray, level: int) -> np.ndarray:
        if self._cached(nodes, level):
            m = self.cache.level(level)[0][nodes][:, :, self.used]
            r = self.z - m
            return self.log_norm - self.inv2var * np.einsum("tqi,tqi->tq", r, r)
        return self(rule_points(tris).reshape(-1, 2)).reshape(len(tris), -1)

    def upper_bound(self, tris: np.ndarray, nodes: np.ndarray, level: int) -> np.ndarray:
        if self._cached(nodes, level):
            _, near, far = self.cache.level(level)
            m_near, m_far = near[nodes][:, self.used], far[nodes][:, self.used]
        else:
            dmin, dmax = _tri_sensor_distance_range(tris, self.sensors)
            m_near = log_power_at_distance(self.params, dmin)
            m_far = log_power_at_distance(self.params, dmax)
        # mean log power decreases with distance
        lo, hi = self.z - m_near, self.z - m_far
        smin = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(lo * lo, hi * hi)).sum(axis=1)
        return self.log_norm - self.inv2var * smin

    def bounds(self, tris: np.ndarray) -> np.ndarray:
        return self.upper_bound(tris, np.full(len(tris), -1), -1)


def _setup(z: MeasurementVector, sensors, sensors_used, params: ChannelParams,
           env: Environment | None = None) -> _LogLikelihood:
    sigma = z.effective_sigma
    if not sigma > 0:
        raise DeltaRegimeError("effective sigma is zero; use the asymptotic oracles instead")
    used = list(sensors_used)
    if not used:
        raise ValueError("sensors_used must be non-empty")
    pos = as_points(sensors)
    if len(pos) != len(z):
        raise ValueError("measurement length does not match sensor count")
    cache = mesh_cache(env, pos, params) if env is not None else None
    return _LogLikelihood(z.log_powers[used], pos[used], params, sigma, np.array(used), cache)


def log_region_integrals(
    z: MeasurementVector,
    sensors,
    sensors_used: Sequence[int],
    groups: Sequence[Iterable[PolygonRegion]],
    env: Environment,
    params: ChannelParams,
    quad: QuadratureSpec,
) -> np.ndarray:
    """``log[(1/A) * integral of p(z|y)]`` over the union of each region group."""
    ll = _setup(z, sensors, sensors_used, params, env)
    tri_groups, node_groups = [], []
    for g in groups:
        ts = [_region_triangles(r) for r in g]
        tri_groups.append(np.concatenate(ts) if ts else np.zeros((0, 3, 2)))
        ns = [ll.cache.base_nodes(r) for r in g]
        ns = [np.full(len(t), -1) if n is None else n for n, t in zip(ns, ts)]
        node_groups.append(np.concatenate(ns) if ns else np.zeros(0, dtype=int))
    vals = integrate_log(tri_groups, ll, spec=quad, base_nodes=node_groups)
    return vals - math.log(env.total_area)


def _as_region(env: Environment, region) -> PolygonRegion:
    return region if isinstance(region, PolygonRegion) else env.region(int(region))


def regional_log_density(z, sensors, sensors_used, region, env, params, quad=QuadratureSpec()) -> float:
    """``ln[p(z_used | H_j) P(H_j)]`` for a single region."""
    r = _as_region(env, region)
    return float(log_region_integrals(z, sensors, sensors_used, [[r]], env, params, quad)[0])


def joint_posterior(z, sensors, sensors_used, hypotheses, env, params, quad=QuadratureSpec()) -> HypothesisPosterior:
    """Unnormalized log posteriors for the listed region ids."""
    hyps = [int(h) for h in hypotheses]
    groups = [[env.region(h)] for h in hyps]
    vals = log_region_integrals(z, sensors, sensors_used, groups, env, params, quad)
    return HypothesisPosterior(vals, tuple(hyps))


def complement_regions(env: Environment, neighborhood: Iterable[int]) -> list[PolygonRegion]:
    nb = {int(j) for j in neighborhood}
    unknown = nb - set(env.ids)
    if unknown:
        raise ValueError(f"unknown region ids {sorted(unknown)}")
    return [r for r in env.regions if r.index not in nb]


def complement_posterior(z, sensors, sensors_used, neighborhood, env, params, quad=QuadratureSpec()) -> float:
    """``ln[p(z_used | H_0) P(H_0)]`` with ``H_0`` the complement of ``neighborhood``.

    Integrated directly over the complement regions; an empty complement
    gives ``-inf``.
    """
    nb = list(neighborhood)
    if not nb:
        raise ValueError("neighborhood must be non-empty")
    rest = complement_regions(env, nb)
    if not rest:
        return -math.inf
    return float(log_region_integrals(z, sensors, sensors_used, [rest], env, params, quad)[0])


def neighborhood_posterior(z, sensors, sensors_used, neighborhood, env, params, quad=QuadratureSpec()) -> HypothesisPosterior:
    """Posteriors for each neighborhood region plus ``H_0``, in one pass.

    The returned ids are ``(0, *sorted(neighborhood))``.
    """
    nb = sorted({int(j) for j in neighborhood})
    rest = complement_regions(env, nb)
    groups = [rest] + [[env.region(j)] for j in nb]
    vals = log_region_integrals(z, sensors, sensors_used, groups, env, params, quad)
    return HypothesisPosterior(vals, (H0, *nb))


def log_evidence(z, sensors, sensors_used, env, params, quad=QuadratureSpec()) -> float:
    """``ln p(z_used)``: the likelihood averaged over all of ``C`` in one group."""
    return float(log_region_integrals(z, sensors, sensors_used, [env.regions], env, params, quad.exact())[0])
