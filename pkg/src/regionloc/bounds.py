"""Convergence-bound quantities and Monte Carlo checks of the two theorems.

For a region ``W_j`` not holding the source ``s``, with
``g_i(y) = ln((d0 + |y - x_i|^beta) / (d0 + |s - x_i|^beta))``:

* ``U_j`` bounds ``|g_i(y)|`` over the region and all sensors,
* ``L_j`` bounds ``sum_i g_i(y)^2`` from below over the region,
* ``eta_j = sqrt(U_j^2 + L_j / (alpha N)) - U_j``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, field, fields
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .channel import ChannelParams, log_power_at_distance, sample_measurement
from .geometry import (
    Environment,
    PolygonRegion,
    as_points,
    max_vertex_distance,
    region_distance,
    triangle_distance_range,
)
from .posterior import joint_posterior, log_evidence
from .quadrature import QuadratureSpec, logsumexp, subdivide

GRID = 200
REFINE_ROUNDS = 3
REFINE_FACTOR = 10


def q_function(x):
    """Standard normal upper tail ``P[N(0, 1) > x]``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def log_ratio(params: ChannelParams, sensors, source, points) -> np.ndarray:
    """``g_i(y)`` for every point and sensor, shape ``(n_points, n_sensors)``."""
    x = as_points(sensors)
    y = as_points(points)
    s = as_points(source)[0]
    d = np.linalg.norm(y[:, None, :] - x[None], axis=2)
    ds = np.linalg.norm(s[None] - x, axis=1)
    return log_power_at_distance(params, ds)[None, :] - log_power_at_distance(params, d)


def sum_sq(params, sensors, source, points, noise=None) -> np.ndarray:
    g = log_ratio(params, sensors, source, points)
    if noise is not None:
        g = g + noise
    return np.einsum("ij,ij->i", g, g)


def eta_from(U: float, L: float, alpha: float, n: int) -> float:
    c = L / (alpha * n)
    if c <= 0:
        return 0.0
    # sqrt(U^2 + c) - U without cancellation
    return c / (math.sqrt(U * U + c) + U)


@dataclass(frozen=True)
class RegionBounds:
    region_id: int
    U: float
    L: float
    eta: float
    alpha: float = 2.0
    n_sensors: int = 3
    argmin: tuple[float, float] | None = None


def _grid_points(region: PolygonRegion, n: int) -> np.ndarray:
    x0, y0, x1, y1 = region.bbox
    gx, gy = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    pts = pts[region.contains(pts)]
    return np.vstack([pts, region.vertices])


def grid_minimum(region: PolygonRegion, fn, n: int = GRID, rounds: int = REFINE_ROUNDS) -> tuple[float, np.ndarray]:
    """Grid search for ``min fn`` with local refinement around the incumbent."""
    pts = _grid_points(region, n)
    vals = fn(pts)
    k = int(np.argmin(vals))
    best, where = float(vals[k]), pts[k]
    x0, y0, x1, y1 = region.bbox
    h = max(x1 - x0, y1 - y0) / (n - 1)
    for _ in range(rounds):
        g = np.linspace(-h, h, 2 * REFINE_FACTOR + 1)
        gx, gy = np.meshgrid(where[0] + g, where[1] + g)
        loc = np.column_stack([gx.ravel(), gy.ravel()])
        loc = loc[region.contains(loc)]
        if len(loc):
            v = fn(loc)
            k = int(np.argmin(v))
            if v[k] < best:
                best, where = float(v[k]), loc[k]
        h /= REFINE_FACTOR
    return best, where


def certified_minimum(region: PolygonRegion, params, sensors, source, incumbent: float,
                      rel_gap: float = 1e-6, max_iter: int = 40) -> float:
    """Lower bound on ``min sum_i g_i^2`` over the region by branch and bound.

    Each ``g_i`` is monotone in the distance to sensor ``i``, so exact
    distance ranges per triangle give a valid lower bound per term.
    """
    x = as_points(sensors)
    s = as_points(source)[0]
    ms = log_power_at_distance(params, np.linalg.norm(s[None] - x, axis=1))
    tris = region.triangles()
    best = incumbent
    lb_global = 0.0
    for _ in range(max_iter):
        dmin, dmax = triangle_distance_range(tris, x)
        lo = ms[None] - log_power_at_distance(params, dmin)   # g at nearest point
        hi = ms[None] - log_power_at_distance(params, dmax)
        term = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(lo * lo, hi * hi))
        lb = term.sum(axis=1)
        cent = tris.mean(axis=1)
        best = min(best, float(sum_sq(params, x, s, cent).min()))
        lb_global = float(lb.min())
        if best - lb_global <= rel_gap * max(best, 1e-300):
            break
        keep = lb < best - rel_gap * best
        if not keep.any():
            break
        if 4 * np.count_nonzero(keep) > 400_000:
            break
        tris = subdivide(tris[keep]).reshape(-1, 3, 2)
    # pruned triangles were all bounded below by best * (1 - rel_gap)
    return min(lb_global, best * (1.0 - rel_gap))


def compute_region_bounds(region: PolygonRegion, sensors, source, params: ChannelParams,
                          alpha: float = 2.0) -> RegionBounds:
    """``U_j``, ``L_j`` and ``eta_j`` for one region.

    ``U`` is exact (each ``|g_i|`` peaks at the nearest or farthest point of
    the region); ``L`` is a certified lower bound on the minimum.  A source
    inside the region gives ``L = eta = 0``.
    """
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    x = as_points(sensors)
    s = as_points(source)[0]
    ms = log_power_at_distance(params, np.linalg.norm(s[None] - x, axis=1))
    U = 0.0
    for i, xi in enumerate(x):
        for d in (region_distance(region, xi), max_vertex_distance(region, xi)):
            U = max(U, abs(float(ms[i] - log_power_at_distance(params, d))))
    if region.contains(s)[0]:
        return RegionBounds(region.index, U, 0.0, 0.0, alpha, len(x), (float(s[0]), float(s[1])))
    fn = lambda pts: sum_sq(params, x, s, pts)
    best, where = grid_minimum(region, fn)
    L = certified_minimum(region, params, x, s, best)
    return RegionBounds(region.index, U, L, eta_from(U, L, alpha, len(x)), alpha, len(x),
                        (float(where[0]), float(where[1])))


def log_epsilon(b: RegionBounds, region_area: float, total_area: float, sigma: float) -> float:
    """``ln eps_j(sigma) = ln[A_j exp(-L_j / 4 sigma^2) / (A (2 pi sigma^2)^(N/2))]``."""
    return (math.log(region_area / total_area) - b.L / (4 * sigma * sigma)
            - 0.5 * b.n_sensors * math.log(2 * math.pi * sigma * sigma))


def mu(b: RegionBounds, sigma: float) -> float:
    """``(1 - 2 Q(eta_j / sigma))^N``, clamped at 0."""
    base = 1.0 - 2.0 * float(q_function(b.eta / sigma))
    return max(base, 0.0) ** b.n_sensors


def omega(bounds: Sequence[RegionBounds], sigma: float) -> float:
    return float(np.prod([mu(b, sigma) for b in bounds]))


@dataclass(frozen=True)
class BoundScenario:
    env: Environment
    sensors: np.ndarray
    source: np.ndarray
    params: ChannelParams
    alpha: float = 2.0
    bounds: dict = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sensors", as_points(self.sensors))
        object.__setattr__(self, "source", as_points(self.source)[0])
        if self.bounds is None:
            b = {r.index: compute_region_bounds(r, self.sensors, self.source, self.params, self.alpha)
                 for r in self.env.regions}
            object.__setattr__(self, "bounds", b)

    @property
    def true_region(self) -> int:
        return int(self.env.locate(self.source)[0])

    @property
    def wrong_regions(self) -> list[int]:
        return [j for j in self.env.ids if j != self.true_region]


@dataclass(frozen=True)
class BoundRow:
    sigma: float
    region: int
    log_epsilon: float
    mu: float
    frequency: float
    stderr: float
    trials: int
    log_psi: float = math.nan
    omega: float = math.nan

    @property
    def vacuous(self) -> bool:
        return self.mu <= 0.0

    def passes(self, n_se: float = 3.0) -> bool:
        bound = self.omega if not math.isnan(self.omega) else self.mu
        return self.frequency >= bound - n_se * self.stderr


def _stderr(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n) if n else math.nan


def _trial_z(sc: BoundScenario, sigma: float, rng: np.random.Generator):
    return sample_measurement(sc.params.with_sigma(sigma), sc.sensors, sc.source, 1, rng)


def theorem_one_check(sc: BoundScenario, sigma_grid, trials: int, rng: np.random.Generator,
                      quad: QuadratureSpec = QuadratureSpec()) -> list[BoundRow]:
    """Frequency of ``{p(z|H_j)P(H_j) <= eps_j}`` for each wrong region ``j``."""
    q = quad.exact()
    wrong = sc.wrong_regions
    used = range(len(sc.sensors))
    rows = []
    for sigma in sigma_grid:
        hits = np.zeros(len(wrong), dtype=int)
        for _ in range(trials):
            z = _trial_z(sc, sigma, rng)
            post = joint_posterior(z, sc.sensors, used, wrong, sc.env, sc.params, q)
            for k, j in enumerate(wrong):
                reg = sc.env.region(j)
                if post[j] <= log_epsilon(sc.bounds[j], reg.area, sc.env.total_area, sigma):
                    hits[k] += 1
        for k, j in enumerate(wrong):
            f = hits[k] / trials if trials else math.nan
            reg = sc.env.region(j)
            rows.append(BoundRow(float(sigma), j, log_epsilon(sc.bounds[j], reg.area, sc.env.total_area, sigma),
                                 mu(sc.bounds[j], sigma), f, _stderr(f, trials), trials))
    return rows


@dataclass(frozen=True)
class TheoremTwoRow(BoundRow):
    identity_error: float = 0.0


def theorem_two_check(sc: BoundScenario, sigma_grid, trials: int, rng: np.random.Generator,
                      quad: QuadratureSpec = QuadratureSpec()) -> list[TheoremTwoRow]:
    """Frequency of ``{p(z|H_i)P(H_i) >= Psi(sigma)}`` for the true region ``i``.

    ``Psi = p(z) - sum_{j != i} eps_j`` uses this trial's ``p(z)``, computed
    by integrating over the whole environment.  ``identity_error`` records the
    worst relative gap between ``p(z)`` and the sum of regional posteriors.
    """
    q = quad.exact()
    i = sc.true_region
    wrong = sc.wrong_regions
    used = range(len(sc.sensors))
    rows = []
    for sigma in sigma_grid:
        log_eps = np.array([log_epsilon(sc.bounds[j], sc.env.region(j).area, sc.env.total_area, sigma)
                            for j in wrong])
        log_eps_sum = float(logsumexp(log_eps)) if len(log_eps) else -math.inf
        hits = 0
        worst = 0.0
        psis = []
        for _ in range(trials):
            z = _trial_z(sc, sigma, rng)
            post = joint_posterior(z, sc.sensors, used, sc.env.ids, sc.env, sc.params, q)
            lpz = log_evidence(z, sc.sensors, used, sc.env, sc.params, q)
            total = float(logsumexp(post.log_values))
            worst = max(worst, abs(math.expm1(total - lpz)))
            # Psi / p(z) = 1 - sum(eps) / p(z)
            psi_ratio = -math.expm1(log_eps_sum - lpz)
            psis.append(lpz + math.log(psi_ratio) if psi_ratio > 0 else -math.inf)
            if psi_ratio <= 0 or math.exp(post[i] - lpz) >= psi_ratio:
                hits += 1
        f = hits / trials if trials else math.nan
        om = omega([sc.bounds[j] for j in wrong], sigma)
        rows.append(TheoremTwoRow(float(sigma), i, log_eps_sum, om, f, _stderr(f, trials), trials,
                                  float(np.median(psis)) if psis else math.nan, om, worst))
    return rows


def rows_to_csv(rows: Sequence[BoundRow]) -> str:
    """CSV with one column per row field; floats written with ``repr`` for bit stability."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cls = type(rows[0]) if rows else BoundRow
    w.writerow([f.name for f in fields(cls)])
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in astuple(r)])
    return buf.getvalue()


def lemma_six_violations(region: PolygonRegion, b: RegionBounds, params, sensors, source,
                         n_samples: int, rng: np.random.Generator, points: np.ndarray | None = None,
                         chunk: int = 2000) -> int:
    """Count noise draws ``|n_i| <= eta`` breaking ``min_y sum(g_i + n_i)^2 >= (alpha-1) L / alpha``.

    The minimum is taken over ``points`` (default: a dense sample of the
    region).  All ``2^N`` corners of the noise cube are checked as well.
    """
    x = as_points(sensors)
    n = len(x)
    if points is None:
        points = _grid_points(region, 60)
        _, where = grid_minimum(region, lambda p: sum_sq(params, x, source, p), n=60, rounds=3)
        h = region.scale / 60
        g = np.linspace(-h, h, 21)
        gx, gy = np.meshgrid(where[0] + g, where[1] + g)
        loc = np.column_stack([gx.ravel(), gy.ravel()])
        points = np.vstack([points, loc[region.contains(loc)]])
    G = log_ratio(params, x, source, points)
    target = (b.alpha - 1) / b.alpha * b.L
    corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T * b.eta
    noise = np.vstack([corners, rng.uniform(-b.eta, b.eta, size=(n_samples, n))])
    bad = 0
    for start in range(0, len(noise), chunk):
        nz = noise[start:start + chunk]
        vals = ((G[None, :, :] + nz[:, None, :]) ** 2).sum(axis=2).min(axis=1)
        bad += int(np.count_nonzero(vals < target))
    return bad
