"""Planar primitives: polygonal regions, Voronoi partitions, circle arcs.

Regions carry a hypothesis id (1-based; id 0 is reserved for the
"source outside the neighborhood" hypothesis).  Vertices are stored as
``(n, 2)`` float arrays in counterclockwise order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-12
REL_AREA_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid or degenerate geometric input."""


class Point2(NamedTuple):
    x: float
    y: float


def as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"expected (n, 2) coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("coordinates must be finite")
    return arr


def signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_cross(p1, p2, q1, q2, eps: float) -> bool:
    """True when the segments intersect at a point interior to both."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    return ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    )


def _is_simple(v: np.ndarray) -> bool:
    n = len(v)
    scale = float(np.ptp(v, axis=0).max())
    eps = 1e-12 * scale * scale
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a, b, v[j], v[(j + 1) % n], eps):
                return False
    return True


@dataclass(frozen=True, eq=False)
class PolygonRegion:
    """A simple polygon standing for one localization region."""

    vertices: np.ndarray
    index: int = 1
    area: float = field(init=False)

    def __post_init__(self):
        v = as_points(self.vertices)
        # drop repeated closing vertex and consecutive duplicates
        keep = np.any(np.abs(v - np.roll(v, 1, axis=0)) > 0.0, axis=1)
        v = v[keep] if keep.any() else v[:1]
        if len(v) < 3:
            raise GeometryError(f"region {self.index}: fewer than 3 distinct vertices")
        a = signed_area(v)
        if a < 0:
            v = v[::-1].copy()
            a = -a
        scale = float(np.ptp(v, axis=0).max())
        if not a > 1e-14 * scale * scale:
            raise GeometryError(f"region {self.index}: zero area")
        if not _is_simple(v):
            raise GeometryError(f"region {self.index}: self-intersecting boundary")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "area", a)

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        c = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        return np.array([np.dot(v[:, 0] + w[:, 0], c), np.dot(v[:, 1] + w[:, 1], c)]) / (
            6.0 * self.area
        )

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @property
    def scale(self) -> float:
        return float(np.ptp(self.vertices, axis=0).max())

    def is_convex(self) -> bool:
        v = self.vertices
        a = np.roll(v, -1, axis=0) - v
        b = np.roll(v, -2, axis=0) - np.roll(v, -1, axis=0)
        cr = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        return bool(np.all(cr >= -1e-12 * self.scale**2))

    def contains(self, points, *, closed: bool = True, tol: float | None = None) -> np.ndarray:
        """Vectorized membership test.

        With ``closed=True`` points within ``tol`` of the boundary count as
        inside; with ``closed=False`` they count as outside.
        """
        pts = as_points(points)
        if tol is None:
            tol = 1e-12 * self.scale
        inside = _crossing_test(pts, self.vertices)
        on_edge = _boundary_distance(pts, self.vertices) <= tol
        if closed:
            return inside | on_edge
        return inside & ~on_edge

    def distance(self, p) -> float:
        return region_distance(self, p)

    def triangles(self) -> np.ndarray:
        return ear_clip(self.vertices)


def _crossing_test(pts: np.ndarray, v: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0:1], pts[:, 1:2]
    x1, y1 = v[:, 0], v[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = straddle & (x < xint)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


def _segment_distances(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from each point to each segment, shape (npts, nseg)."""
    ab = b - a
    ap = pts[:, None, :] - a[None, :, :]
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("kij,ij->ki", ap, ab) / np.where(denom > 0, denom, 1.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a[None, :, :] + t[..., None] * ab[None, :, :]
    return np.linalg.norm(pts[:, None, :] - proj, axis=2)


def _boundary_distance(pts: np.ndarray, v: np.ndarray) -> np.ndarray:
    return _segment_distances(pts, v, np.roll(v, -1, axis=0)).min(axis=1)


def region_distance(region: PolygonRegion, p) -> float:
    """Euclidean distance from ``p`` to the closed region (0 inside)."""
    pts = as_points(p)
    if region.contains(pts)[0]:
        return 0.0
    return float(_boundary_distance(pts, region.vertices)[0])


def max_vertex_distance(region: PolygonRegion, p) -> float:
    """Largest distance from ``p`` to any point of the region."""
    return float(np.linalg.norm(region.vertices - as_points(p)[0], axis=1).max())


def ear_clip(vertices: np.ndarray) -> np.ndarray:
    """Triangulate a simple CCW polygon; returns an ``(n - 2, 3, 2)`` array."""
    v = [np.asarray(p, dtype=float) for p in vertices]
    idx = list(range(len(v)))
    scale = float(np.ptp(np.asarray(vertices), axis=0).max())
    eps = 1e-14 * scale * scale
    tris = []
    guard = 0
    while len(idx) > 3:
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = v[i0], v[i1], v[i2]
            if _cross(a, b, c) <= eps:
                continue
            ear = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = v[j]
                if _cross(a, b, p) >= -eps and _cross(b, c, p) >= -eps and _cross(c, a, p) >= -eps:
                    ear = False
                    break
            if ear:
                tris.append((a, b, c))
                del idx[k]
                break
        else:
            # only collinear remnants left; drop the flattest vertex
            areas = [abs(_cross(v[idx[k - 1]], v[idx[k]], v[idx[(k + 1) % n]])) for k in range(n)]
            del idx[int(np.argmin(areas))]
        guard += 1
        if guard > 10 * len(v):
            raise GeometryError("ear clipping failed; polygon may not be simple")
    if len(idx) == 3 and _cross(v[idx[0]], v[idx[1]], v[idx[2]]) > eps:
        tris.append((v[idx[0]], v[idx[1]], v[idx[2]]))
    return np.array(tris, dtype=float).reshape(-1, 3, 2)


def _shared_edge_length(r1: PolygonRegion, r2: PolygonRegion, tol: float) -> float:
    a1, b1 = r1.edges
    a2, b2 = r2.edges
    total = 0.0
    for p, q in zip(a1, b1):
        d = q - p
        ln = math.hypot(d[0], d[1])
        if ln == 0:
            continue
        u = d / ln
        nrm = np.array([-u[1], u[0]])
        off_a = (a2 - p) @ nrm
        off_b = (b2 - p) @ nrm
        col = (np.abs(off_a) <= tol) & (np.abs(off_b) <= tol)
        if not col.any():
            continue
        ta = (a2[col] - p) @ u
        tb = (b2[col] - p) @ u
        lo = np.maximum(np.minimum(ta, tb), 0.0)
        hi = np.minimum(np.maximum(ta, tb), ln)
        total += float(np.clip(hi - lo, 0.0, None).sum())
    return total


def _bbox_overlap(r1: PolygonRegion, r2: PolygonRegion, tol: float) -> bool:
    x0, y0, x1, y1 = r1.bbox
    u0, v0, u1, v1 = r2.bbox
    return not (x1 < u0 - tol or u1 < x0 - tol or y1 < v0 - tol or v1 < y0 - tol)


def _convex_overlap_area(a: np.ndarray, b: np.ndarray) -> float:
    """Area of the intersection of two CCW convex polygons."""
    if signed_area(a) < 0:
        a = a[::-1]
    if signed_area(b) < 0:
        b = b[::-1]
    poly = a
    for k in range(len(b)):
        p, q = b[k], b[(k + 1) % len(b)]
        d = q - p
        normal = np.array([d[1], -d[0]])  # outward for CCW
        poly = clip_halfplane(poly, normal, float(normal @ p))
        if len(poly) < 3:
            return 0.0
    return abs(signed_area(poly))


def _interiors_overlap(r1: PolygonRegion, r2: PolygonRegion, tol: float) -> bool:
    """Positive-area intersection, summed over pairs of triangles."""
    area = 0.0
    for t1 in r1.triangles():
        for t2 in r2.triangles():
            area += _convex_overlap_area(t1, t2)
    return area > tol * max(r1.scale, r2.scale)


@dataclass(frozen=True, eq=False)
class Environment:
    """The environment ``C`` as a partition into polygonal regions."""

    regions: tuple[PolygonRegion, ...]
    boundary: PolygonRegion | None = None
    total_area: float = field(init=False)
    adjacency: frozenset = field(init=False)

    def __post_init__(self):
        regions = tuple(self.regions)
        if not regions:
            raise GeometryError("environment needs at least one region")
        ids = [r.index for r in regions]
        if len(set(ids)) != len(ids) or min(ids) < 1:
            raise GeometryError("region ids must be distinct positive integers")
        regions = tuple(sorted(regions, key=lambda r: r.index))
        scale = max(r.scale for r in regions)
        tol = 1e-9 * scale
        adj = set()
        for i, r1 in enumerate(regions):
            for r2 in regions[i + 1:]:
                if not _bbox_overlap(r1, r2, tol):
                    continue
                if _interiors_overlap(r1, r2, tol):
                    raise GeometryError(f"regions {r1.index} and {r2.index} overlap")
                if _shared_edge_length(r1, r2, tol) > tol:
                    adj.add((r1.index, r2.index))
        if len(regions) > 1:
            seen = {regions[0].index}
            stack = [regions[0].index]
            while stack:
                a = stack.pop()
                for p, q in adj:
                    for u, w in ((p, q), (q, p)):
                        if u == a and w not in seen:
                            seen.add(w)
                            stack.append(w)
            if len(seen) != len(regions):
                raise GeometryError("union of regions is not connected")
        total = math.fsum(r.area for r in regions)
        if self.boundary is not None and abs(self.boundary.area - total) > REL_AREA_TOL * total:
            raise GeometryError("regions do not tile the boundary polygon")
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "total_area", total)
        object.__setattr__(self, "adjacency", frozenset(adj))

    @property
    def ids(self) -> list[int]:
        return [r.index for r in self.regions]

    def region(self, index: int) -> PolygonRegion:
        for r in self.regions:
            if r.index == index:
                return r
        raise KeyError(index)

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        boxes = np.array([r.bbox for r in self.regions])
        return (float(boxes[:, 0].min()), float(boxes[:, 1].min()),
                float(boxes[:, 2].max()), float(boxes[:, 3].max()))

    @property
    def scale(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return max(x1 - x0, y1 - y0)

    def neighbors(self, index: int) -> set[int]:
        out = set()
        for a, b in self.adjacency:
            if a == index:
                out.add(b)
            elif b == index:
                out.add(a)
        return out

    def locate(self, points) -> np.ndarray:
        """Region id for each point, lowest id on shared boundaries, 0 outside."""
        pts = as_points(points)
        out = np.zeros(len(pts), dtype=int)
        tol = 1e-12 * self.scale
        for r in reversed(self.regions):
            out[r.contains(pts, tol=tol)] = r.index
        return out

    def contains(self, points) -> np.ndarray:
        return self.locate(points) > 0

    def to_text(self) -> str:
        lines = []
        for r in self.regions:
            coords = " ".join(f"{x!r},{y!r}" for x, y in r.vertices.tolist())
            lines.append(f"{r.index}: {coords}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Environment":
        regions = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                head, body = line.split(":", 1)
                verts = [tuple(float(c) for c in tok.split(",")) for tok in body.split()]
                regions.append(PolygonRegion(np.array(verts), int(head)))
            except GeometryError:
                raise
            except ValueError as exc:
                raise GeometryError(f"line {lineno}: cannot parse region ({exc})") from None
        return cls(tuple(regions))


def containing_region(env: Environment, p) -> int:
    """Id of the region holding ``p``; shared boundaries go to the lowest id."""
    j = int(env.locate(p)[0])
    if j == 0:
        raise GeometryError(f"point {tuple(as_points(p)[0])} lies outside the environment")
    return j


def clip_halfplane(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep the part of a convex polygon with ``normal . p <= offset``."""
    if len(poly) == 0:
        return poly
    s = poly @ normal - offset
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        sp, sq = s[k], s[(k + 1) % n]
        if sp <= 0:
            out.append(p)
        if (sp < 0 < sq) or (sq < 0 < sp):
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def voronoi_partition(sites, boundary: PolygonRegion) -> Environment:
    """Voronoi cells of ``sites`` clipped to a convex ``boundary``.

    Cell ``i + 1`` belongs to ``sites[i]``.
    """
    pts = as_points(sites)
    if not boundary.is_convex():
        raise GeometryError("voronoi_partition needs a convex boundary")
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if np.array_equal(pts[i], pts[j]):
                raise GeometryError(f"duplicate sites {i} and {j}")
    inside = boundary.contains(pts, closed=False, tol=1e-12 * boundary.scale)
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise GeometryError(f"site {bad} is not strictly inside the boundary")
    if len(pts) == 1:
        cells = [PolygonRegion(boundary.vertices, 1)]
        return Environment(tuple(cells), boundary=PolygonRegion(boundary.vertices, 1))
    cells = []
    for i, xi in enumerate(pts):
        poly = np.array(boundary.vertices)
        for j, xj in enumerate(pts):
            if j == i:
                continue
            nrm = xj - xi
            off = float(nrm @ (0.5 * (xi + xj)))
            poly = clip_halfplane(poly, nrm, off)
        cells.append(PolygonRegion(_dedupe(poly, boundary.scale), i + 1))
    return Environment(tuple(cells), boundary=PolygonRegion(boundary.vertices, 1))


def _dedupe(poly: np.ndarray, scale: float) -> np.ndarray:
    tol = 1e-12 * scale
    out = []
    for p in poly:
        if not out or np.abs(p - out[-1]).max() > tol:
            out.append(p)
    if len(out) > 1 and np.abs(out[0] - out[-1]).max() <= tol:
        out.pop()
    # remove collinear middle vertices
    res = []
    n = len(out)
    for k in range(n):
        a, b, c = out[k - 1], out[k], out[(k + 1) % n]
        if abs(_cross(a, b, c)) > 1e-13 * scale * scale:
            res.append(b)
    return np.array(res)


def rectangle(x0: float, y0: float, x1: float, y1: float, index: int = 1) -> PolygonRegion:
    return PolygonRegion(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float), index)


def unit_square(index: int = 1) -> PolygonRegion:
    return rectangle(0.0, 0.0, 1.0, 1.0, index)


def _circle_edge_angles(v: np.ndarray, center: np.ndarray, radius: float) -> list[float]:
    a = v - center
    d = np.roll(v, -1, axis=0) - v
    qa = np.einsum("ij,ij->i", d, d)
    qb = 2.0 * np.einsum("ij,ij->i", a, d)
    qc = np.einsum("ij,ij->i", a, a) - radius * radius
    disc = qb * qb - 4.0 * qa * qc
    angles = []
    for k in range(len(v)):
        if disc[k] < 0:
            continue
        sq = math.sqrt(disc[k])
        for t in ((-qb[k] - sq) / (2 * qa[k]), (-qb[k] + sq) / (2 * qa[k])):
            if -1e-12 <= t <= 1 + 1e-12:
                p = a[k] + t * d[k]
                angles.append(math.atan2(p[1], p[0]) % TWO_PI)
    return angles


def subtended_angle(region: PolygonRegion, center, radius: float) -> float:
    """Total angle of the arcs of circle(center, radius) lying in ``region``."""
    if radius < 0:
        raise GeometryError("radius must be non-negative")
    c = as_points(center)[0]
    if radius == 0:
        return TWO_PI if region.contains(c, closed=False)[0] else 0.0
    angles = sorted(_circle_edge_angles(region.vertices, c, radius))
    if not angles:
        probe = c + np.array([radius, 0.0])
        return TWO_PI if region.contains(probe)[0] else 0.0
    angles.append(angles[0] + TWO_PI)
    total = 0.0
    mids = []
    spans = []
    for a0, a1 in zip(angles[:-1], angles[1:]):
        span = a1 - a0
        if span <= ANGLE_TOL:
            continue
        m = 0.5 * (a0 + a1)
        mids.append((c[0] + radius * math.cos(m), c[1] + radius * math.sin(m)))
        spans.append(span)
    if not spans:
        # every intersection coincides (tangency); probe the opposite point
        probe = c - radius * np.array([math.cos(angles[0]), math.sin(angles[0])])
        return TWO_PI if region.contains(probe)[0] else 0.0
    inside = region.contains(np.array(mids))
    total = math.fsum(s for s, ok in zip(spans, inside) if ok)
    return min(total, TWO_PI)


def collinear(points, rel_tol: float = 1e-9) -> bool:
    """True when no triple of ``points`` is non-collinear."""
    pts = as_points(points)
    if len(pts) < 3:
        return True
    scale = float(np.ptp(pts, axis=0).max())
    if scale == 0:
        return True
    thresh = rel_tol * scale * scale
    # a non-collinear triple exists iff some point is off the line through
    # the two farthest-apart points
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    i, j = np.unravel_index(np.argmax(d), d.shape)
    a, b = pts[i], pts[j]
    cr = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
    return bool(np.all(np.abs(cr) <= thresh))


def triangle_distance_range(tris: np.ndarray, points) -> tuple[np.ndarray, np.ndarray]:
    """Exact min and max distance from each point to each triangle, ``(T, n)``."""
    pts = as_points(points)
    p = pts[None, :, None, :]
    a = tris[:, None, :, :]
    ab = np.roll(tris, -1, axis=1)[:, None, :, :] - a
    ap = p - a
    denom = np.sum(ab * ab, axis=-1)
    t = np.clip(np.sum(ap * ab, axis=-1) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    diff = ap - t[..., None] * ab
    dedge = np.sqrt(np.sum(diff * diff, axis=-1)).min(axis=-1)
    cr = ab[..., 0] * ap[..., 1] - ab[..., 1] * ap[..., 0]
    inside = np.all(cr >= 0, axis=-1) | np.all(cr <= 0, axis=-1)
    dmin = np.where(inside, 0.0, dedge)
    dv = tris[:, None, :, :] - p
    dmax = np.sqrt(np.sum(dv * dv, axis=-1)).max(axis=-1)
    return dmin, dmax
