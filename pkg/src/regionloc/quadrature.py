"""Adaptive log-domain cubature over groups of triangles.

Each triangle is integrated with a 7-point degree-5 rule and compared with
the same rule applied to its four midpoint children.  Triangles are
accepted when the two estimates agree, or when a rigorous upper bound on
their contribution is negligible.  Everything is carried as logarithms so
integrands as small as ``exp(-1e5)`` stay representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Protocol, Sequence

import numpy as np

# Degree-5 Radon rule: barycentric nodes and weights (weights sum to 1).
_A1, _B1, _W1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
_A2, _B2, _W2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
RULE_NODES = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
RULE_WEIGHTS = np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])
_LOG_W = np.log(RULE_WEIGHTS)


def logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    top = a.max(axis=axis, keepdims=True)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(a - safe).sum(axis=axis, keepdims=True)) + safe
    return np.squeeze(out, axis=axis)


class QuadratureError(ArithmeticError):
    """Refinement hit its depth cap without meeting the tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for the adaptive cubature.

    ``max_variation`` (log units) caps how far a triangle's rigorous upper
    bound may sit above its own estimate before it is trusted; this is what
    stops a narrow peak hiding between rule nodes.  ``prune_gap`` (log units) lets the integrator stop refining triangles
    whose upper bound sits that far below the largest group estimate; set
    it to ``None`` when every group must be accurate on its own.
    ``min_depth`` is the refinement level a triangle must reach before its
    error estimate is trusted; a single coarse rule pair can agree by chance.
    """

    rel_tol: float = 1e-4
    max_depth: int = 12
    initial_depth: int = 0
    max_variation: float = 8.0
    prune_gap: float | None = 30.0
    min_depth: int = 1

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_depth < 0 or self.initial_depth < 0 or self.min_depth < 0:
            raise ValueError("refinement depths must be non-negative")

    def exact(self) -> "QuadratureSpec":
        return replace(self, prune_gap=None)


def triangle_areas(tris: np.ndarray) -> np.ndarray:
    a = tris[..., 1, :] - tris[..., 0, :]
    b = tris[..., 2, :] - tris[..., 0, :]
    return 0.5 * np.abs(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])


# child vertices as barycentric combinations of the parent's (4 children x 3 vertices)
_SPLIT = np.array([
    [1, 0, 0], [.5, .5, 0], [.5, 0, .5],
    [.5, .5, 0], [0, 1, 0], [0, .5, .5],
    [.5, 0, .5], [0, .5, .5], [0, 0, 1],
    [.5, .5, 0], [0, .5, .5], [.5, 0, .5],
])


def subdivide(tris: np.ndarray) -> np.ndarray:
    """Split each triangle into four by edge midpoints: ``(T, 4, 3, 2)``."""
    out = np.empty((len(tris), 12, 2))
    out[..., 0] = tris[..., 0] @ _SPLIT.T
    out[..., 1] = tris[..., 1] @ _SPLIT.T
    return out.reshape(-1, 4, 3, 2)


def refine_uniform(tris: np.ndarray, depth: int) -> np.ndarray:
    for _ in range(depth):
        tris = subdivide(tris).reshape(-1, 3, 2)
    return tris


def rule_points(tris: np.ndarray) -> np.ndarray:
    """Rule nodes for every triangle, shape ``(T, 7, 2)``."""
    out = np.empty(tris.shape[:-2] + (len(RULE_WEIGHTS), 2))
    out[..., 0] = tris[..., 0] @ RULE_NODES.T
    out[..., 1] = tris[..., 1] @ RULE_NODES.T
    return out


CHUNK = 8192


class Integrand(Protocol):
    """Log-integrand evaluated per triangle.

    ``nodes`` identifies each triangle in the refinement tree (``-1`` when
    unknown): a triangle at ``level`` with id ``n`` has children
    ``4 n + c``.  Implementations may use it to look up cached values.
    """

    def rule_values(self, tris: np.ndarray, nodes: np.ndarray, level: int) -> np.ndarray:
        """``log f`` at the rule nodes, shape ``(T, 7)``."""

    def upper_bound(self, tris: np.ndarray, nodes: np.ndarray, level: int) -> np.ndarray:
        """Rigorous upper bound on ``log f`` over each triangle, shape ``(T,)``."""


@dataclass(frozen=True)
class FunctionIntegrand:
    """Adapter for a pointwise ``log_f(points)`` and a bound ``log_bounds(tris)``."""

    log_f: Callable[[np.ndarray], np.ndarray]
    log_bounds: Callable[[np.ndarray], np.ndarray]

    def rule_values(self, tris, nodes, level):
        return self.log_f(rule_points(tris).reshape(-1, 2)).reshape(-1, len(RULE_WEIGHTS))

    def upper_bound(self, tris, nodes, level):
        return self.log_bounds(tris)


def _as_integrand(f) -> Integrand:
    return FunctionIntegrand(f, _no_bound) if callable(f) and not hasattr(f, "rule_values") else f


def _no_bound(tris: np.ndarray) -> np.ndarray:
    return np.full(len(tris), np.inf)


def apply_rule(tris: np.ndarray, log_f, nodes: np.ndarray | None = None, level: int = -1) -> np.ndarray:
    """Log of the rule estimate on each triangle.

    ``log_f`` is either an :class:`Integrand` or a pointwise callable.
    """
    f = _as_integrand(log_f)
    shape = tris.shape[:-2]
    flat = tris.reshape(-1, 3, 2)
    nodes = np.full(len(flat), -1, dtype=np.int64) if nodes is None else nodes.reshape(-1)
    out = np.empty(len(flat))
    for start in range(0, len(flat), CHUNK):
        part = flat[start:start + CHUNK]
        vals = f.rule_values(part, nodes[start:start + CHUNK], level)
        with np.errstate(divide="ignore"):
            out[start:start + CHUNK] = np.log(triangle_areas(part)) + logsumexp(vals + _LOG_W, axis=1)
    return out.reshape(shape)


def _children(nodes: np.ndarray) -> np.ndarray:
    """Ids of the four children of each node, shape ``(T, 4)``; ``-1`` stays ``-1``."""
    kids = 4 * nodes[:, None] + np.arange(4)
    kids[nodes < 0] = -1
    return kids


def _group_lse(values: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    out = np.full(n_groups, -np.inf)
    if len(values) == 0:
        return out
    top = np.full(n_groups, -np.inf)
    np.maximum.at(top, groups, values)
    safe = np.where(np.isfinite(top), top, 0.0)
    acc = np.zeros(n_groups)
    np.add.at(acc, groups, np.exp(values - safe[groups]))
    with np.errstate(divide="ignore"):
        out = safe + np.log(acc)
    out[~np.isfinite(top)] = -np.inf
    return out


def integrate_log(
    groups: Sequence[np.ndarray],
    integrand,
    log_bounds: Callable[[np.ndarray], np.ndarray] | None = None,
    spec: QuadratureSpec = QuadratureSpec(),
    base_nodes: Sequence[np.ndarray] | None = None,
) -> np.ndarray:
    """Log-integrals of ``exp(log f)`` over each group of triangles.

    ``integrand`` is an :class:`Integrand`, or a pointwise ``log_f`` paired
    with ``log_bounds(tris)``, a rigorous per-triangle upper bound on
    ``log_f``.  ``base_nodes`` optionally gives each input triangle's tree
    id at level 0.
    """
    f = integrand if log_bounds is None else FunctionIntegrand(integrand, log_bounds)
    n_groups = len(groups)
    result = np.full(n_groups, -np.inf)
    parts = [np.asarray(g, dtype=float).reshape(-1, 3, 2) for g in groups]
    if not any(len(p) for p in parts):
        return result
    group_area = np.array([triangle_areas(p).sum() if len(p) else 0.0 for p in parts])
    tris = np.concatenate([refine_uniform(p, spec.initial_depth) for p in parts if len(p)])
    grp = np.concatenate([
        np.full(len(p) * 4**spec.initial_depth, g, dtype=int) for g, p in enumerate(parts) if len(p)
    ])
    if base_nodes is None:
        nodes = np.full(len(tris), -1, dtype=np.int64)
    else:
        nodes = np.concatenate([np.asarray(b, dtype=np.int64) for b, p in zip(base_nodes, parts) if len(p)])
        for _ in range(spec.initial_depth):
            nodes = _children(nodes).reshape(-1)
    level = spec.initial_depth
    log_q1 = apply_rule(tris, f, nodes, level)
    acc_est = np.full(n_groups, -np.inf)
    log_tol = math.log(spec.rel_tol)
    log_levels = math.log(spec.max_depth + 1)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        log_garea = np.log(group_area)
        for depth in range(spec.max_depth + 1):
            children = subdivide(tris)
            kids = _children(nodes)
            log_qc = apply_rule(children, f, kids, level + 1)
            log_q4 = logsumexp(log_qc, axis=1)
            diff = np.where(np.isfinite(log_q4), log_q1 - log_q4, 0.0)
            log_err = log_q4 + np.log(np.abs(-np.expm1(diff)))
            log_err = np.where(np.isneginf(log_q4) & np.isneginf(log_q1), -np.inf, log_err)
            log_ub_f = f.upper_bound(tris, nodes, level)
            log_area = np.log(triangle_areas(tris))
            log_ub = log_ub_f + log_area

            act_est = _group_lse(log_q4, grp, n_groups)
            est = np.logaddexp(acc_est, act_est)
            counts = np.bincount(grp, minlength=n_groups)
            log_cnt = np.log(np.maximum(counts, 1))[grp]

            negligible = log_ub + log_cnt + log_levels < est[grp] + log_tol
            if spec.prune_gap is not None:
                top = est.max()
                if np.isfinite(top):
                    negligible |= log_ub + math.log(len(tris)) < top - spec.prune_gap
            floor = np.maximum(log_q4, est[grp] + log_area - log_garea[grp])
            converged = (level >= spec.min_depth) & (log_ub - log_q4 <= spec.max_variation) & (log_err <= floor + log_tol)
            done = negligible | converged | np.isneginf(log_ub)
            if depth == spec.max_depth and not done.all():
                rest = ~done
                err_g = _group_lse(log_err[rest], grp[rest], n_groups)
                bad = err_g > est + log_tol + math.log(10.0)
                if bad.any():
                    raise QuadratureError(
                        f"no convergence at depth {spec.max_depth} "
                        f"(relative error ~{float(np.exp(err_g - est)[bad].max()):.2e})"
                    )
                done[:] = True
            acc_est = np.logaddexp(acc_est, _group_lse(log_q4[done], grp[done], n_groups))
            keep = ~done
            if not keep.any():
                break
            tris = children[keep].reshape(-1, 3, 2)
            nodes = kids[keep].reshape(-1)
            level += 1
            log_q1 = log_qc[keep].reshape(-1)
            grp = np.repeat(grp[keep], 4)
    return acc_est
