"""MAP decision rules: all-to-all, limited communication, majority vote."""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .channel import ChannelParams, MeasurementVector
from .asymptotic import noiseless_locate
from .geometry import Environment, as_points, collinear, region_distance
from .posterior import H0, HypothesisPosterior, joint_posterior, neighborhood_posterior
from .quadrature import QuadratureSpec

log = logging.getLogger(__name__)

ABSTAIN = -1


class NoDecisionError(ArithmeticError):
    """Every hypothesis scored ``-inf``."""


class AssumptionWarning(UserWarning):
    """Sensor geometry violates a non-collinearity or degree assumption."""


@dataclass(frozen=True)
class CommGraph:
    """Undirected communication graph over sensors ``0 .. node_count - 1``."""

    node_count: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            if not (0 <= a < self.node_count and 0 <= b < self.node_count):
                raise ValueError(f"edge ({a}, {b}) references a missing node")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def complete(cls, n: int) -> "CommGraph":
        return cls(n, frozenset(itertools.combinations(range(n), 2)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "CommGraph":
        return cls(n, frozenset(tuple(e) for e in edges))

    @classmethod
    def k_nearest(cls, positions, k: int) -> "CommGraph":
        """Symmetrized k-nearest-neighbor graph."""
        pts = as_points(positions)
        d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        np.fill_diagonal(d, np.inf)
        edges = set()
        for i in range(len(pts)):
            for j in np.argsort(d[i], kind="stable")[:k]:
                edges.add((min(i, int(j)), max(i, int(j))))
        return cls(len(pts), frozenset(edges))

    @classmethod
    def region_adjacency(cls, env: Environment) -> "CommGraph":
        """Sensors talk when their regions share an edge (sensor i owns region i + 1)."""
        return cls(len(env), frozenset((a - 1, b - 1) for a, b in env.adjacency))

    def neighbors(self, i: int) -> set[int]:
        out = set()
        for a, b in self.edges:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return out

    def closed_neighborhood(self, i: int) -> list[int]:
        return sorted(self.neighbors(i) | {i})

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def is_complete(self) -> bool:
        n = self.node_count
        return len(self.edges) == n * (n - 1) // 2

    def check_limited(self) -> bool:
        low = [i for i in range(self.node_count) if self.degree(i) < 2]
        if low:
            warnings.warn(f"nodes {low} have fewer than two neighbors", AssumptionWarning, stacklevel=2)
        return not low


@dataclass(frozen=True)
class Decision:
    decider: int
    chosen: int
    scores: HypothesisPosterior

    def __post_init__(self):
        if self.chosen != self.scores.argmax():
            raise ValueError("chosen hypothesis must attain the maximum score")


def check_noncollinear(positions, what: str = "sensors") -> bool:
    if collinear(positions):
        warnings.warn(f"{what}: no three non-collinear sensors", AssumptionWarning, stacklevel=3)
        return False
    return True


def _decide(decider: int, scores: HypothesisPosterior) -> Decision:
    if not np.isfinite(scores.log_values).any():
        raise NoDecisionError(f"sensor {decider}: every hypothesis has zero posterior mass")
    return Decision(decider, scores.argmax(), scores)


def _noiseless_region(z: MeasurementVector, pos: np.ndarray, used, env: Environment, params: ChannelParams) -> int:
    """Region of the unique point consistent with exact readings (zero-noise limit)."""
    used = list(used)
    y = noiseless_locate(params, pos[used], np.asarray(z.log_powers, dtype=float)[used])
    rid = int(env.locate(y)[0])
    if rid == 0:
        # round-off pushed the point just outside C
        rid = min(env.ids, key=lambda j: (region_distance(env.region(j), y), j))
    return rid


def _point_scores(hypotheses: Sequence[int], chosen: int) -> HypothesisPosterior:
    lv = np.where(np.asarray(hypotheses) == chosen, 0.0, -np.inf)
    return HypothesisPosterior(lv, tuple(hypotheses))


def decide_all_to_all(
    z: MeasurementVector,
    sensors,
    env: Environment,
    params: ChannelParams,
    quad: QuadratureSpec = QuadratureSpec(),
    *,
    decider: int = 0,
    check: bool = True,
) -> Decision:
    """MAP over every region using every sensor's reading.

    With zero effective noise the posterior collapses onto the trilaterated
    source, and the region holding it wins outright.
    """
    pos = as_points(sensors)
    if check:
        check_noncollinear(pos)
    if z.effective_sigma == 0:
        chosen = _noiseless_region(z, pos, range(len(pos)), env, params)
        return _decide(decider, _point_scores(env.ids, chosen))
    scores = joint_posterior(z, pos, range(len(pos)), env.ids, env, params, quad)
    return _decide(decider, scores)


def decide_limited(
    sensor: int,
    z: MeasurementVector,
    sensors,
    graph: CommGraph,
    env: Environment,
    params: ChannelParams,
    quad: QuadratureSpec = QuadratureSpec(),
    *,
    check: bool = True,
) -> Decision:
    """MAP over the neighborhood regions of ``sensor`` plus the outside hypothesis.

    Only readings from the closed neighborhood are used; sensor ``i`` owns
    region ``i + 1``.  ``z`` holds readings for all sensors and is
    restricted here.
    """
    pos = as_points(sensors)
    nb = graph.closed_neighborhood(sensor)
    if check:
        check_noncollinear(pos[nb], f"neighborhood of sensor {sensor}")
    hyps = [i + 1 for i in nb]
    if z.effective_sigma == 0:
        rid = _noiseless_region(z, pos, nb, env, params)
        return _decide(sensor, _point_scores((H0, *hyps), rid if rid in hyps else H0))
    scores = neighborhood_posterior(z, pos, nb, hyps, env, params, quad)
    return _decide(sensor, scores)


def majority_vote(decisions: Sequence[Decision]) -> int:
    """Most common non-``H_0`` choice; ties go to the lowest id.

    Returns ``ABSTAIN`` when nobody placed the source in its neighborhood.
    """
    votes = Counter(d.chosen for d in decisions if d.chosen != H0)
    if not votes:
        return ABSTAIN
    top = max(votes.values())
    return min(h for h, c in votes.items() if c == top)
