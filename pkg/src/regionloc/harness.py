"""Seeded Monte Carlo sweeps over noise levels, scenario files and CSV export.

Scenario files are INI-style ``key = value`` sections::

    [environment]
    boundary = 0,0 1,0 1,1 0,1
    sites = random:20            # or explicit "x,y x,y ..."
    layout_seed = 7
    # regions_file = cells.txt   # explicit polygons instead of Voronoi

    [sensors]
    positions = sites            # or explicit "x,y x,y ..."

    [channel]
    P = 1
    d0 = 0.1
    beta = 3
    sigma = 0.3                  # used by `decide`; sweeps use sigma_grid

    [graph]
    type = adjacent              # complete | adjacent | knearest | edges
    k = 4
    edges = 0-1 1-2 2-0

    [source]
    mode = uniform               # or fixed
    point = 0.3,0.4

    [run]
    trials = 500
    sigma_grid = 0.1,0.2,0.3
    k = 1
    seed = 1
    rel_tol = 1e-3
    algorithms = a2a,limited
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import ChannelParams, sample_measurement
from .decision import ABSTAIN, CommGraph, decide_all_to_all, decide_limited, majority_vote
from .geometry import Environment, GeometryError, PolygonRegion, as_points, containing_region, voronoi_partition
from .quadrature import QuadratureSpec

ALGORITHMS = ("a2a", "limited")
RESULT_HEADER = ["sigma", "algorithm", "trials", "correct", "rate", "stderr"]
DECISION_HEADER = ["sigma", "trial", "decider", "chosen", "true_region", "correct"]
SWEEP_TOL = 1e-3


class ConfigError(ValueError):
    """Malformed or inconsistent scenario."""


def parse_points(text: str) -> np.ndarray:
    try:
        return as_points([tuple(float(c) for c in tok.split(",")) for tok in text.split()])
    except (ValueError, GeometryError) as exc:
        raise ConfigError(f"bad point list {text!r}: {exc}") from None


def parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from None


def trial_rng(seed: int, sigma_index: int, trial: int) -> np.random.Generator:
    """Independent stream per (seed, sigma index, trial); scheduling cannot change it."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(sigma_index, trial))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Scenario:
    env: Environment
    sensors: np.ndarray
    params: ChannelParams
    graph: CommGraph
    source_mode: str = "uniform"
    source_point: tuple[float, float] | None = None
    k: int = 1
    trials: int = 500
    sigma_grid: tuple[float, ...] = (0.1,)
    seed: int = 0
    quad: QuadratureSpec = field(default_factory=lambda: QuadratureSpec(rel_tol=SWEEP_TOL))
    algorithms: tuple[str, ...] = ALGORITHMS
    linear_average: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sensors", as_points(self.sensors))
        object.__setattr__(self, "sigma_grid", tuple(float(s) for s in self.sigma_grid))
        if len(self.sensors) > len(self.env):
            raise ConfigError(f"{len(self.sensors)} sensors for {len(self.env)} regions")
        if "limited" in self.algorithms and len(self.sensors) != len(self.env):
            raise ConfigError("limited communication needs one sensor per region")
        if self.graph.node_count != len(self.sensors):
            raise ConfigError("graph size does not match sensor count")
        if self.source_mode not in ("uniform", "fixed"):
            raise ConfigError(f"unknown source mode {self.source_mode!r}")
        if self.source_mode == "fixed":
            if self.source_point is None:
                raise ConfigError("fixed source needs a point")
            if not self.env.contains(self.source_point)[0]:
                raise ConfigError("fixed source lies outside the environment")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.trials < 0:
            raise ConfigError("trials must be >= 0")
        if any(s < 0 for s in self.sigma_grid):
            raise ConfigError("sigma grid values must be non-negative")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ConfigError(f"unknown algorithms {sorted(bad)}")

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


def sample_source(env: Environment, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw over the environment by rejection from its bounding box."""
    x0, y0, x1, y1 = env.bbox
    while True:
        p = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        if env.contains(p)[0]:
            return p


@dataclass(frozen=True)
class TrialOutcome:
    sigma_index: int
    trial: int
    true_region: int
    a2a: int | None
    vote: int | None
    limited: tuple[int, ...] = ()


def run_trial(sc: Scenario, sigma_index: int, trial: int) -> TrialOutcome:
    sigma = sc.sigma_grid[sigma_index]
    rng = trial_rng(sc.seed, sigma_index, trial)
    if sc.source_mode == "fixed":
        src = np.asarray(sc.source_point, dtype=float)
    else:
        src = sample_source(sc.env, rng)
    truth = containing_region(sc.env, src)
    params = sc.params.with_sigma(sigma)
    z = sample_measurement(params, sc.sensors, src, sc.k, rng, linear_average=sc.linear_average)
    a2a = vote = None
    limited: tuple[int, ...] = ()
    if "a2a" in sc.algorithms:
        a2a = decide_all_to_all(z, sc.sensors, sc.env, params, sc.quad, check=False).chosen
    if "limited" in sc.algorithms:
        ds = [decide_limited(i, z, sc.sensors, sc.graph, sc.env, params, sc.quad, check=False)
              for i in range(len(sc.sensors))]
        limited = tuple(d.chosen for d in ds)
        vote = majority_vote(ds)
    return TrialOutcome(sigma_index, trial, truth, a2a, vote, limited)


def _run_chunk(args) -> list[TrialOutcome]:
    sc, jobs = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return [run_trial(sc, si, t) for si, t in jobs]


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    algorithm: str
    trials: int
    correct: int

    @property
    def rate(self) -> float:
        return self.correct / self.trials if self.trials else math.nan

    @property
    def stderr(self) -> float:
        if not self.trials:
            return math.nan
        p = self.rate
        return math.sqrt(p * (1.0 - p) / self.trials)


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    outcomes: list[TrialOutcome] = field(default_factory=list)
    sigma_grid: tuple[float, ...] = ()

    def curve(self, algorithm: str) -> list[SweepRow]:
        return [r for r in self.rows if r.algorithm == algorithm]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in self.rows:
            w.writerow([repr(r.sigma), r.algorithm, r.trials, r.correct, repr(r.rate), repr(r.stderr)])
        return buf.getvalue()

    def decisions_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(DECISION_HEADER)
        for o in self.outcomes:
            sigma = repr(self.sigma_grid[o.sigma_index])
            if o.a2a is not None:
                w.writerow([sigma, o.trial, "a2a", o.a2a, o.true_region, int(o.a2a == o.true_region)])
            for i, c in enumerate(o.limited):
                w.writerow([sigma, o.trial, i, c, o.true_region, int(c == o.true_region)])
            if o.vote is not None:
                w.writerow([sigma, o.trial, "vote", o.vote, o.true_region, int(o.vote == o.true_region)])
        return buf.getvalue()

    def plot_data(self) -> str:
        """Gnuplot layout: one block per algorithm, blocks split by two blank lines."""
        blocks = []
        for alg in dict.fromkeys(r.algorithm for r in self.rows):
            lines = [f"# {alg}: sigma rate stderr"]
            lines += [f"{r.sigma!r} {r.rate!r} {r.stderr!r}" for r in self.curve(alg)]
            blocks.append("\n".join(lines))
        return "\n\n\n".join(blocks) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "SweepResult":
        rows = []
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != RESULT_HEADER:
            raise ValueError(f"unexpected header {header}")
        for rec in reader:
            rows.append(SweepRow(float(rec[0]), rec[1], int(rec[2]), int(rec[3])))
        return cls(rows, [], tuple(dict.fromkeys(r.sigma for r in rows)))


def run_sweep(sc: Scenario, algorithms: Sequence[str] | None = None, workers: int = 1) -> SweepResult:
    """Correct-decision counts per noise level and algorithm.

    Results depend only on the scenario (seed included), never on
    ``workers``: each trial owns its random stream and outcomes are
    reassembled in (sigma, trial) order.
    """
    if algorithms is not None:
        sc = sc.with_(algorithms=tuple(algorithms))
    jobs = [(si, t) for si in range(len(sc.sigma_grid)) for t in range(sc.trials)]
    if not jobs:
        return SweepResult([], [], sc.sigma_grid)
    if workers <= 1:
        outcomes = _run_chunk((sc, jobs))
    else:
        size = max(1, math.ceil(len(jobs) / (4 * workers)))
        chunks = [(sc, jobs[i:i + size]) for i in range(0, len(jobs), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = [o for part in pool.map(_run_chunk, chunks) for o in part]
    outcomes.sort(key=lambda o: (o.sigma_index, o.trial))
    rows = []
    for si, sigma in enumerate(sc.sigma_grid):
        sub = [o for o in outcomes if o.sigma_index == si]
        if "a2a" in sc.algorithms:
            rows.append(SweepRow(sigma, "a2a", len(sub), sum(o.a2a == o.true_region for o in sub)))
        if "limited" in sc.algorithms:
            rows.append(SweepRow(sigma, "limited", len(sub), sum(o.vote == o.true_region for o in sub)))
    return SweepResult(rows, outcomes, sc.sigma_grid)


def export_results(result: SweepResult, path) -> Path:
    path = Path(path)
    path.write_text(result.to_csv())
    return path


# -- scenario files -------------------------------------------------------

def _build_graph(cfg: configparser.ConfigParser, env: Environment, sensors: np.ndarray) -> CommGraph:
    kind = cfg.get("graph", "type", fallback="adjacent").strip()
    n = len(sensors)
    if kind == "complete":
        return CommGraph.complete(n)
    if kind == "adjacent":
        return CommGraph.region_adjacency(env)
    if kind == "knearest":
        return CommGraph.k_nearest(sensors, cfg.getint("graph", "k", fallback=4))
    if kind == "edges":
        pairs = []
        for tok in cfg.get("graph", "edges", fallback="").split():
            a, b = tok.split("-")
            pairs.append((int(a), int(b)))
        return CommGraph.from_edges(n, pairs)
    raise ConfigError(f"unknown graph type {kind!r}")


def scenario_from_config(cfg: configparser.ConfigParser, base_dir: Path | None = None) -> Scenario:
    try:
        boundary = PolygonRegion(parse_points(cfg.get("environment", "boundary", fallback="0,0 1,0 1,1 0,1")))
        regions_file = cfg.get("environment", "regions_file", fallback=None)
        sites_spec = cfg.get("environment", "sites", fallback=None)
        sites = None
        if sites_spec is not None and sites_spec.strip().startswith("random:"):
            n = int(sites_spec.split(":", 1)[1])
            rng = np.random.default_rng(cfg.getint("environment", "layout_seed", fallback=0))
            sites = _random_sites(boundary, n, rng)
        elif sites_spec is not None:
            sites = parse_points(sites_spec)
        if regions_file:
            p = Path(regions_file)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            env = Environment.from_text(p.read_text())
        elif sites is not None:
            env = voronoi_partition(sites, boundary)
        else:
            raise ConfigError("environment needs either sites or regions_file")
        pos_spec = cfg.get("sensors", "positions", fallback="sites").strip()
        if pos_spec == "sites":
            if sites is None:
                raise ConfigError("sensor positions = sites needs Voronoi sites")
            sensors = sites
        else:
            sensors = parse_points(pos_spec)
        params = ChannelParams(
            cfg.getfloat("channel", "P", fallback=1.0),
            cfg.getfloat("channel", "d0", fallback=0.1),
            cfg.getfloat("channel", "beta", fallback=3.0),
            cfg.getfloat("channel", "sigma", fallback=0.1),
        )
        graph = _build_graph(cfg, env, sensors)
        mode = cfg.get("source", "mode", fallback="uniform").strip()
        point = cfg.get("source", "point", fallback=None)
        src = tuple(parse_points(point)[0]) if point else None
        rel_tol = cfg.getfloat("run", "rel_tol", fallback=SWEEP_TOL)
        algos = tuple(a.strip() for a in cfg.get("run", "algorithms", fallback="a2a,limited").split(",") if a.strip())
        return Scenario(
            env=env, sensors=sensors, params=params, graph=graph, source_mode=mode, source_point=src,
            k=cfg.getint("run", "k", fallback=1),
            trials=cfg.getint("run", "trials", fallback=500),
            sigma_grid=tuple(parse_floats(cfg.get("run", "sigma_grid", fallback="0.1"))),
            seed=cfg.getint("run", "seed", fallback=0),
            quad=QuadratureSpec(rel_tol=rel_tol),
            algorithms=algos,
            linear_average=cfg.getboolean("run", "linear_average", fallback=False),
        )
    except (configparser.Error, GeometryError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cfg.optionxform = str
    try:
        with open(path) as fh:
            cfg.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return scenario_from_config(cfg, path.parent)


def _random_sites(boundary: PolygonRegion, n: int, rng: np.random.Generator, margin: float = 0.02) -> np.ndarray:
    """``n`` sites uniform in the boundary, kept ``margin * scale`` apart and off the edges."""
    x0, y0, x1, y1 = boundary.bbox
    gap = margin * boundary.scale
    out: list[np.ndarray] = []
    while len(out) < n:
        p = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        if not boundary.contains(p, closed=False, tol=gap)[0]:
            continue
        if out and np.min(np.linalg.norm(np.array(out) - p, axis=1)) < gap:
            continue
        out.append(p)
    return np.array(out)


# -- built-in scenarios -----------------------------------------------------

REFERENCE_SITES = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
REFERENCE_SENSORS = REFERENCE_SITES[:3]
REFERENCE_SOURCE = np.array([0.35, 0.3])
DEFAULT_PARAMS = ChannelParams(P=1.0, d0=0.1, beta=3.0, sigma=0.1)


def reference_environment() -> Environment:
    """Four Voronoi cells (the quadrants) of the unit square."""
    from .geometry import unit_square
    return voronoi_partition(REFERENCE_SITES, unit_square())


def reference_scenario(sigma: float = 0.1, **kw) -> Scenario:
    """Three sensors at the first three quadrant sites, fixed source in region 1."""
    kw.setdefault("algorithms", ("a2a",))
    kw.setdefault("source_mode", "fixed")
    kw.setdefault("source_point", tuple(REFERENCE_SOURCE))
    return Scenario(env=reference_environment(), sensors=REFERENCE_SENSORS,
                    params=DEFAULT_PARAMS.with_sigma(sigma), graph=CommGraph.complete(3), **kw)


def voronoi_scenario(n: int, layout_seed: int = 0, **kw) -> Scenario:
    from .geometry import unit_square
    box = unit_square()
    sites = _random_sites(box, n, np.random.default_rng(layout_seed))
    env = voronoi_partition(sites, box)
    kw.setdefault("params", DEFAULT_PARAMS)
    kw.setdefault("graph", CommGraph.region_adjacency(env))
    return Scenario(env=env, sensors=sites, **kw)
