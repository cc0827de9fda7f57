"""Command line entry point: ``regionloc {simulate,decide,bounds,voronoi,oracle}``.

Exit status is 0 on success, 2 on a usage or configuration error and 3 when
the numerics fail (quadrature non-convergence, no admissible hypothesis).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import harness
from .asymptotic import arc_posteriors
from .bounds import BoundScenario, rows_to_csv, theorem_one_check, theorem_two_check
from .channel import MeasurementVector, mean_log_power
from .decision import NoDecisionError, decide_all_to_all, decide_limited, majority_vote
from .geometry import Environment, GeometryError, containing_region, unit_square, voronoi_partition
from .posterior import DeltaRegimeError
from .quadrature import QuadratureError, QuadratureSpec

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
STRICT_TOL = 1e-4

log = logging.getLogger("regionloc")


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _sigma_grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(harness.parse_floats(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _algorithms(name: str) -> tuple[str, ...]:
    return harness.ALGORITHMS if name == "both" else (name,)


def _default_scenario() -> harness.Scenario:
    """Twenty Voronoi cells in the unit square, sensors at the sites."""
    return harness.voronoi_scenario(
        20, layout_seed=0, trials=500, sigma_grid=tuple(round(0.1 * i, 10) for i in range(1, 11)), seed=0,
    )


def _reference_scenario(sigma: float = 0.1) -> harness.Scenario:
    return harness.reference_scenario(sigma)


def _load(args, fallback) -> harness.Scenario:
    sc = harness.load_scenario(args.scenario) if args.scenario else fallback()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "sigma_grid", None) is not None:
        changes["sigma_grid"] = args.sigma_grid
    if getattr(args, "k", None) is not None:
        changes["k"] = args.k
    if getattr(args, "algo", None) is not None:
        changes["algorithms"] = _algorithms(args.algo)
    tol = STRICT_TOL if getattr(args, "strict", False) else getattr(args, "rel_tol", None)
    if tol is not None:
        changes["quad"] = QuadratureSpec(rel_tol=tol)
    return sc.with_(**changes) if changes else sc


# -- subcommands ------------------------------------------------------------

def cmd_simulate(args) -> int:
    sc = _load(args, _default_scenario)
    if "limited" in sc.algorithms:
        sc.graph.check_limited()
    res = harness.run_sweep(sc, workers=args.workers)
    _emit(res.to_csv(), args.out)
    if args.plot_data:
        Path(args.plot_data).write_text(res.plot_data())
    if args.decisions:
        Path(args.decisions).write_text(res.decisions_csv())
    return EXIT_OK


def _read_measurements(path: str, sigma: float) -> list[tuple[int, MeasurementVector]]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.lower().startswith("trial"):
            continue
        try:
            out.append(MeasurementVector.from_csv_row(line, sigma))
        except (ValueError, IndexError) as exc:
            raise harness.ConfigError(f"bad measurement row {line!r}: {exc}") from None
    return out


def cmd_decide(args) -> int:
    sc = _load(args, _reference_scenario)
    sigma = sc.params.sigma if args.sigma is None else args.sigma
    rows = _read_measurements(args.measurements, sigma)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "decider", "chosen"])
    for trial, z in rows:
        if len(z) != len(sc.sensors):
            raise harness.ConfigError(f"trial {trial}: {len(z)} readings for {len(sc.sensors)} sensors")
        if "a2a" in sc.algorithms:
            w.writerow([trial, "a2a", decide_all_to_all(z, sc.sensors, sc.env, sc.params, sc.quad).chosen])
        if "limited" in sc.algorithms:
            ds = [decide_limited(i, z, sc.sensors, sc.graph, sc.env, sc.params, sc.quad)
                  for i in range(len(sc.sensors))]
            for d in ds:
                w.writerow([trial, d.decider, d.chosen])
            w.writerow([trial, "vote", majority_vote(ds)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    sc = _load(args, _reference_scenario)
    if sc.source_point is None:
        raise harness.ConfigError("bound checks need a fixed source point")
    grid = args.sigma_grid or (0.05, 0.1, 0.2)
    trials = 500 if args.trials is None else args.trials
    bsc = BoundScenario(sc.env, sc.sensors, np.asarray(sc.source_point), sc.params, alpha=args.alpha)
    rng = np.random.default_rng(sc.seed if args.seed is None else args.seed)
    quad = QuadratureSpec(rel_tol=STRICT_TOL if args.strict else (args.rel_tol or STRICT_TOL))
    if args.theorem == 1:
        rows = theorem_one_check(bsc, grid, trials, rng, quad)
    else:
        rows = theorem_two_check(bsc, grid, trials, rng, quad)
    _emit(rows_to_csv(rows), args.out)
    return EXIT_OK


def cmd_voronoi(args) -> int:
    from .geometry import PolygonRegion
    boundary = PolygonRegion(harness.parse_points(args.boundary)) if args.boundary else unit_square()
    if args.sites:
        sites = harness.parse_points(args.sites)
    else:
        sites = harness._random_sites(boundary, args.n, np.random.default_rng(args.seed or 0))
    env = voronoi_partition(sites, boundary)
    _emit(env.to_text(), args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.mode == "arc":
        sc = _load(args, _reference_scenario)
        src = harness.parse_points(args.source)[0] if args.source else np.asarray(sc.source_point or (0.5, 0.5))
        x = sc.sensors[args.sensor]
        lp = mean_log_power(sc.params, x, src)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["region", "radius", "theta", "value", "certain"])
        for a in arc_posteriors(sc.env, x, lp, sc.params):
            w.writerow([a.region_id, repr(a.radius), repr(a.theta), repr(a.value), int(a.certain)])
        _emit(buf.getvalue(), args.out)
        return EXIT_OK
    from .asymptotic import two_sensor_locate
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    trials = 1000 if args.trials is None else args.trials
    box = unit_square()
    agree = 0
    for _ in range(trials):
        while True:
            x = rng.uniform(0.05, 0.95, (2, 2))
            if np.linalg.norm(x[0] - x[1]) > 0.05:
                break
        env = voronoi_partition(x, box)
        s = rng.uniform(0.0, 1.0, 2)
        r = np.linalg.norm(x - s, axis=1)
        agree += two_sensor_locate(env, x[0], x[1], r[0], r[1]) == containing_region(env, s)
    _emit(f"trials,agree,rate\n{trials},{agree},{repr(agree / trials if trials else math.nan)}\n", args.out)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regionloc", description="Regional source localization experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sweep=True):
        sp.add_argument("--scenario", help="scenario file (key = value sections)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output CSV path (default stdout)")
        sp.add_argument("--rel-tol", type=float, dest="rel_tol")
        sp.add_argument("--strict", action="store_true", help=f"quadrature tolerance {STRICT_TOL:g}")
        if sweep:
            sp.add_argument("--trials", type=int)
            sp.add_argument("--sigma-grid", type=_sigma_grid, dest="sigma_grid", help="comma separated sigmas")
            sp.add_argument("--k", type=int, help="samples aggregated per reading")
            sp.add_argument("--algo", choices=["a2a", "limited", "both"])

    sp = sub.add_parser("simulate", help="run a seeded sweep over sigma")
    common(sp)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--plot-data", dest="plot_data", help="also write gnuplot blocks here")
    sp.add_argument("--decisions", help="also write per-trial decisions here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("decide", help="decide from a measurement CSV (trial,k,lnP_1,...)")
    common(sp)
    sp.add_argument("--measurements", required=True, help="CSV path or - for stdin")
    sp.add_argument("--sigma", type=float, help="single-sample noise level (default: scenario)")
    sp.set_defaults(func=cmd_decide)

    sp = sub.add_parser("bounds", help="Monte Carlo check of the convergence bounds")
    common(sp)
    sp.add_argument("--theorem", type=int, choices=[1, 2], default=1)
    sp.add_argument("--alpha", type=float, default=2.0)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("voronoi", help="partition a boundary among sites and dump the environment")
    sp.add_argument("--sites", help='"x,y x,y ..."; random sites when omitted')
    sp.add_argument("--n", type=int, default=20, help="number of random sites")
    sp.add_argument("--boundary", help="convex boundary polygon (default unit square)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_voronoi)

    sp = sub.add_parser("oracle", help="zero-noise arc posteriors or two-sensor localization check")
    common(sp)
    sp.add_argument("mode", choices=["arc", "two-sensor"])
    sp.add_argument("--sensor", type=int, default=0)
    sp.add_argument("--source", help='"x,y"')
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (QuadratureError, NoDecisionError, DeltaRegimeError, FloatingPointError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except (harness.ConfigError, GeometryError, ValueError, OSError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
