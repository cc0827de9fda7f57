import numpy as np
import pytest

from regionloc.bounds import BoundScenario, rows_to_csv, theorem_one_check
from regionloc.channel import sample_measurement
from regionloc.cli import main
from regionloc.geometry import Environment
from regionloc.harness import REFERENCE_SENSORS, REFERENCE_SOURCE, DEFAULT_PARAMS, reference_environment

SCENARIO = """
[environment]
sites = random:6
layout_seed = 1
[channel]
d0 = 0.1
[run]
trials = 3
sigma_grid = 0.3
seed = 4
"""


@pytest.fixture
def scenario(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text(SCENARIO)
    return str(p)


def test_simulate_zero_trials(tmp_path, scenario):
    out = tmp_path / "o.csv"
    assert main(["simulate", "--scenario", scenario, "--trials", "0", "--out", str(out)]) == 0
    assert out.read_text() == "sigma,algorithm,trials,correct,rate,stderr\n"


def test_simulate_is_repeatable(tmp_path, scenario):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.csv"
        plot = tmp_path / f"{name}.dat"
        assert main(["simulate", "--scenario", scenario, "--seed", "7", "--sigma-grid", "0.2,0.5",
                     "--out", str(out), "--plot-data", str(plot)]) == 0
        outs.append((out.read_bytes(), plot.read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][0].decode().count("\n") == 5


def test_usage_errors_exit_2(scenario, capsys):
    assert main(["simulate", "--bogus"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["simulate", "--scenario", "/no/such/file.ini"]) == 2
    assert main(["simulate", "--scenario", scenario, "--sigma-grid", "a,b"]) == 2


def test_numeric_failure_exits_3(tmp_path):
    z = sample_measurement(DEFAULT_PARAMS.with_sigma(0.001), REFERENCE_SENSORS, REFERENCE_SOURCE, 1,
                           np.random.default_rng(0))
    m = tmp_path / "m.csv"
    m.write_text("trial,k,z1,z2,z3\n" + z.to_csv_row(0) + "\n")
    code = main(["decide", "--measurements", str(m), "--sigma", "0.001", "--rel-tol", "1e-14",
                 "--out", str(tmp_path / "d.csv")])
    assert code == 3


def test_decide_from_measurements(tmp_path):
    rng = np.random.default_rng(1)
    rows = [sample_measurement(DEFAULT_PARAMS.with_sigma(0.02), REFERENCE_SENSORS, REFERENCE_SOURCE, 1, rng)
            for _ in range(3)]
    m = tmp_path / "m.csv"
    m.write_text("\n".join(z.to_csv_row(i) for i, z in enumerate(rows)) + "\n")
    out = tmp_path / "d.csv"
    assert main(["decide", "--measurements", str(m), "--sigma", "0.02", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "trial,decider,chosen"
    assert lines[1:] == ["0,a2a,1", "1,a2a,1", "2,a2a,1"]


def test_bounds_reproduces_module_check(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bounds", "--trials", "5", "--sigma-grid", "0.1", "--seed", "3", "--out", str(out)]) == 0
    sc = BoundScenario(reference_environment(), REFERENCE_SENSORS, REFERENCE_SOURCE, DEFAULT_PARAMS)
    rows = theorem_one_check(sc, [0.1], 5, np.random.default_rng(3))
    assert out.read_text() == rows_to_csv(rows)


def test_voronoi_dump_parses(tmp_path):
    out = tmp_path / "env.txt"
    assert main(["voronoi", "--sites", "0.2,0.2 0.8,0.3 0.5,0.8", "--out", str(out)]) == 0
    env = Environment.from_text(out.read_text())
    assert env.ids == [1, 2, 3]
    assert env.total_area == pytest.approx(1.0)


def test_oracle_modes(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["oracle", "two-sensor", "--trials", "50", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[1] == "50,50,1.0"
    assert main(["oracle", "arc", "--source", "0.3,0.2", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "region,radius,theta,value,certain"
