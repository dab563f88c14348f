import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semicalib.bases import build_kr, build_kv  # noqa: E402
from semicalib.calibration import CalibrationProblem  # noqa: E402
from semicalib.data import ObservationField  # noqa: E402
from semicalib.emulator import fit_emulator  # noqa: E402
from semicalib.synthetic import make_scenario, toy_ensemble, toy_grid  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def dome40():
    grid = toy_grid()
    design, ens, fut = toy_ensemble(40, seed=2, grid=grid)
    return grid, design, ens, fut


@pytest.fixture(scope="session")
def dome_emulator(dome40):
    _, design, ens, _ = dome40
    return fit_emulator(ens, design, J_w=3, J_u=3)


@pytest.fixture(scope="session")
def small_problem():
    """p = 40 instance with exactly m = 20 positive observed cells."""
    grid = toy_grid(8, 5, 40.0)
    design, ens, _ = toy_ensemble(30, seed=5, grid=grid)
    em = fit_emulator(ens, design, J_w=2, J_u=2)
    sc = make_scenario(ens, design, 5, seed=1, grid=grid)
    z = sc.contaminated_obs.z.copy()
    pos = np.flatnonzero(z > 0)
    z[pos[np.argsort(z[pos], kind="stable")[: pos.size - 20]]] = 0.0
    obs = ObservationField(z)
    kr = build_kr(grid, obs.positive_cells, J_r=4)
    kv = build_kv(ens.presence, obs.presence)
    return CalibrationProblem(em, obs, kr, kv)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def run_cli(*argv):
    from semicalib.cli import main

    return main([str(a) for a in argv])


@pytest.fixture(scope="session")
def cli_pipeline(tmp_path_factory):
    """Toy ensemble taken through every subcommand once; returns the directory map."""
    root = tmp_path_factory.mktemp("pipeline")
    d = {k: root / k for k in ("synth", "emulate", "validate", "calibrate", "project")}
    assert run_cli("synth", "--toy-runs", 24, "--seed", 3, "--out", d["synth"]) == 0
    ens = d["synth"] / "ensemble.txt"
    assert run_cli("emulate", "--ensemble", ens, "--J-w", 2, "--J-u", 2, "--out", d["emulate"]) == 0
    assert run_cli("validate", "--ensemble", ens, "--J-w", 2, "--J-u", 2, "--holdout-frac", 0.2,
                   "--seed", 1, "--out", d["validate"]) == 0
    assert run_cli("calibrate", "--emulator", d["emulate"] / "emulator.bundle", "--ensemble", ens,
                   "--observation", d["synth"] / "observation.txt", "--grid",
                   d["synth"] / "grid.txt", "--J-r", 4, "--n-iter", 120, "--burn-in", 40,
                   "--seed", 2, "--checkpoint-every", 50, "--out", d["calibrate"]) == 0
    assert run_cli("project", "--ensemble", ens, "--future-ensemble",
                   d["synth"] / "future_ensemble.txt", "--grid", d["synth"] / "grid.txt",
                   "--chain", d["calibrate"] / "chain.txt", "--prior-draws", 200, "--seed", 4,
                   "--n-grid", 64, "--out", d["project"]) == 0
    return d
