import json
from pathlib import Path

import pytest

from conekrf.cohomology import SurfaceParams
from conekrf.profile import Grid, Regularization
from conekrf.solver import SolverConfig, run

ORACLES = Path(__file__).with_name("oracles")

ACCEPT_GRID = Grid(15.0, 2049)
ACCEPT_REG = Regularization(1e-2, 1e-2)
CONTRACTING = SurfaceParams(2, 1, 4, "1/4")
COLLAPSING = SurfaceParams(2, 1, 4, "3/4")


@pytest.fixture(scope="session")
def contracting_run():
    return run(CONTRACTING, ACCEPT_REG, ACCEPT_GRID, SolverConfig())


@pytest.fixture(scope="session")
def collapsing_run():
    return run(COLLAPSING, ACCEPT_REG, ACCEPT_GRID, SolverConfig())


@pytest.fixture(scope="session")
def chi_oracle():
    return json.loads((ORACLES / "chi_oracle.json").read_text())


# -- acceptance table -----------------------------------------------------------

_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    # setup time counts, so a fixture's flow run is charged to the first criterion using it
    if rep.when == "setup":
        item._setup_duration = rep.duration
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        dur = rep.duration + (getattr(item, "_setup_duration", 0.0) if rep.when == "call" else 0.0)
        _ACCEPTANCE.append((marker.args[0], "PASS" if rep.passed else "FAIL", dur, marker.args[1]))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, text): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid, status, dur, text in _ACCEPTANCE:
        tr.write_line(f"{cid:<6} {status}  {dur:7.2f}s  {text}")
    n_pass = sum(s == "PASS" for _, s, _, _ in _ACCEPTANCE)
    tr.write_line(f"{n_pass}/{len(_ACCEPTANCE)} acceptance checks pass")
