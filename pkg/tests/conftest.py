import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clamr import (
    Dataset,
    FitSettings,
    build_config,
    mrspec_from_json,
    run_chain,
    simulate,
    SimScenario,
    scenario_mr_specs,
)

FIXTURES = Path(__file__).parent / "fixtures"

# Verdict lines registered by the acceptance tests; echoed after the test
# summary so they stay visible under output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def all_fixture_paths() -> list[Path]:
    paths = sorted(FIXTURES.glob("*.json"))
    assert paths, "fixture directory must ship MR specs"
    return paths


@pytest.fixture(scope="session")
def expr_spec():
    return mrspec_from_json(FIXTURES / "expression_three_region.json")["specs"][0]


@pytest.fixture(scope="session")
def vitals_specs():
    return mrspec_from_json(FIXTURES / "vitals.json")["specs"]


@pytest.fixture(scope="session")
def small_sim():
    """A small misspecified draw shared by tests that just need real data."""
    return simulate(SimScenario(kind="misspecified", n=90, seed=11))


@pytest.fixture(scope="session")
def small_fit(small_sim):
    """One short chain on the small simulated dataset (session cached)."""
    data, truth = small_sim
    config = build_config(
        scenario_mr_specs("misspecified"),
        variance_mode="simulation",
        rhos=0.7,
        iterations=600,
        burn_in=150,
        thin=3,
        seed=42,
    )
    return run_chain(config, data), data, truth, config


@pytest.fixture()
def rng():
    return np.random.default_rng(2026)


def make_dataset(n=40, p=2, seed=5, missing_cells=()):
    gen = np.random.default_rng(seed)
    values = gen.normal(size=(n, p))
    for i, j in missing_cells:
        values[i, j] = np.nan
    names = tuple(f"f{j + 1}" for j in range(p))
    return Dataset.from_values(values, names)
