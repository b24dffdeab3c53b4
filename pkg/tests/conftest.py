"""Session-scoped fixtures for the expensive benchmark computations."""

import pytest

from polyrom.experiments import parse_recipe, run_experiment
from polyrom.fom import KdvConfig, kdv_simulate


@pytest.fixture(scope="session")
def session_kdv_full():
    """One full dispersive-wave simulation shared across the suite."""
    return kdv_simulate(KdvConfig())


@pytest.fixture(scope="session")
def toy3d_results():
    return run_experiment(parse_recipe("toy3d"))


@pytest.fixture(scope="session")
def kdv_r5_results(session_kdv_full):
    recipe = parse_recipe("kdv_r5")
    return run_experiment(recipe, log=None, full=session_kdv_full)


@pytest.fixture(scope="session")
def kdv_r16_results(session_kdv_full):
    recipe = parse_recipe("kdv_r16")
    return run_experiment(recipe, log=None, full=session_kdv_full)


@pytest.fixture(scope="session")
def allen_cahn_results():
    recipe = parse_recipe("allen_cahn")
    return run_experiment(recipe, log=None)
