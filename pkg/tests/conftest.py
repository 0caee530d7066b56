import logging

import numpy as np
import pytest

from lineage_lab.scenario.builtins import constant_supercritical, quadratic, valley


@pytest.fixture(autouse=True)
def disable_logging():
    """Disable logging output during tests."""
    logging.disable(logging.CRITICAL)
    yield
    logging.disable(logging.NOTSET)


@pytest.fixture
def constant_scenario():
    return constant_supercritical()


@pytest.fixture
def quadratic_scenario():
    return quadratic()


@pytest.fixture
def valley_scenario():
    return valley()


@pytest.fixture
def rng():
    """Seeded generator; every test gets the same stream."""
    return np.random.default_rng(20240611)


@pytest.fixture
def workers_env(monkeypatch):
    """Force single-process replica runs regardless of the environment."""
    monkeypatch.setattr("lineage_lab.experiments.compare.WORKERS", 1)
