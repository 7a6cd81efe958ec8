import time
from pathlib import Path

import pytest

from symbolic_models import build
from symbolic_models.io import Config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def pendulum_cfg():
    return Config.load(CONFIGS / "pendulum.json")


@pytest.fixture(scope="session")
def pendulum_build(pendulum_cfg):
    """The pendulum abstraction and the wall time it took to build."""
    t0 = time.perf_counter()
    T = build(pendulum_cfg.system, pendulum_cfg.certificate, pendulum_cfg.params, pendulum_cfg.steps)
    return T, time.perf_counter() - t0


@pytest.fixture(scope="session")
def pendulum_ts(pendulum_build):
    return pendulum_build[0]


@pytest.fixture
def configs_dir():
    return CONFIGS
