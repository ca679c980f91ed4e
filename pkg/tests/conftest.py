import numpy as np
import pytest

from app.onebit.types import SeedPlan


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch):
    # Las variables ONEBIT_* del entorno no deben cambiar los resultados de los tests.
    for name in ("ONEBIT_OUTPUT_DIR", "ONEBIT_WORKERS", "ONEBIT_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def plan():
    return SeedPlan(20240601)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
