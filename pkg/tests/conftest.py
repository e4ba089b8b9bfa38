import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _default_dim_cap(monkeypatch):
    monkeypatch.delenv("QMCLAB_MAX_DIM", raising=False)
