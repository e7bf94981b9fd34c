"""Shared fixtures for the pencilbench test suite"""

import os
import sys

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

import numpy as np
import pytest

from pencilbench.config import reset_settings
from pencilbench.core.tensor_core import Cpd


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Every test sees the environment it sets, not a cached one"""
    for key in list(os.environ):
        if key.startswith("PENCILBENCH_"):
            monkeypatch.delenv(key)
    reset_settings()
    yield
    reset_settings()


def random_cpd(rng, dims, r):
    n1, n2, n3 = dims
    return Cpd.from_factors(
        rng.standard_normal((n1, r)),
        rng.standard_normal((n2, r)),
        rng.standard_normal((n3, r)),
    )


@pytest.fixture
def make_cpd(rng):
    def factory(dims, r):
        return random_cpd(rng, dims, r)
    return factory
