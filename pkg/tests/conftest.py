"""Shared fixtures for the uepopt test suite."""

import pytest

from uepopt.core.importance import synthetic_profile
from uepopt.core.solver import ResourceBudget
from uepopt.harness.runner import sample_channel


@pytest.fixture
def make_instance():
    """Factory for seeded random instances (profile, channel, budget)."""

    def _make(
        seed: int,
        n_features: int = 6,
        gamma_avg_db: float = 5.0,
        p_max: float = 2.0,
        m_min: float = 4.0,
        kind: str = "isfr_paper_like",
        d_t: float = 0.22,
    ):
        w = synthetic_profile(kind, n_features, seed=seed)
        ch = sample_channel(gamma_avg_db, 5.0, n_features, seed)
        return w, ch, ResourceBudget(p_max=p_max, m_min=m_min, d_t=d_t)

    return _make


@pytest.fixture
def small_instance(make_instance):
    return make_instance(seed=7, n_features=4)

