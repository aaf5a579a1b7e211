"""Shared fixtures: canonical parameter sets and random parameter draws."""

import numpy as np
import pytest

from sveisbk import ModelParams

# Canonical rate set used throughout the tests: r0(beta=0.1) = 20/27.
BASE = dict(Pi=1.0, alpha=0.1, beta_bar=0.1, m=0.1, omega=0.1, gamma=0.1,
            xi=0.1, sigma=0.1, eta=0.1, k=0.5, theta=1.0, delta=1.0)


def make_params(**overrides) -> ModelParams:
    return ModelParams(**{**BASE, **overrides})


def random_params(rng: np.random.Generator, delta_zero=False) -> ModelParams:
    """A random valid parameter set with rates in sensible epidemic ranges."""
    u = lambda lo, hi: float(rng.uniform(lo, hi))
    return ModelParams(
        Pi=u(0.5, 5.0),
        alpha=u(0.02, 0.8),
        beta_bar=u(0.01, 0.6),
        m=u(0.02, 0.5),
        omega=u(0.02, 0.8),
        gamma=u(0.02, 0.8),
        xi=u(0.02, 0.8),
        sigma=u(0.02, 0.8),
        eta=u(0.02, 0.8),
        k=u(0.05, 2.0),
        theta=u(0.2, 3.0),
        delta=0.0 if delta_zero else u(0.05, 1.5),
    )


@pytest.fixture
def example_params() -> ModelParams:
    return make_params()
