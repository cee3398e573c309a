import numpy as np
import pytest

from trackqueue import Exponential, SimConfig, simulate


@pytest.fixture(scope="session")
def mm12_run():
    """One M/M/1/2 run per (lam, policy) shared across tests."""
    cache = {}

    def run(lam, policy, deliveries=300_000, seed=42, buffer_size=1, mu=1.0):
        key = (lam, mu, policy.label, deliveries, seed, buffer_size)
        if key not in cache:
            cache[key] = simulate(
                SimConfig(
                    Exponential(lam),
                    Exponential(mu),
                    buffer_size,
                    policy,
                    target_deliveries=deliveries,
                    seed=seed,
                )
            )
        return cache[key]

    return run


def rel_err(measured, expected):
    return abs(measured - expected) / abs(expected)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
