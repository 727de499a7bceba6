import numpy as np
import pytest

from metapop.core import FlowMatrix, ModelParams, Scenario, SeedingSpec
from metapop.ingest import synth_matrix, synth_population


def small_scenario(n=5, engine="deterministic", full=True, seed=0, **params):
    """A small diagonal-dominant scenario with 0.1% uniform seeding."""
    mob = synth_matrix("diagonal-dominant", n, 0.9, seed)
    calls = synth_matrix("diagonal-dominant", n, 0.7, seed + 1) if full else None
    pop = synth_population(100_000, n, "random", seed + 2)
    defaults = dict(lam=0.8, gamma=0.4)
    if full:
        defaults.update(omega=0.05, psi=0.1, xi=0.1)
    defaults.update(params)
    return Scenario(
        mobility=mob,
        calls=calls,
        params=ModelParams(**defaults),
        population=pop,
        infection_seed=SeedingSpec("uniform", 0.001),
        awareness_seed=SeedingSpec("uniform", 0.01) if full else None,
        rng_seed=seed,
        engine=engine,
    )


def random_stochastic(rng, n):
    w = rng.random((n, n)) * (rng.random((n, n)) < 0.6)
    w[np.arange(n), np.arange(n)] += rng.random(n)
    return FlowMatrix.from_weights(w)


@pytest.fixture
def scenario():
    return small_scenario()
