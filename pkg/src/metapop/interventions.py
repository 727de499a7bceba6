"""Geographic quarantine and the infection/awareness seeding strategies."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .centrality import CentralityRanking, centrality, top_k
from .core import (
    AWARE,
    UNAWARE,
    CompartmentState,
    FlowMatrix,
    Scenario,
    SeedingSpec,
    ValidationError,
)


class SeedingError(ValueError):
    pass


def _check_targets(targets, n):
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"quarantine targets not distinct: {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise IndexError(f"quarantine target {t} out of range [0, {n})")
    return targets


def quarantine(m: FlowMatrix, targets) -> FlowMatrix:
    """Cut every flow into and out of ``targets``.

    A quarantined row becomes a unit vector on its own diagonal.  In the
    other rows, mass that used to flow into a quarantined subpopulation
    stays home instead (it is added to the diagonal).
    """
    targets = _check_targets(targets, m.n)
    if not targets:
        return m
    w = np.array(m.w)
    cut = np.zeros(m.n, dtype=bool)
    cut[targets] = True
    keep = np.flatnonzero(~cut)
    w[keep, keep] += w[np.ix_(keep, np.flatnonzero(cut))].sum(axis=1)
    # summation can overshoot 1 by an ulp
    w[keep, keep] = np.minimum(w[keep, keep], 1.0)
    w[np.ix_(keep, np.flatnonzero(cut))] = 0.0
    w[cut] = 0.0
    w[targets, targets] = 1.0
    return FlowMatrix(w, m.labels)


def allocate(total: int, weights, capacity=None, exact=None) -> np.ndarray:
    """Integer split of ``total`` proportional to ``weights``.

    Each exact share (``exact`` if given) is rounded half-to-even; the
    rounding residual then goes to the largest weight so the sum is exact.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.sum() <= 0:
        if total:
            raise SeedingError("cannot place seeds in an empty population")
        return np.zeros(weights.shape, dtype=np.int64)
    if exact is None:
        exact = total * weights / weights.sum()
    counts = np.round(exact).astype(np.int64)
    counts[int(np.argmax(weights))] += total - int(counts.sum())
    if np.any(counts < 0) or (capacity is not None and np.any(counts > capacity)):
        raise SeedingError("seeded count exceeds the target population")
    return counts


def seed_infection(pop, spec: SeedingSpec, ranking: Optional[CentralityRanking] = None, rng=None
                   ) -> CompartmentState:
    """Initial integer state with ``spec.fraction`` of the population infected.

    Everyone starts unaware; non-infected individuals are susceptible.
    """
    problems = spec.violations()
    if problems:
        raise ValidationError(problems)
    pop = np.asarray(pop).astype(np.int64)
    n = pop.shape[0]
    total = int(np.round(spec.fraction * pop.sum()))
    infected = np.zeros(n, dtype=np.int64)

    if spec.strategy == "uniform":
        infected = allocate(total, pop, capacity=pop, exact=spec.fraction * pop)
    elif spec.strategy == "random-single":
        candidates = np.flatnonzero(pop > 0)
        if candidates.size:
            rng = np.random.default_rng() if rng is None else rng
            j = int(candidates[rng.integers(candidates.size)])
            infected[j] = min(total, int(pop[j]))
    else:
        if spec.strategy == "centrality-top-k":
            if ranking is None:
                raise SeedingError("centrality-top-k seeding needs a centrality ranking")
            nodes = top_k(ranking, spec.k)
        else:
            nodes = [int(x) for x in spec.nodes]
            if any(not 0 <= x < n for x in nodes):
                raise SeedingError(f"seed node out of range in {nodes}")
        idx = np.array(sorted(set(nodes)))
        infected[idx] = allocate(total, pop[idx], capacity=pop[idx])
    return CompartmentState.susceptible(pop, infected)


def seed_awareness(state: CompartmentState, fraction: float, rng=None) -> CompartmentState:
    """Mark ``round(fraction * N)`` people, drawn from the whole population, aware.

    With ``rng`` the draw is a multivariate hypergeometric sample over all
    (subpopulation, disease, awareness) cells; people already aware stay
    aware.  Without ``rng`` every cell receives its expected share, which is
    what the deterministic engine uses.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"awareness fraction out of [0,1]: {fraction}")
    x = np.array(state.cells)
    N = x.sum()
    k = int(np.round(fraction * N))
    if rng is None:
        share = k / N if N > 0 else 0.0
        x = x.astype(float)
        adopt = x[:, :, UNAWARE] * share
    else:
        if not state.integer:
            raise TypeError("sampled awareness seeding needs an integer state")
        drawn = rng.multivariate_hypergeometric(x.reshape(-1), k, method="marginals").reshape(x.shape)
        adopt = drawn[:, :, UNAWARE]
    x[:, :, UNAWARE] -= adopt
    x[:, :, AWARE] += adopt
    return CompartmentState(x)


def resolve_ranking(s: Scenario) -> Optional[CentralityRanking]:
    if s.infection_seed.strategy != "centrality-top-k":
        return None
    return centrality(s.mobility, s.infection_seed.centrality_kind)


def prepared_mobility(s: Scenario) -> FlowMatrix:
    return quarantine(s.mobility, s.quarantine)


def initial_state(s: Scenario, integer: bool, rng=None):
    """Seeded initial state of a scenario plus a metadata dict.

    Random choices draw from ``rng`` (defaults to one seeded by
    ``s.rng_seed``).  Infection seeding always happens in whole people; the
    deterministic engine then carries the result as real-valued masses.
    """
    from .stochastic import make_rng

    rng = make_rng(s.rng_seed) if rng is None else rng
    ranking = resolve_ranking(s)
    state = seed_infection(s.population, s.infection_seed, ranking, rng)
    meta = {"seeded_infected": int(state.I.sum())}
    if ranking is not None:
        meta["seed_nodes"] = top_k(ranking, s.infection_seed.k)
    if s.awareness_seed is not None and s.awareness_seed.fraction > 0:
        state = seed_awareness(state, s.awareness_seed.fraction, rng if integer else None)
    if not integer:
        state = state.as_float()
    return state, meta
