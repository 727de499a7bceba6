"""Counts-based Monte-Carlo realisation of the two generative procedures.

Each subpopulation carries six integer cells (S/I/R x unaware/aware).
Within a step every individual undergoes, independently:

* infection      S -> I with prob. min(1, lam * I_j / N_j)
* awareness      U -> A with prob. psi * F_j
* immunisation   S -> R with prob. omega * F_j, for susceptibles that were
                 not infected in this step
* immunity loss  R -> S with prob. xi
* recovery       I -> S with prob. gamma, for the infected at step start
* mobility       a new location drawn from row j of the mobility matrix

so every sub-step is a binomial draw per cell and mobility is one
multinomial per (subpopulation, cell).  Populations are never
materialised as individuals, which keeps the cost independent of N.
"""

from __future__ import annotations

import numpy as np

from .core import (
    AWARE,
    UNAWARE,
    CompartmentState,
    FlowMatrix,
    I,
    ModelParams,
    R,
    RunSummary,
    S,
    Scenario,
    Trajectory,
    require_valid,
)
from .deterministic import infection_prob, information_pressure

RNG_ALGORITHM = "numpy.random.PCG64"


def rng_description() -> str:
    return f"{RNG_ALGORITHM} (numpy {np.__version__})"


def make_rng(seed, *spawn_key) -> np.random.Generator:
    """Generator for a run; ``spawn_key`` names a sub-stream (cell, replica)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.PCG64(ss))


def _as_counts(state: CompartmentState) -> np.ndarray:
    if not state.integer:
        raise TypeError("the stochastic engine needs an integer state")
    return np.array(state.cells, dtype=np.int64)


def mc_move(x: np.ndarray, m: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Multinomial relocation of every cell of every subpopulation."""
    n = x.shape[0]
    flat = x.reshape(n, -1)
    # pvals broadcast to (n, cells, n): row j of m for every cell of origin j
    moved = rng.multinomial(flat, m[:, None, :])
    return moved.sum(axis=0).T.reshape(x.shape)


def _disease_draws(x: np.ndarray, p: ModelParams, rng, F=None) -> np.ndarray:
    p_inf = np.broadcast_to(infection_prob(x, p.lam)[:, None], x[:, S].shape)
    new_inf = rng.binomial(x[:, S], p_inf)
    if F is not None:
        q_imm = np.broadcast_to((p.omega * F)[:, None], x[:, S].shape)
        imm = rng.binomial(x[:, S] - new_inf, q_imm)
        loss = rng.binomial(x[:, R], p.xi)
    rec = rng.binomial(x[:, I], p.gamma)

    out = x.copy()
    out[:, S] += rec - new_inf
    out[:, I] += new_inf - rec
    if F is None:
        return out
    out[:, S] += loss - imm
    out[:, R] += imm - loss
    adopt = rng.binomial(out[:, :, UNAWARE], np.broadcast_to((p.psi * F)[:, None], out[:, :, UNAWARE].shape))
    out[:, :, UNAWARE] -= adopt
    out[:, :, AWARE] += adopt
    return out


def mc_step_disease(state: CompartmentState, m: FlowMatrix, p: ModelParams, rng) -> CompartmentState:
    x = _disease_draws(_as_counts(state), p, rng)
    return CompartmentState(mc_move(x, m.w, rng))


def mc_step_full(state: CompartmentState, m: FlowMatrix, c: FlowMatrix, p: ModelParams, rng) -> CompartmentState:
    x = _as_counts(state)
    F = information_pressure(x, c.w)
    x = _disease_draws(x, p, rng, F)
    return CompartmentState(mc_move(x, m.w, rng))


def mc_simulate(state: CompartmentState, m: FlowMatrix, p: ModelParams, rng,
                c: FlowMatrix = None, steps: int = None) -> Trajectory:
    steps = p.horizon if steps is None else steps
    x = _as_counts(state)
    out = np.empty((steps + 1,) + x.shape, dtype=np.int64)
    out[0] = x
    w = m.w
    cw = None if c is None else c.w
    for t in range(steps):
        F = None if cw is None else information_pressure(x, cw)
        x = mc_move(_disease_draws(x, p, rng, F), w, rng)
        out[t + 1] = x
    return Trajectory(out)


def mc_run(s: Scenario, rng=None) -> RunSummary:
    """Stochastic run; the same ``rng_seed`` reproduces the same trajectory."""
    from .interventions import initial_state, prepared_mobility
    from .stationarity import summarize

    require_valid(s)
    rng = make_rng(s.rng_seed) if rng is None else rng
    state, meta = initial_state(s, integer=True, rng=rng)
    m = prepared_mobility(s)
    traj = mc_simulate(state, m, s.params, rng, s.calls)
    meta["rng"] = rng_description()
    return summarize(s, traj, meta)
