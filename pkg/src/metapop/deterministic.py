"""Expected-value iteration of the coupled contagion/mobility system.

One step applies the stochastic procedure's sub-steps in expectation:

1. infection      each susceptible is infected with prob. lam * I_j / N_j
2. awareness      each unaware becomes aware with prob. psi * F_j
3. immunisation   each susceptible not just infected becomes resistant with
                  prob. omega * F_j; each resistant loses immunity with
                  prob. xi
4. recovery       each infected (as of the start of the step) recovers
                  with prob. gamma
5. mobility       X_i <- sum_j m_ji X_j for every joint cell

``F_j = sum_k c_kj A_k / sum_k c_kj N_k`` is the chance that a call received
in ``j`` comes from an aware caller.  It is computed once per step from the
pre-step state.  Newly infected individuals are not eligible for recovery
in the step they were infected, which keeps the classic SIS fixed point
``1 - gamma / lam`` for a single population.
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

SEQUENTIAL = "sequential"
SIMULTANEOUS = "simultaneous"


def infection_prob(cells: np.ndarray, lam: float) -> np.ndarray:
    """Per-subpopulation infection probability, 0 for empty subpopulations."""
    N = cells.sum(axis=(1, 2))
    inf = cells[:, I, :].sum(axis=1)
    p = np.divide(lam * inf, N, out=np.zeros(N.shape, dtype=float), where=N > 0)
    return np.minimum(p, 1.0)


def information_pressure(cells: np.ndarray, c: np.ndarray) -> np.ndarray:
    """F_j: share of calls into ``j`` that come from aware callers."""
    aware = cells[:, :, AWARE].sum(axis=1).astype(float)
    N = cells.sum(axis=(1, 2)).astype(float)
    num = c.T @ aware
    den = c.T @ N
    F = np.divide(num, den, out=np.zeros(den.shape), where=den > 0)
    return np.clip(F, 0.0, 1.0)


def move(cells: np.ndarray, m: np.ndarray) -> np.ndarray:
    n = cells.shape[0]
    return (m.T @ cells.reshape(n, -1)).reshape(cells.shape)


def disease_transitions(cells, p: ModelParams, F=None, scheme: str = SEQUENTIAL) -> np.ndarray:
    """Expected disease and awareness flows inside each subpopulation."""
    x = np.asarray(cells, dtype=float)
    p_inf = infection_prob(x, p.lam)[:, None]
    out = x.copy()
    new_inf = x[:, S] * p_inf
    rec = x[:, I] * p.gamma
    out[:, S] -= new_inf
    out[:, I] += new_inf - rec
    out[:, S] += rec
    if F is None:
        return out

    Fc = F[:, None]
    if scheme == SEQUENTIAL:
        imm = (x[:, S] - new_inf) * (p.omega * Fc)
    elif scheme == SIMULTANEOUS:
        imm = x[:, S] * (p.omega * Fc)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    loss = x[:, R] * p.xi
    out[:, S] += loss - imm
    out[:, R] += imm - loss

    # awareness is independent of the disease transition, so it can be
    # applied to the post-transition cells
    adopt = out[:, :, UNAWARE] * (p.psi * F)[:, None]
    out[:, :, UNAWARE] -= adopt
    out[:, :, AWARE] += adopt
    return out


def step_disease(state: CompartmentState, m: FlowMatrix, p: ModelParams) -> CompartmentState:
    x = disease_transitions(state.cells, p)
    return CompartmentState(move(x, m.w))


def step_full(
    state: CompartmentState, m: FlowMatrix, c: FlowMatrix, p: ModelParams, scheme: str = SEQUENTIAL
) -> CompartmentState:
    """One step of the five-compartment model.

    ``scheme="simultaneous"`` evaluates every flow from the pre-step values,
    as the printed difference equations do.  It can produce negative
    compartments when ``lam + omega > 1`` and is only meant for
    cross-checking at small rates.
    """
    if m.n != c.n:
        raise ValueError("mobility and calls matrices differ in size")
    x = np.asarray(state.cells, dtype=float)
    F = information_pressure(x, c.w)
    x = disease_transitions(x, p, F, scheme)
    return CompartmentState(move(x, m.w))


def simulate(state: CompartmentState, m: FlowMatrix, p: ModelParams, c: FlowMatrix = None,
             steps: int = None, scheme: str = SEQUENTIAL) -> Trajectory:
    """Iterate from ``state`` and return all ``steps + 1`` states."""
    steps = p.horizon if steps is None else steps
    x = np.asarray(state.cells, dtype=float)
    out = np.empty((steps + 1,) + x.shape)
    out[0] = x
    w = m.w
    cw = None if c is None else c.w
    for t in range(steps):
        F = None if cw is None else information_pressure(x, cw)
        x = move(disease_transitions(x, p, F, scheme), w)
        out[t + 1] = x
    if np.any(out < 0):
        raise ValueError("negative compartment values; the simultaneous scheme is unstable at these rates")
    return Trajectory(out)


def run(s: Scenario, rng=None) -> RunSummary:
    """Deterministic run of a validated scenario over its full horizon.

    ``rng`` only feeds random seeding choices (e.g. a random origin).
    """
    from .interventions import initial_state, prepared_mobility
    from .stationarity import summarize

    require_valid(s)
    state, meta = initial_state(s, integer=False, rng=rng)
    m = prepared_mobility(s)
    traj = simulate(state, m, s.params, s.calls)
    return summarize(s, traj, meta)
