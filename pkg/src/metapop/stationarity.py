"""Stationary-state detection on the global infected fraction.

A transition ``t -> t+1`` is *settled* when the fraction barely moves.  The
run is stationary when the trailing settled stretch (the one that lasts to
the end of the trajectory) covers at least ``window`` transitions; ``tau``
is the first step of that stretch and ``i_inf`` the fraction at the last
step.  Requiring the stretch to reach the end makes an early lull (such as
the first steps of a slowly growing outbreak) unable to pass as
stationarity.

Two settledness tests are available:

absolute   |i[t+1] - i[t]| < epsilon
relative   |i[t+1] - i[t]| <= epsilon * i[t]  (+ a sampling-noise allowance
           ``noise_z * sqrt(i[t] / N)`` for integer runs), or fewer than one
           infected individual on both sides of the step

When the population size is known, a run that ends with fewer than one
infected individual has reached the disease-free state and reports
``i_inf = 0``.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np

from .core import RunSummary, Scenario, Trajectory


class StationaryState(NamedTuple):
    stationary: bool
    tau: Optional[int]
    i_inf: Optional[float]


def settled_steps(infected, epsilon: float, mode: str = "absolute",
                  population: Optional[float] = None, noise_z: float = 0.0) -> np.ndarray:
    i = np.asarray(infected, dtype=float)
    diff = np.abs(np.diff(i))
    if mode == "absolute":
        return diff < epsilon
    if mode != "relative":
        raise ValueError(f"unknown stationarity mode {mode!r}")
    allowance = epsilon * i[:-1]
    if population:
        allowance = allowance + noise_z * np.sqrt(i[:-1] / population)
        below_one = i * population < 1.0
        return (diff <= allowance) | (below_one[:-1] & below_one[1:])
    return diff <= allowance


def detect_stationarity(infected, epsilon: float = 1e-6, window: int = 10, *, mode: str = "absolute",
                        population: Optional[float] = None, noise_z: float = 0.0) -> StationaryState:
    i = np.asarray(infected, dtype=float)
    if i.size == 0:
        raise ValueError("empty trajectory")
    ok = settled_steps(i, epsilon, mode, population, noise_z)
    unsettled = np.flatnonzero(~ok)
    tau = int(unsettled[-1]) + 1 if unsettled.size else 0
    if ok.size - tau < window:
        return StationaryState(False, None, None)
    if population and i[-1] * population < 1.0:
        return StationaryState(True, tau, 0.0)
    return StationaryState(True, tau, float(np.clip(i[-1], 0.0, 1.0)))


def summarize(s: Scenario, traj: Trajectory, meta: dict) -> RunSummary:
    st = s.stationarity
    integer = np.issubdtype(traj.cells.dtype, np.integer)
    res = detect_stationarity(
        traj.infected_fraction,
        st.epsilon,
        st.window,
        mode=st.mode,
        population=float(traj.total_population[0]),
        noise_z=st.noise_z if integer else 0.0,
    )
    meta = dict(meta, engine="stochastic" if integer else "deterministic", epsilon=st.epsilon, window=st.window, mode=st.mode)
    return RunSummary(res.stationary, res.tau, res.i_inf, traj, s.params.r0, meta)
