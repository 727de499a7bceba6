"""Parameter sweeps: r0 threshold curves and (omega, psi, xi) heatmaps.

Cells are independent.  Stochastic cells draw from an RNG stream keyed by
the scenario seed, the cell coordinates and the replica number, so results
do not depend on scheduling or on the number of workers.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import deterministic, stochastic
from .core import ModelParams, RunSummary, Scenario, SeedingSpec

PARAM_ALIASES = {"lambda": "lam", "lam": "lam", "gamma": "gamma", "omega": "omega", "psi": "psi", "xi": "xi"}


def run_scenario(s: Scenario, rng=None) -> RunSummary:
    if s.engine == "stochastic":
        return stochastic.mc_run(s, rng)
    return deterministic.run(s, rng)


def _param_name(name: str) -> str:
    try:
        return PARAM_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown sweep parameter {name!r}") from None


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid over model rates.

    ``axes`` is an ordered sequence of ``(parameter, values)``; ``links``
    ties a parameter to an axis (``{"psi": "omega"}`` sweeps the diagonal
    omega = psi); ``fixed`` overrides template rates in every cell.
    """

    axes: tuple
    fixed: dict = field(default_factory=dict)
    links: dict = field(default_factory=dict)
    replicas: int = 1

    def __post_init__(self):
        axes = tuple((_param_name(k), tuple(float(v) for v in vals)) for k, vals in self.axes)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "fixed", {_param_name(k): float(v) for k, v in self.fixed.items()})
        object.__setattr__(self, "links", {_param_name(k): _param_name(v) for k, v in self.links.items()})

    def violations(self) -> list[str]:
        out = []
        names = [k for k, _ in self.axes]
        if len(set(names)) != len(names):
            out.append("duplicate sweep axis")
        for name, vals in self.axes:
            if not vals:
                out.append(f"axis {name} has no values")
            out += [f"axis {name}: value {v} outside [0,1]" for v in vals if not 0.0 <= v <= 1.0]
        out += [f"fixed {k}={v} outside [0,1]" for k, v in self.fixed.items() if not 0.0 <= v <= 1.0]
        for k, target in self.links.items():
            if target not in names:
                out.append(f"link {k} -> {target}: {target} is not an axis")
        if self.replicas < 1:
            out.append("replicas must be >= 1")
        return out

    @property
    def shape(self) -> tuple:
        return tuple(len(v) for _, v in self.axes)

    def cells(self):
        """Yield ``(coordinates, rate overrides)`` in row-major order."""
        for coord in itertools.product(*(range(len(v)) for _, v in self.axes)):
            rates = dict(self.fixed)
            for (name, vals), i in zip(self.axes, coord):
                rates[name] = vals[i]
            for k, target in self.links.items():
                rates[k] = rates[target]
            yield coord, rates


@dataclass(frozen=True)
class CellResult:
    coord: tuple
    params: ModelParams
    mean_i_inf: Optional[float]
    se_i_inf: Optional[float]
    tau: Optional[float]
    stationary: bool
    n_stationary: int = 0
    replicas: int = 1
    error: str = ""


def run_cell(template: Scenario, grid: SweepGrid, coord: tuple, rates: dict) -> CellResult:
    params = template.params.with_(**rates)
    s = template.with_(params=params)
    try:
        if s.engine == "stochastic":
            runs = [
                stochastic.mc_run(s, stochastic.make_rng(s.rng_seed, *coord, r))
                for r in range(grid.replicas)
            ]
        else:
            runs = [deterministic.run(s)]
    except Exception as exc:  # a failed cell must not stop the sweep
        return CellResult(coord, params, None, None, None, False, 0, grid.replicas, f"{type(exc).__name__}: {exc}")

    good = [r for r in runs if r.stationary]
    if len(good) < len(runs) or not good:
        return CellResult(coord, params, None, None, None, False, len(good), len(runs))
    vals = np.array([r.i_inf for r in good])
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else None
    tau = float(np.mean([r.tau for r in good]))
    tau = int(tau) if tau.is_integer() else tau
    return CellResult(coord, params, float(vals.mean()), se, tau, True, len(good), len(runs))


def _cell_task(args):
    return run_cell(*args)


def _map(tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [_cell_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_cell_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


def heatmap(template: Scenario, grid: SweepGrid, threads: int = 1) -> list[CellResult]:
    problems = grid.violations()
    if problems:
        raise ValueError("; ".join(problems))
    tasks = [(template, grid, coord, rates) for coord, rates in grid.cells()]
    results = _map(tasks, threads)
    return sorted(results, key=lambda r: r.coord)


@dataclass(frozen=True)
class CurvePoint:
    r0: float
    seeding: str
    i_inf: Optional[float]
    tau: Optional[int]
    stationary: bool


def _curve_task(args):
    template, r0, gamma, variant, spec = args
    lam = min(r0 * gamma, 1.0)
    s = template.with_(params=template.params.with_(lam=lam, gamma=gamma), infection_seed=spec)
    res = run_scenario(s, stochastic.make_rng(s.rng_seed, variant))
    return CurvePoint(r0, spec.label, res.i_inf, res.tau, res.stationary)


def r0_curve(template: Scenario, r0_values: Sequence[float], seedings: Sequence[SeedingSpec],
             gamma: float = 0.4, threads: int = 1) -> list[CurvePoint]:
    """Stationary fraction and delay for each (r0, seeding) pair.

    r0 is realised at fixed ``gamma`` by setting lam = r0 * gamma.  Each
    seeding variant keeps one RNG stream across r0 values, so a random
    origin stays the same along a curve.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    for r0 in r0_values:
        if r0 < 0 or r0 * gamma > 1.0 + 1e-12:
            raise ValueError(f"r0={r0} needs lambda={r0 * gamma:g}, outside [0,1] at gamma={gamma}")
    tasks = [
        (template, float(r0), gamma, v, spec)
        for r0 in r0_values
        for v, spec in enumerate(seedings)
    ]
    if threads <= 1:
        return [_curve_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_curve_task, tasks))
