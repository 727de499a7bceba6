"""Domain types shared by the engines, the intervention tools and the CLI.

Compartment state is stored as *joint cells*: for every subpopulation an
array of shape ``(3, 2)`` indexed by disease state (S, I, R) and awareness
state (U, A).  Both marginal partitions of the population are therefore
exact by construction, and an individual's two labels always travel
together under mobility.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

ROW_TOL = 1e-12
PARTITION_TOL = 1e-9

# disease axis
S, I, R = 0, 1, 2
# awareness axis
UNAWARE, AWARE = 0, 1

COMPARTMENTS = ("S", "I", "R", "A", "U")

SEEDING_STRATEGIES = ("uniform", "random-single", "centrality-top-k", "explicit-list")
CENTRALITY_KINDS = ("degree", "closeness", "betweenness", "eigenvector")
ENGINES = ("deterministic", "stochastic")


class ValidationError(ValueError):
    """Raised when a domain object violates one of its invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# FlowMatrix
# ---------------------------------------------------------------------------


def matrix_violations(w: np.ndarray, tol: float = ROW_TOL) -> list[str]:
    """List the row-stochasticity problems of a candidate flow matrix."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        return [f"matrix not square: shape {w.shape}"]
    if w.shape[0] < 1:
        return ["matrix is empty"]
    out = []
    if not np.all(np.isfinite(w)):
        out.append("matrix has non-finite entries")
        return out
    bad = np.argwhere((w < 0) | (w > 1))
    for i, j in bad[:10]:
        out.append(f"entry ({i},{j}) = {w[i, j]!r} outside [0,1]")
    sums = w.sum(axis=1)
    for i in np.flatnonzero(np.abs(sums - 1.0) > tol):
        out.append(f"row {i} not stochastic (sums to {sums[i]!r})")
    return out


@dataclass(frozen=True, eq=False)
class FlowMatrix:
    """Square row-stochastic matrix of per-step flow probabilities.

    ``w[i, j]`` is the probability that flow (a move, or a call) that
    originates at subpopulation ``i`` is directed to ``j``.

    Construction validates the matrix; pass ``check=False`` only to build a
    deliberately broken instance for :func:`validate_scenario`.
    """

    w: np.ndarray
    labels: tuple = ()
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        labels = tuple(str(x) for x in self.labels) if len(self.labels) else ()
        if not labels and w.ndim == 2:
            labels = tuple(str(i) for i in range(w.shape[0]))
        object.__setattr__(self, "w", _readonly(w))
        object.__setattr__(self, "labels", labels)
        if self.check:
            problems = self.violations()
            if problems:
                raise ValidationError(problems)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def violations(self) -> list[str]:
        out = matrix_violations(self.w)
        if self.w.ndim == 2 and len(self.labels) != self.w.shape[0]:
            out.append(f"{len(self.labels)} labels for {self.w.shape[0]} rows")
        elif len(set(self.labels)) != len(self.labels):
            out.append("labels not unique")
        return out

    @classmethod
    def from_weights(cls, weights, labels=()) -> "FlowMatrix":
        """Normalise nonnegative row weights; empty rows become absorbing."""
        w = np.array(weights, dtype=float)
        sums = w.sum(axis=1)
        empty = sums <= 0
        w[~empty] /= sums[~empty, None]
        idx = np.flatnonzero(empty)
        w[idx] = 0.0
        w[idx, idx] = 1.0
        # renormalise again: one division can leave the row sum off by an ulp or two
        w /= w.sum(axis=1, keepdims=True)
        return cls(w, labels)

    @classmethod
    def identity(cls, n: int, labels=()) -> "FlowMatrix":
        return cls(np.eye(n), labels)

    def equals(self, other: "FlowMatrix", tol: float = 0.0) -> bool:
        return (
            self.labels == other.labels
            and self.w.shape == other.w.shape
            and bool(np.all(np.abs(self.w - other.w) <= tol))
        )


# ---------------------------------------------------------------------------
# CompartmentState
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CompartmentState:
    """Per-subpopulation joint (disease x awareness) counts.

    ``cells`` has shape ``(n, 3, 2)``.  Integer dtype means the stochastic
    representation (individual counts); floating dtype means expected
    masses.
    """

    cells: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cells)
        if c.ndim != 3 or c.shape[1:] != (3, 2):
            raise ValidationError(f"cells must have shape (n, 3, 2), got {c.shape}")
        if np.issubdtype(c.dtype, np.integer):
            c = c.astype(np.int64, copy=False)
        else:
            c = c.astype(float, copy=False)
            if not np.all(np.isfinite(c)):
                raise ValidationError("compartment values must be finite")
        if np.any(c < 0):
            i, d, a = np.argwhere(c < 0)[0]
            raise ValidationError(
                f"negative compartment value {c[i, d, a]!r} in subpopulation {i}"
            )
        object.__setattr__(self, "cells", _readonly(c))

    @classmethod
    def from_marginals(cls, S_, I_, R_, A_, U_) -> "CompartmentState":
        """Build a state from the five marginal vectors.

        The marginals do not say how awareness is spread over the disease
        states, so aware individuals are allocated proportionally to the
        disease compartments (largest remainder for integer input).
        """
        arrs = [np.atleast_1d(np.asarray(x)) for x in (S_, I_, R_, A_, U_)]
        integer = all(np.issubdtype(a.dtype, np.integer) for a in arrs)
        S_, I_, R_, A_, U_ = (a.astype(np.int64 if integer else float) for a in arrs)
        n = S_.shape[0]
        if any(a.shape != (n,) for a in (I_, R_, A_, U_)):
            raise ValidationError("marginal vectors must share one length")
        for name, a in zip(COMPARTMENTS, (S_, I_, R_, A_, U_)):
            if np.any(a < 0):
                raise ValidationError(f"negative {name} value")
        dis = np.stack([S_, I_, R_], axis=1)
        N = dis.sum(axis=1)
        gap = N - (A_ + U_)
        if integer:
            if np.any(gap != 0):
                i = int(np.flatnonzero(gap)[0])
                raise ValidationError(f"partition mismatch in subpopulation {i}: S+I+R != A+U")
        elif np.any(np.abs(gap) > PARTITION_TOL):
            i = int(np.flatnonzero(np.abs(gap) > PARTITION_TOL)[0])
            raise ValidationError(f"partition mismatch in subpopulation {i}: |S+I+R - (A+U)| > {PARTITION_TOL}")

        cells = np.zeros((n, 3, 2), dtype=dis.dtype)
        if integer:
            for i in range(n):
                cells[i, :, AWARE] = largest_remainder(int(A_[i]), dis[i])
        else:
            share = np.divide(A_, N, out=np.zeros(n), where=N > 0)
            cells[:, :, AWARE] = dis * share[:, None]
        cells[:, :, UNAWARE] = dis - cells[:, :, AWARE]
        cells = np.maximum(cells, 0)
        return cls(cells)

    @classmethod
    def susceptible(cls, population, infected=None) -> "CompartmentState":
        """Everyone unaware; ``infected`` of each subpopulation infected."""
        pop = np.asarray(population)
        inf = np.zeros_like(pop) if infected is None else np.asarray(infected)
        if np.any(inf > pop):
            raise ValidationError("more infected than population")
        dtype = np.result_type(pop.dtype, inf.dtype)
        cells = np.zeros((pop.shape[0], 3, 2), dtype=dtype)
        cells[:, S, UNAWARE] = pop - inf
        cells[:, I, UNAWARE] = inf
        return cls(cells)

    @property
    def n(self) -> int:
        return self.cells.shape[0]

    @property
    def integer(self) -> bool:
        return np.issubdtype(self.cells.dtype, np.integer)

    @property
    def S(self) -> np.ndarray:
        return self.cells[:, S, :].sum(axis=1)

    @property
    def I(self) -> np.ndarray:  # noqa: E743
        return self.cells[:, I, :].sum(axis=1)

    @property
    def R(self) -> np.ndarray:
        return self.cells[:, R, :].sum(axis=1)

    @property
    def A(self) -> np.ndarray:
        return self.cells[:, :, AWARE].sum(axis=1)

    @property
    def U(self) -> np.ndarray:
        return self.cells[:, :, UNAWARE].sum(axis=1)

    @property
    def N(self) -> np.ndarray:
        return self.cells.sum(axis=(1, 2))

    def marginals(self) -> dict[str, np.ndarray]:
        return {"S": self.S, "I": self.I, "R": self.R, "A": self.A, "U": self.U}

    def as_float(self) -> "CompartmentState":
        return self if not self.integer else CompartmentState(self.cells.astype(float))


def largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    """Split the integer ``total`` proportionally to ``weights``, exactly."""
    weights = np.asarray(weights, dtype=float)
    if total == 0 or weights.sum() == 0:
        return np.zeros(weights.shape, dtype=np.int64)
    exact = total * weights / weights.sum()
    base = np.floor(exact).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:short]] += 1
    return base


# ---------------------------------------------------------------------------
# Parameters and scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Per-step transition rates.

    lam:   infection rate (contact rate x contagion probability)
    gamma: recovery rate, I -> S
    omega: immunisation rate on information contact, S -> R
    psi:   awareness adoption rate on information contact, U -> A
    xi:    immunity loss rate, R -> S
    """

    lam: float
    gamma: float
    omega: float = 0.0
    psi: float = 0.0
    xi: float = 0.0
    horizon: int = 180

    RATES = ("lam", "gamma", "omega", "psi", "xi")

    @property
    def r0(self) -> float:
        return self.lam / self.gamma if self.gamma > 0 else float("inf")

    def violations(self) -> list[str]:
        out = []
        for name in self.RATES:
            v = getattr(self, name)
            label = "lambda" if name == "lam" else name
            if not (isinstance(v, (int, float, np.floating, np.integer)) and 0.0 <= v <= 1.0):
                out.append(f"{label} out of [0,1]: {v!r}")
        if not (isinstance(self.horizon, (int, np.integer)) and self.horizon >= 1):
            out.append(f"horizon must be an integer >= 1: {self.horizon!r}")
        return out

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class SeedingSpec:
    """How an initial infected (or aware) fraction is placed."""

    strategy: str = "uniform"
    fraction: float = 0.001
    k: int = 1
    centrality_kind: str = "eigenvector"
    nodes: tuple = ()

    def violations(self) -> list[str]:
        out = []
        if self.strategy not in SEEDING_STRATEGIES:
            out.append(f"unknown seeding strategy {self.strategy!r}")
        if not (0.0 <= self.fraction <= 1.0):
            out.append(f"seeding fraction out of [0,1]: {self.fraction!r}")
        if self.strategy == "centrality-top-k":
            if self.k < 1:
                out.append(f"k must be >= 1 for centrality-top-k, got {self.k}")
            if self.centrality_kind not in CENTRALITY_KINDS:
                out.append(f"unknown centrality kind {self.centrality_kind!r}")
        if self.strategy == "explicit-list" and not self.nodes:
            out.append("explicit-list seeding needs at least one node")
        return out

    @property
    def label(self) -> str:
        if self.strategy == "centrality-top-k":
            return f"{self.centrality_kind}-top-{self.k}"
        if self.strategy == "explicit-list":
            return "explicit-" + "-".join(str(x) for x in self.nodes)
        return self.strategy


@dataclass(frozen=True)
class Stationarity:
    """Settings for stationary-state detection on the global infected fraction."""

    epsilon: float = 1e-6
    window: int = 10
    mode: str = "relative"
    noise_z: float = 6.0


@dataclass(frozen=True, eq=False)
class Scenario:
    mobility: FlowMatrix
    params: ModelParams
    population: np.ndarray
    infection_seed: SeedingSpec = SeedingSpec()
    calls: Optional[FlowMatrix] = None
    awareness_seed: Optional[SeedingSpec] = None
    quarantine: tuple = ()
    rng_seed: int = 0
    engine: str = "deterministic"
    stationarity: Stationarity = Stationarity()

    def __post_init__(self):
        object.__setattr__(self, "population", _readonly(np.asarray(self.population)))
        object.__setattr__(self, "quarantine", tuple(int(q) for q in self.quarantine))

    @property
    def n(self) -> int:
        return self.mobility.n

    @property
    def full_model(self) -> bool:
        return self.calls is not None

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)


def validate_scenario(s: Scenario) -> list[str]:
    """Return every invariant violation in ``s``; an empty list means valid."""
    out = []
    out += [f"mobility: {v}" for v in s.mobility.violations()]
    if s.calls is not None:
        out += [f"calls: {v}" for v in s.calls.violations()]
        if s.calls.w.shape != s.mobility.w.shape:
            out.append("calls and mobility matrices differ in size")
        elif s.calls.labels != s.mobility.labels:
            out.append("calls and mobility labels differ")
    out += s.params.violations()

    pop = np.asarray(s.population)
    if pop.ndim != 1 or pop.shape[0] != s.mobility.w.shape[0]:
        out.append(f"population has {pop.size} entries for {s.mobility.w.shape[0]} subpopulations")
    elif not np.issubdtype(pop.dtype, np.number) or np.any(pop < 0):
        out.append("population counts must be nonnegative")
    elif np.any(pop != np.round(pop)):
        out.append("population counts must be whole numbers")

    out += [f"infection seed: {v}" for v in s.infection_seed.violations()]
    if s.awareness_seed is not None:
        out += [f"awareness seed: {v}" for v in s.awareness_seed.violations()]
    n = s.mobility.w.shape[0]
    if s.infection_seed.strategy == "centrality-top-k" and s.infection_seed.k > n:
        out.append(f"infection seed: k={s.infection_seed.k} exceeds {n} subpopulations")
    for node in s.infection_seed.nodes:
        if not 0 <= node < n:
            out.append(f"infection seed: node {node} out of range")

    if len(set(s.quarantine)) != len(s.quarantine):
        out.append("quarantine indices not distinct")
    for q in s.quarantine:
        if not 0 <= q < n:
            out.append(f"quarantine index {q} out of range")

    if s.engine not in ENGINES:
        out.append(f"unknown engine {s.engine!r}")
    st = s.stationarity
    if not st.epsilon > 0:
        out.append("stationarity epsilon must be positive")
    if st.window < 1:
        out.append("stationarity window must be >= 1")
    if st.mode not in ("absolute", "relative"):
        out.append(f"unknown stationarity mode {st.mode!r}")
    return out


def require_valid(s: Scenario) -> None:
    problems = validate_scenario(s)
    if problems:
        raise ValidationError(problems)


# ---------------------------------------------------------------------------
# Run output
# ---------------------------------------------------------------------------


class Trajectory:
    """Stacked joint cells over time, shape ``(T + 1, n, 3, 2)``."""

    def __init__(self, cells: np.ndarray):
        self.cells = _readonly(cells)

    def __len__(self) -> int:
        return self.cells.shape[0]

    @property
    def steps(self) -> int:
        return self.cells.shape[0] - 1

    def state(self, t: int) -> CompartmentState:
        return CompartmentState(self.cells[t])

    def marginal(self, name: str) -> np.ndarray:
        """Array of shape ``(T + 1, n)`` for one of S, I, R, A, U."""
        c = self.cells
        if name in ("S", "I", "R"):
            return c[:, :, "SIR".index(name), :].sum(axis=-1)
        if name == "A":
            return c[:, :, :, AWARE].sum(axis=-1)
        if name == "U":
            return c[:, :, :, UNAWARE].sum(axis=-1)
        raise KeyError(name)

    @property
    def total_population(self) -> np.ndarray:
        return self.cells.sum(axis=(1, 2, 3))

    @property
    def infected_fraction(self) -> np.ndarray:
        N = self.total_population.astype(float)
        I_ = self.marginal("I").sum(axis=1).astype(float)
        return np.divide(I_, N, out=np.zeros_like(I_), where=N > 0)


@dataclass(frozen=True, eq=False)
class RunSummary:
    stationary: bool
    tau: Optional[int]
    i_inf: Optional[float]
    trajectory: Trajectory
    r0: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stationary:
            if self.tau is None or self.i_inf is None:
                raise ValidationError("stationary run needs tau and i_inf")
            if not 0.0 <= self.i_inf <= 1.0:
                raise ValidationError(f"i_inf out of [0,1]: {self.i_inf}")
            if self.tau > self.trajectory.steps:
                raise ValidationError("tau beyond horizon")
        elif self.tau is not None or self.i_inf is not None:
            raise ValidationError("tau and i_inf are only defined for stationary runs")

    def line(self) -> str:
        fmt = lambda v: "" if v is None else f"{v:.10g}"  # noqa: E731
        return (
            f"i_inf={fmt(self.i_inf)},tau={'' if self.tau is None else self.tau},"
            f"stationary={str(self.stationary).lower()},r0={self.r0:.6g}"
        )

