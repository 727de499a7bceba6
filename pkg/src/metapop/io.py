"""CSV output, matrix files and the TOML scenario format.

Every file written here starts with a block of ``#`` lines recording the
tool version, a hash of the inputs, the RNG algorithm and the seed.  No
timestamps are recorded, so identical inputs give byte-identical files.

Scenario file schema (all sections optional unless noted)::

    engine   = "deterministic"      # or "stochastic"
    rng_seed = 0

    [mobility]                      # required
    file = "mobility.csv"           # a matrix file, relative to this file
    # or a synthetic matrix:
    synth = "diagonal-dominant"     # identity | uniform | hub | diagonal-dominant
    n = 20
    diag_weight = 0.9
    seed = 0

    [calls]                         # same keys; presence enables awareness

    [population]                    # required
    counts = [1000, 2000]
    # or
    total = 1000000
    split = "equal"                 # or "random"
    seed = 0

    [params]                        # required
    lambda = 0.8
    gamma = 0.4
    omega = 0.0
    psi = 0.0
    xi = 0.0
    horizon = 180

    [infection_seed]
    strategy = "uniform"            # random-single | centrality-top-k | explicit-list
    fraction = 0.001
    k = 1
    centrality = "eigenvector"
    nodes = []

    [awareness_seed]
    fraction = 0.0

    [quarantine]
    nodes = []                      # explicit indices, or
    top_k = 0                       # the top-k nodes of
    centrality = "eigenvector"      # this ranking of the mobility matrix

    [stationarity]
    epsilon = 1e-6
    window = 10
    mode = "relative"               # or "absolute"
    noise_z = 6.0

    [sweep]
    kind = "heatmap"                # or "r0"
    replicas = 1
    # heatmap: a list makes an axis, a number fixes the rate, and the
    # name of another rate ties the two together (psi = "omega").
    omega = [0.0, 0.5, 1.0]
    psi = "omega"
    xi = 0.0
    pairs = [[0.8, 0.4]]            # (lambda, gamma); one file per pair
    # r0 curve:
    r0 = [0.5, 1.0, 2.0]
    gamma = 0.4
    seedings = [{strategy = "uniform"}, {strategy = "random-single"}]
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import math
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .centrality import CentralityRanking, centrality, top_k
from .core import (
    FlowMatrix,
    ModelParams,
    Scenario,
    SeedingSpec,
    Stationarity,
    Trajectory,
    ValidationError,
)
from .ingest import synth_matrix, synth_population
from .stochastic import rng_description

TRAJECTORY_HEADER = ("t", "subpop", "S", "I", "R", "A", "U")
HEATMAP_HEADER = (
    "omega", "psi", "xi", "lambda", "gamma",
    "replica_mean_i_inf", "replica_se_i_inf", "tau", "stationary",
)
R0_HEADER = ("r0", "seeding", "i_inf", "tau", "stationary")
CENTRALITY_HEADER = ("node_id", "score", "rank")


class ConfigError(ValueError):
    """The scenario file is malformed (as opposed to describing an invalid scenario)."""


# ---------------------------------------------------------------------------
# Formatting helpers
# ---------------------------------------------------------------------------


def fmt(value) -> str:
    """CSV field: empty for missing values, round-trip repr for floats."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def metadata_lines(input_hash: str, seed=None, rng: Optional[str] = None, **extra) -> list[str]:
    lines = [
        f"# tool: metapop {__version__}",
        f"# input_sha256: {input_hash}",
        f"# rng: {rng or rng_description()}",
        f"# seed: {'' if seed is None else seed}",
    ]
    lines += [f"# {k}: {v}" for k, v in extra.items()]
    return lines


def write_csv(path, header, rows, meta: list[str]) -> Path:
    buf = _io.StringIO()
    for line in meta:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    path = Path(path)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def data_lines(path):
    """Lines of a file without the ``#`` metadata block."""
    with open(path, encoding="utf-8") as fh:
        return [line for line in fh if not line.startswith("#")]


def sha256_bytes(*parts: bytes) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.hexdigest()


def file_hash(*paths) -> str:
    return sha256_bytes(*(Path(p).read_bytes() for p in paths))


def scenario_hash(s: Scenario) -> str:
    """Hash of everything that determines a run."""
    parts = [
        np.ascontiguousarray(s.mobility.w).tobytes(),
        repr(s.mobility.labels).encode(),
        b"" if s.calls is None else np.ascontiguousarray(s.calls.w).tobytes(),
        np.ascontiguousarray(s.population, dtype=np.int64).tobytes(),
        repr((s.params, s.infection_seed, s.awareness_seed, s.quarantine,
              s.rng_seed, s.engine, s.stationarity)).encode(),
    ]
    return sha256_bytes(*parts)


# ---------------------------------------------------------------------------
# Matrix files
# ---------------------------------------------------------------------------


def write_matrix(path, m: FlowMatrix, meta: list[str]) -> Path:
    return write_csv(path, m.labels, (list(row) for row in m.w), meta)


def read_matrix(path, check: bool = True) -> FlowMatrix:
    rows = list(csv.reader(data_lines(path)))
    rows = [r for r in rows if r]
    if not rows:
        raise ConfigError(f"{path}: empty matrix file")
    labels = tuple(x.strip() for x in rows[0])
    try:
        w = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if w.shape != (len(labels), len(labels)):
        raise ConfigError(f"{path}: expected a {len(labels)}x{len(labels)} matrix, got shape {w.shape}")
    return FlowMatrix(w, labels, check=check)


# ---------------------------------------------------------------------------
# Result files
# ---------------------------------------------------------------------------


def trajectory_rows(traj: Trajectory, labels):
    marg = {k: traj.marginal(k) for k in ("S", "I", "R", "A", "U")}
    for t in range(len(traj)):
        for j, label in enumerate(labels):
            yield [t, label] + [marg[k][t, j] for k in ("S", "I", "R", "A", "U")]


def write_trajectory(path, traj: Trajectory, labels, meta) -> Path:
    return write_csv(path, TRAJECTORY_HEADER, trajectory_rows(traj, labels), meta)


def write_heatmap(path, cells, meta) -> Path:
    rows = (
        [c.params.omega, c.params.psi, c.params.xi, c.params.lam, c.params.gamma,
         c.mean_i_inf, c.se_i_inf, c.tau, c.stationary]
        for c in cells
    )
    return write_csv(path, HEATMAP_HEADER, rows, meta)


def write_r0_curve(path, points, meta) -> Path:
    rows = ([p.r0, p.seeding, p.i_inf, p.tau, p.stationary] for p in points)
    return write_csv(path, R0_HEADER, rows, meta)


def write_centrality(path, ranking: CentralityRanking, labels, meta) -> Path:
    rank = np.empty(len(ranking.ranked), dtype=int)
    rank[ranking.ranked] = np.arange(1, len(ranking.ranked) + 1)
    rows = ([labels[i], ranking.scores[i], rank[i]] for i in range(len(labels)))
    return write_csv(path, CENTRALITY_HEADER, rows, meta)


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------


def _section(cfg: dict, name: str, required: bool = False) -> Optional[dict]:
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing [{name}] section")
        return None
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _check_keys(sec: dict, name: str, allowed) -> None:
    unknown = sorted(set(sec) - set(allowed))
    if unknown:
        raise ConfigError(f"[{name}]: unknown keys {', '.join(unknown)}")


def _matrix_from(sec: dict, name: str, base: Path) -> FlowMatrix:
    _check_keys(sec, name, ("file", "synth", "n", "diag_weight", "seed"))
    if "file" in sec:
        return read_matrix(base / sec["file"], check=False)
    if "synth" not in sec or "n" not in sec:
        raise ConfigError(f"[{name}] needs either file or synth + n")
    return synth_matrix(str(sec["synth"]), int(sec["n"]), float(sec.get("diag_weight", 0.9)), int(sec.get("seed", 0)))


def _population_from(sec: dict, n: int) -> np.ndarray:
    _check_keys(sec, "population", ("counts", "total", "split", "seed"))
    if "counts" in sec:
        return np.asarray(sec["counts"])
    if "total" not in sec:
        raise ConfigError("[population] needs counts or total")
    return synth_population(int(sec["total"]), n, str(sec.get("split", "equal")), int(sec.get("seed", 0)))


def _seeding_from(sec: dict, name: str, default_fraction: float) -> SeedingSpec:
    _check_keys(sec, name, ("strategy", "fraction", "k", "centrality", "nodes"))
    return SeedingSpec(
        strategy=str(sec.get("strategy", "uniform")),
        fraction=float(sec.get("fraction", default_fraction)),
        k=int(sec.get("k", 1)),
        centrality_kind=str(sec.get("centrality", "eigenvector")),
        nodes=tuple(int(x) for x in sec.get("nodes", ())),
    )


def _params_from(sec: dict) -> ModelParams:
    _check_keys(sec, "params", ("lambda", "gamma", "omega", "psi", "xi", "horizon"))
    for key in ("lambda", "gamma"):
        if key not in sec:
            raise ConfigError(f"[params] needs {key}")
    return ModelParams(
        lam=float(sec["lambda"]),
        gamma=float(sec["gamma"]),
        omega=float(sec.get("omega", 0.0)),
        psi=float(sec.get("psi", 0.0)),
        xi=float(sec.get("xi", 0.0)),
        horizon=int(sec.get("horizon", 180)),
    )


def _quarantine_from(sec: dict, mobility: FlowMatrix) -> tuple:
    _check_keys(sec, "quarantine", ("nodes", "top_k", "centrality"))
    nodes = [int(x) for x in sec.get("nodes", ())]
    k = int(sec.get("top_k", 0))
    if k:
        nodes += [x for x in top_k(centrality(mobility, str(sec.get("centrality", "eigenvector"))), k)
                  if x not in nodes]
    return tuple(nodes)


SCENARIO_KEYS = (
    "engine", "rng_seed", "mobility", "calls", "population", "params", "infection_seed",
    "awareness_seed", "quarantine", "stationarity", "sweep",
)


def scenario_from_dict(cfg: dict, base=".") -> Scenario:
    base = Path(base)
    _check_keys(cfg, "top level", SCENARIO_KEYS)
    mobility = _matrix_from(_section(cfg, "mobility", True), "mobility", base)
    calls_sec = _section(cfg, "calls")
    calls = None if calls_sec is None else _matrix_from(calls_sec, "calls", base)
    population = _population_from(_section(cfg, "population", True), mobility.n)
    params = _params_from(_section(cfg, "params", True))

    inf_sec = _section(cfg, "infection_seed") or {}
    aw_sec = _section(cfg, "awareness_seed")
    awareness = None if aw_sec is None else _seeding_from(aw_sec, "awareness_seed", 0.0)
    q_sec = _section(cfg, "quarantine")
    quarantine = () if q_sec is None else _quarantine_from(q_sec, mobility)

    st_sec = _section(cfg, "stationarity") or {}
    _check_keys(st_sec, "stationarity", ("epsilon", "window", "mode", "noise_z"))
    defaults = Stationarity()
    stationarity = Stationarity(
        epsilon=float(st_sec.get("epsilon", defaults.epsilon)),
        window=int(st_sec.get("window", defaults.window)),
        mode=str(st_sec.get("mode", defaults.mode)),
        noise_z=float(st_sec.get("noise_z", defaults.noise_z)),
    )
    return Scenario(
        mobility=mobility,
        params=params,
        population=population,
        infection_seed=_seeding_from(inf_sec, "infection_seed", 0.001),
        calls=calls,
        awareness_seed=awareness,
        quarantine=quarantine,
        rng_seed=int(cfg.get("rng_seed", 0)),
        engine=str(cfg.get("engine", "deterministic")),
        stationarity=stationarity,
    )


def load_config(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_scenario(path) -> tuple[Scenario, dict]:
    """Scenario plus the raw config (whose ``sweep`` table the CLI reads)."""
    cfg = load_config(path)
    try:
        return scenario_from_dict(cfg, Path(path).parent), cfg
    except ValidationError:
        raise
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
