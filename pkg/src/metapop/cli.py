"""Command-line entry point: ``metapop <subcommand> ...``.

Exit status is 0 on success, 1 when the scenario (or a matrix) fails
validation and 2 for I/O, configuration or usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from . import io as mio
from .centrality import ConvergenceError, centrality
from .core import CENTRALITY_KINDS, ENGINES, SeedingSpec, ValidationError, validate_scenario
from .ingest import (
    SYNTH_KINDS,
    IngestError,
    build_calls_matrix,
    build_mobility_matrix,
    infer_n,
    read_call_records,
    read_trajectory_records,
    synth_matrix,
)
from .interventions import SeedingError
from .stochastic import make_rng
from .sweep import SweepGrid, heatmap, r0_curve, run_scenario

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
RATE_KEYS = ("omega", "psi", "xi")


def _scenario(args):
    s, cfg = mio.load_scenario(args.scenario)
    overrides = {}
    if getattr(args, "engine", None):
        overrides["engine"] = args.engine
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    return (s.with_(**overrides) if overrides else s), cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args) -> int:
    s, _ = _scenario(args)
    problems = validate_scenario(s)
    if problems:
        for p in problems:
            print(p)
        return EXIT_INVALID
    print("OK")
    return EXIT_OK


def cmd_run(args) -> int:
    s, _ = _scenario(args)
    out = _outdir(args)
    digest = mio.scenario_hash(s)
    replicas = args.replicas or 1
    if replicas > 1 and s.engine != "stochastic":
        raise ValidationError(["replicas > 1 need the stochastic engine"])
    for r in range(replicas):
        rng = make_rng(s.rng_seed, r) if replicas > 1 else None
        res = run_scenario(s, rng)
        name = "trajectory.csv" if replicas == 1 else f"trajectory_{r:04d}.csv"
        meta = mio.metadata_lines(digest, s.rng_seed, engine=s.engine, replica=r, summary=res.line())
        mio.write_trajectory(out / name, res.trajectory, s.mobility.labels, meta)
        print(res.line())
    return EXIT_OK


def _heatmap_grid(sweep: dict, replicas: int) -> SweepGrid:
    axes, fixed, links = [], {}, {}
    for key in RATE_KEYS:
        v = sweep.get(key, 0.0)
        if isinstance(v, list):
            axes.append((key, v))
        elif isinstance(v, str):
            links[key] = v
        else:
            fixed[key] = v
    return SweepGrid(tuple(axes), fixed, links, replicas)


def cmd_sweep(args) -> int:
    s, cfg = _scenario(args)
    sweep = dict(cfg.get("sweep") or {})
    if not sweep:
        raise mio.ConfigError(f"{args.scenario}: no [sweep] section")
    problems = validate_scenario(s)
    if problems:
        raise ValidationError(problems)
    out = _outdir(args)
    replicas = args.replicas or int(sweep.get("replicas", 1))
    digest = mio.scenario_hash(s)
    meta = mio.metadata_lines(digest, s.rng_seed, engine=s.engine, replicas=replicas)
    kind = sweep.get("kind", "heatmap")

    if kind == "r0":
        seedings = [
            mio._seeding_from(x, "sweep.seedings", s.infection_seed.fraction)
            for x in sweep.get("seedings", [{}])
        ] or [SeedingSpec()]
        points = r0_curve(s, [float(x) for x in sweep["r0"]], seedings,
                          float(sweep.get("gamma", 0.4)), args.threads)
        path = mio.write_r0_curve(out / "r0_curve.csv", points, meta)
        print(path)
        return EXIT_OK
    if kind != "heatmap":
        raise mio.ConfigError(f"unknown sweep kind {kind!r}")

    grid = _heatmap_grid(sweep, replicas)
    pairs = sweep.get("pairs") or [[s.params.lam, s.params.gamma]]
    failed = 0
    for lam, gamma in pairs:
        template = s.with_(params=s.params.with_(lam=float(lam), gamma=float(gamma)))
        cells = heatmap(template, grid, args.threads)
        failed += sum(1 for c in cells if c.error)
        name = "heatmap.csv" if len(pairs) == 1 else f"heatmap_lambda{lam:g}_gamma{gamma:g}.csv"
        print(mio.write_heatmap(out / name, cells, meta))
    if failed:
        print(f"{failed} sweep cells failed", file=sys.stderr)
    return EXIT_OK


def cmd_centrality(args) -> int:
    if args.matrix:
        m = mio.read_matrix(args.matrix)
        digest = mio.file_hash(args.matrix)
    else:
        s, _ = _scenario(args)
        m = s.mobility
        digest = mio.scenario_hash(s)
    out = _outdir(args)
    kinds = CENTRALITY_KINDS if args.kind == "all" else (args.kind,)
    for kind in kinds:
        ranking = centrality(m, kind)
        meta = mio.metadata_lines(digest, None, rng="none", kind=kind)
        print(mio.write_centrality(out / f"centrality_{kind}.csv", ranking, m.labels, meta))
    return EXIT_OK


def cmd_build_matrix(args) -> int:
    if args.calls:
        records = read_call_records(args.calls)
        n = args.n or infer_n([x for r in records for x in (r.origin, r.destination)])
        m = build_calls_matrix(records, n)
        src = args.calls
    else:
        records = read_trajectory_records(args.trajectories)
        n = args.n or infer_n(r.location for r in records)
        m = build_mobility_matrix(records, n, max_gap=args.max_gap)
        src = args.trajectories
    out = _outdir(args)
    meta = mio.metadata_lines(mio.file_hash(src), None, rng="none", max_gap=args.max_gap)
    print(mio.write_matrix(out / args.name, m, meta))
    return EXIT_OK


def cmd_synth(args) -> int:
    m = synth_matrix(args.kind, args.n, args.diag_weight, args.seed)
    out = _outdir(args)
    desc = f"{args.kind},{args.n},{args.diag_weight!r},{args.seed}".encode()
    meta = mio.metadata_lines(mio.sha256_bytes(desc), args.seed, rng="numpy default_rng (PCG64)")
    print(mio.write_matrix(out / args.name, m, meta))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="metapop", description="Metapopulation epidemic simulator.")
    p.add_argument("--version", action="version", version=f"metapop {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp, required=True):
        sp.add_argument("--scenario", required=required, help="TOML scenario file")
        sp.add_argument("--engine", choices=ENGINES)
        sp.add_argument("--seed", type=int, help="override rng_seed")

    sp = sub.add_parser("validate", help="check a scenario file")
    scenario_args(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("run", help="simulate one scenario")
    scenario_args(sp)
    sp.add_argument("--out", default=".")
    sp.add_argument("--replicas", type=int)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="heatmap or r0 curve from the [sweep] section")
    scenario_args(sp)
    sp.add_argument("--out", default=".")
    sp.add_argument("--replicas", type=int)
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("centrality", help="rank the subpopulations of a matrix")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", help="matrix CSV file")
    src.add_argument("--scenario", help="use the scenario's mobility matrix")
    sp.add_argument("--kind", choices=CENTRALITY_KINDS + ("all",), default="all")
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=cmd_centrality, engine=None, seed=None)

    sp = sub.add_parser("build-matrix", help="aggregate event records into a matrix file")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--calls", help="CSV with origin_id,destination_id,call_count")
    src.add_argument("--trajectories", help="CSV with user_id,timestamp,location_id")
    sp.add_argument("--n", type=int, help="number of subpopulations (default: largest id + 1)")
    sp.add_argument("--max-gap", type=int, help="drop transitions between records further apart")
    sp.add_argument("--out", default=".")
    sp.add_argument("--name", default="matrix.csv")
    sp.set_defaults(func=cmd_build_matrix)

    sp = sub.add_parser("synth", help="write a synthetic matrix")
    sp.add_argument("--kind", choices=SYNTH_KINDS, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--diag-weight", type=float, default=0.9)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=".")
    sp.add_argument("--name", default="matrix.csv")
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OSError, mio.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, SeedingError, IngestError, ConvergenceError, ValueError, IndexError) as exc:
        problems = getattr(exc, "violations", None) or [str(exc)]
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        return EXIT_INVALID

if __name__ == "__main__":
    sys.exit(main())
