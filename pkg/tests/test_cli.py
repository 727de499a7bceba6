import csv
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from metapop import io as mio
from metapop.cli import main
from metapop.core import FlowMatrix
from metapop.ingest import synth_matrix

BASE = """
[mobility]
synth = "diagonal-dominant"
n = 6
seed = 1

[population]
total = 60000
split = "random"
seed = 2

[params]
lambda = 0.8
gamma = 0.4
"""


def write(tmp_path, text, name="scenario.toml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text), encoding="utf-8")
    return p


def rows(path):
    return list(csv.reader(mio.data_lines(path)))


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", "--scenario", str(write(tmp_path, BASE))]) == 0
    assert capsys.readouterr().out.strip() == "OK"


def test_validate_reports_violations(tmp_path, capsys):
    p = write(tmp_path, BASE.replace("lambda = 0.8", "lambda = 1.5"))
    assert main(["validate", "--scenario", str(p)]) == 1
    assert "lambda out of [0,1]" in capsys.readouterr().out


def test_run_zero_seed(tmp_path, capsys):
    p = write(tmp_path, BASE + "\n[infection_seed]\nfraction = 0.0\n")
    assert main(["run", "--scenario", str(p), "--out", str(tmp_path / "out")]) == 0
    assert capsys.readouterr().out.startswith("i_inf=0,tau=0")
    traj = rows(tmp_path / "out" / "trajectory.csv")
    assert traj[0] == ["t", "subpop", "S", "I", "R", "A", "U"]
    assert len(traj) == 1 + 181 * 6


def test_run_stochastic_is_byte_identical(tmp_path, capsys):
    p = write(tmp_path, BASE)
    for d in ("a", "b"):
        assert main(["run", "--scenario", str(p), "--engine", "stochastic", "--seed", "42",
                     "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
    head = a.decode().splitlines()[:4]
    assert head[0].startswith("# tool: metapop") and "PCG64" in head[2] and head[3] == "# seed: 42"


def test_run_replicas(tmp_path, capsys):
    p = write(tmp_path, BASE)
    assert main(["run", "--scenario", str(p), "--engine", "stochastic", "--replicas", "2",
                 "--out", str(tmp_path)]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2
    assert (tmp_path / "trajectory_0001.csv").exists()
    assert main(["run", "--scenario", str(p), "--replicas", "2", "--out", str(tmp_path)]) == 1


@pytest.mark.slow
def test_sweep_heatmap_grid(tmp_path, capsys):
    grid = ", ".join(f"{v / 10:.1f}" for v in range(11))
    p = write(tmp_path, BASE + textwrap.dedent(f"""
        [calls]
        synth = "diagonal-dominant"
        n = 6
        diag_weight = 0.6
        seed = 3

        [awareness_seed]
        fraction = 0.01

        [sweep]
        omega = [{grid}]
        psi = [{grid}]
        xi = 0.5
        pairs = [[0.5, 0.5], [0.8, 0.4], [0.8, 0.2], [1.0, 0.1]]
        """))
    out = tmp_path / "sweep"
    assert main(["sweep", "--scenario", str(p), "--out", str(out), "--threads", "2"]) == 0
    files = sorted(out.glob("heatmap_*.csv"))
    assert len(files) == 4
    for f in files:
        r = rows(f)
        assert r[0] == ["omega", "psi", "xi", "lambda", "gamma", "replica_mean_i_inf",
                        "replica_se_i_inf", "tau", "stationary"]
        assert len(r) == 1 + 121
    first = files[0].read_bytes()
    assert main(["sweep", "--scenario", str(p), "--out", str(out), "--threads", "1"]) == 0
    assert files[0].read_bytes() == first


def test_sweep_r0_curve(tmp_path, capsys):
    p = write(tmp_path, BASE + textwrap.dedent("""
        [sweep]
        kind = "r0"
        r0 = [0.5, 1.0, 2.0]
        seedings = [{strategy = "uniform"}, {strategy = "centrality-top-k", k = 2, centrality = "degree"}]
        """))
    assert main(["sweep", "--scenario", str(p), "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / "r0_curve.csv")
    assert r[0] == ["r0", "seeding", "i_inf", "tau", "stationary"]
    assert len(r) == 1 + 6
    by_r0 = {(row[0], row[1]): row for row in r[1:]}
    assert by_r0[("1.0", "uniform")][2:] == ["", "", "false"]
    assert by_r0[("0.5", "degree-top-2")][2] == "0.0"


def test_sweep_needs_section(tmp_path, capsys):
    assert main(["sweep", "--scenario", str(write(tmp_path, BASE)), "--out", str(tmp_path)]) == 2


def test_build_matrix_round_trip(tmp_path, capsys):
    rng = np.random.default_rng(0)
    calls = tmp_path / "calls.csv"
    lines = ["origin_id,destination_id,call_count"]
    lines += [f"{rng.integers(7)},{rng.integers(7)},{rng.integers(1, 90)}" for _ in range(300)]
    calls.write_text("\n".join(lines) + "\n", encoding="utf-8")
    assert main(["build-matrix", "--calls", str(calls), "--n", "7", "--out", str(tmp_path)]) == 0
    from metapop.ingest import build_calls_matrix, read_call_records

    want = build_calls_matrix(read_call_records(calls), 7)
    got = mio.read_matrix(tmp_path / "matrix.csv")
    assert got.equals(want, 1e-12)


def test_build_mobility_matrix(tmp_path, capsys):
    moves = tmp_path / "moves.csv"
    moves.write_text("user_id,timestamp,location_id\nu,0,0\nu,1,1\nu,9,0\n", encoding="utf-8")
    assert main(["build-matrix", "--trajectories", str(moves), "--max-gap", "5", "--out", str(tmp_path)]) == 0
    np.testing.assert_array_equal(mio.read_matrix(tmp_path / "matrix.csv").w, [[0, 1], [0, 1]])


def test_build_matrix_bad_records(tmp_path, capsys):
    moves = tmp_path / "moves.csv"
    moves.write_text("user_id,timestamp,location_id\nu,5,0\nu,1,1\n", encoding="utf-8")
    assert main(["build-matrix", "--trajectories", str(moves), "--out", str(tmp_path)]) == 1
    assert "'u'" in capsys.readouterr().err


def test_synth_and_centrality(tmp_path, capsys):
    assert main(["synth", "--kind", "hub", "--n", "12", "--seed", "4", "--out", str(tmp_path)]) == 0
    m = mio.read_matrix(tmp_path / "matrix.csv")
    assert m.equals(synth_matrix("hub", 12, 0.9, 4), 0.0)
    assert main(["centrality", "--matrix", str(tmp_path / "matrix.csv"), "--out", str(tmp_path)]) == 0
    for kind in ("degree", "closeness", "betweenness", "eigenvector"):
        r = rows(tmp_path / f"centrality_{kind}.csv")
        assert r[0] == ["node_id", "score", "rank"]
        assert sorted(int(x[2]) for x in r[1:]) == list(range(1, 13))
        assert next(x for x in r[1:] if x[2] == "1")[0] == "0"


def test_matrix_file_keeps_labels(tmp_path):
    m = FlowMatrix([[0.25, 0.75], [0.1, 0.9]], ("north", "south"))
    mio.write_matrix(tmp_path / "m.csv", m, mio.metadata_lines("x"))
    assert mio.read_matrix(tmp_path / "m.csv").equals(m, 0.0)


def test_scenario_file_relative_matrix(tmp_path, capsys):
    sub = tmp_path / "data"
    sub.mkdir()
    mio.write_matrix(sub / "mob.csv", synth_matrix("uniform", 3), [])
    p = write(tmp_path, """
        rng_seed = 9
        [mobility]
        file = "data/mob.csv"
        [population]
        counts = [100, 200, 300]
        [params]
        lambda = 0.5
        gamma = 0.25
        horizon = 30
        [quarantine]
        top_k = 1
        centrality = "degree"
        [stationarity]
        mode = "absolute"
        """)
    s, _ = mio.load_scenario(p)
    assert s.n == 3 and s.rng_seed == 9 and s.quarantine == (0,)
    assert s.params.horizon == 30 and s.stationarity.mode == "absolute"


@pytest.mark.parametrize("text, code", [
    ("[mobility]\nsynth = 'uniform'\nn = 2\n", 2),            # missing sections
    (BASE + "\n[params.extra]\n", 2),                           # unknown key
    (BASE.replace("n = 6", "n = 6\ncolour = 'red'"), 2),
    ("this is not toml", 2),
    (BASE.replace("total = 60000", "counts = [1, 2]"), 1),     # wrong population length
])
def test_config_errors(tmp_path, capsys, text, code):
    assert main(["validate", "--scenario", str(write(tmp_path, text))]) == code


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["run", "--bogus"]) == 2
    assert main(["validate", "--scenario", "/nonexistent/x.toml"]) == 2


def test_module_entry_point(tmp_path):
    p = write(tmp_path, BASE)
    out = subprocess.run([sys.executable, "-m", "metapop", "validate", "--scenario", str(p)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "OK"
