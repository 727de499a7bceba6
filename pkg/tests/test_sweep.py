import numpy as np
import pytest

from conftest import small_scenario

from metapop.core import FlowMatrix, ModelParams, Scenario, SeedingSpec
from metapop.deterministic import run
from metapop.sweep import SweepGrid, heatmap, r0_curve, run_cell, run_scenario


def single_pop(**kw):
    return Scenario(FlowMatrix.identity(1), ModelParams(0.8, 0.4, **kw), [1_000_000], SeedingSpec("uniform", 0.001))


class TestGrid:
    def test_cells_and_links(self):
        g = SweepGrid((("omega", [0.0, 0.5]), ("xi", [0.1, 0.2, 0.3])), fixed={"lambda": 0.6}, links={"psi": "omega"})
        cells = list(g.cells())
        assert g.shape == (2, 3) and len(cells) == 6
        coord, rates = cells[4]
        assert coord == (1, 1)
        assert rates == {"lam": 0.6, "omega": 0.5, "xi": 0.2, "psi": 0.5}

    def test_violations(self):
        g = SweepGrid((("omega", [1.5]), ("omega", [])), links={"psi": "xi"}, replicas=0)
        msgs = " | ".join(g.violations())
        for needle in ("duplicate", "no values", "outside [0,1]", "not an axis", "replicas"):
            assert needle in msgs

    def test_unknown_parameter(self):
        with pytest.raises(ValueError):
            SweepGrid((("beta", [0.1]),))

    def test_invalid_grid_raises(self):
        with pytest.raises(ValueError):
            heatmap(small_scenario(), SweepGrid((("omega", [2.0]),)))


class TestHeatmap:
    def test_single_cell_equals_direct_run(self):
        s = small_scenario(omega=0.2, psi=0.2, xi=0.8)
        g = SweepGrid((("omega", [0.2]),))
        [cell] = heatmap(s, g)
        direct = run(s)
        assert cell.mean_i_inf == direct.i_inf and cell.tau == direct.tau and cell.stationary

    def test_xi_irrelevant_without_information(self):
        s = small_scenario(n=6, lam=0.8, gamma=0.4)
        g = SweepGrid((("omega", [0.0]), ("xi", [0.0, 0.3, 0.9])), links={"psi": "omega"})
        cells = heatmap(s, g)
        assert len({(c.mean_i_inf, c.tau) for c in cells}) == 1

    def test_information_without_immunity_loss_ends_outbreak(self):
        s = small_scenario(n=6, lam=0.8, gamma=0.4)
        g = SweepGrid((("omega", [0.5, 1.0]),), fixed={"xi": 0.0}, links={"psi": "omega"})
        for c in heatmap(s, g):
            assert c.stationary and c.mean_i_inf == 0.0

    def test_non_increasing_in_omega(self):
        s = small_scenario(n=6, lam=0.9, gamma=0.2)
        g = SweepGrid((("omega", np.linspace(0, 1, 11)),), fixed={"psi": 0.3, "xi": 0.5})
        vals = [c.mean_i_inf for c in heatmap(s, g)]
        assert all(v is not None for v in vals)
        assert np.all(np.diff(vals) <= 1e-9)

    def test_stochastic_replicas_and_parallelism(self):
        s = small_scenario(n=4, engine="stochastic")
        g = SweepGrid((("omega", [0.0, 0.5]), ("psi", [0.2, 0.4])), fixed={"xi": 0.0}, replicas=3)
        serial = heatmap(s, g, threads=1)
        parallel = heatmap(s, g, threads=3)
        assert [(c.coord, c.mean_i_inf, c.se_i_inf, c.tau) for c in serial] == \
               [(c.coord, c.mean_i_inf, c.se_i_inf, c.tau) for c in parallel]
        assert all(c.replicas == 3 for c in serial)

    def test_cell_failure_is_recorded(self):
        s = small_scenario(n=4).with_(infection_seed=SeedingSpec("explicit-list", 0.9, nodes=(0,)))
        cell = run_cell(s, SweepGrid((("omega", [0.1]),)), (0,), {"omega": 0.1})
        assert cell.error.startswith("SeedingError") and not cell.stationary


class TestR0Curve:
    def test_below_threshold(self):
        pts = r0_curve(single_pop(), [0.25, 0.5], [SeedingSpec()])
        assert [p.i_inf for p in pts] == [0.0, 0.0]

    def test_fixed_point(self):
        [p] = r0_curve(single_pop(), [2.0], [SeedingSpec()])
        assert p.i_inf == pytest.approx(0.5, abs=1e-6)

    def test_threshold_missing(self):
        [p] = r0_curve(single_pop(), [1.0], [SeedingSpec()])
        assert (p.stationary, p.i_inf, p.tau) == (False, None, None)

    def test_lambda_out_of_range(self):
        with pytest.raises(ValueError):
            r0_curve(single_pop(), [3.0], [SeedingSpec()], gamma=0.4)

    def test_rows_per_combination(self):
        s = small_scenario(n=5, full=False)
        seedings = [SeedingSpec("uniform"), SeedingSpec("random-single"), SeedingSpec("centrality-top-k", k=2)]
        pts = r0_curve(s, [0.5, 2.0], seedings)
        assert [(p.r0, p.seeding) for p in pts] == [
            (r, sd.label) for r in (0.5, 2.0) for sd in seedings
        ]
        assert pts == r0_curve(s, [0.5, 2.0], seedings, threads=2)


def test_run_scenario_dispatch():
    assert run_scenario(small_scenario(engine="stochastic")).meta["engine"] == "stochastic"
    assert run_scenario(small_scenario()).meta["engine"] == "deterministic"
