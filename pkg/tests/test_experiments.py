import numpy as np
import pytest

from gossipavg import experiments as xp
from gossipavg.gossip import AlgoParams
from gossipavg.graphs import build_named_graph
from gossipavg.meansquare import bias
from gossipavg.seeds import SeedPolicy

BGA = AlgoParams("bga", 0.5)
CBGA_RING = AlgoParams("cbga", 0.5, 1.0 / 3.0)


class TestSweep:
    def test_complete_monotone_tradeoff(self):
        g = build_named_graph("complete", [30])
        res = xp.sweep_tradeoff(g, "bga", np.arange(0.1, 0.95, 0.1))
        rates = [r["rate"] for r in res.rows()]
        trbs = [r["trB"] for r in res.rows()]
        assert np.all(np.diff(rates) < 0)
        assert np.all(np.diff(trbs) > 0)
        assert res.monotone_rate_decreasing_in_q is True
        assert res.monotone_trB_increasing_in_q is True

    def test_ring_monotone_tradeoff(self):
        g = build_named_graph("ring", [30])
        res = xp.sweep_tradeoff(g, "bga", np.arange(0.1, 0.85, 0.1))
        assert res.monotone_rate_decreasing_in_q is True
        assert res.monotone_trB_increasing_in_q is True

    def test_ring_wide_grid_nonmonotone_recorded(self):
        # the exact small-ring rate turns back up as q -> 1, and the sweep
        # records that instead of papering over it
        g = build_named_graph("ring", [12])
        res = xp.sweep_tradeoff(g, "bga", np.arange(0.1, 0.95, 0.1))
        assert res.monotone_rate_decreasing_in_q is False
        assert res.monotone_trB_increasing_in_q is True

    def test_cbga_complete_trB_constant_in_p(self):
        g = build_named_graph("complete", [12])
        res = xp.sweep_tradeoff(g, "cbga", [0.5], np.arange(0.05, 0.85, 0.1))
        trbs = [r["trB"] for r in res.rows()]
        assert max(trbs) - min(trbs) < 1e-10

    def test_cbga_ring_rate_dips_near_one_third(self):
        g = build_named_graph("ring", [30])
        ps = np.arange(0.05, 1.0, 0.05)
        res = xp.sweep_tradeoff(g, "cbga", [0.5], ps)
        rates = [r["rate"] for r in res.rows()]
        assert abs(ps[int(np.argmin(rates))] - 1.0 / 3.0) < 0.05 + 1e-12

    def test_grid_validation(self):
        g = build_named_graph("ring", [10])
        with pytest.raises(ValueError):
            xp.sweep_tradeoff(g, "bga", [0.5, 0.4])
        with pytest.raises(ValueError):
            xp.sweep_tradeoff(g, "bga", [0.0, 0.5])
        with pytest.raises(ValueError):
            xp.sweep_tradeoff(g, "cbga", [0.5])
        with pytest.raises(ValueError):
            xp.sweep_tradeoff(g, "bga", [0.3, 0.5], [0.2])


class TestScaling:
    def test_ring_bga_slopes(self):
        res = xp.scaling_study("ring", BGA, [64, 91, 128, 181, 256])
        assert res.fits["one_minus_R"]["slope"] == pytest.approx(-3.0, abs=0.15)
        assert res.fits["trB"]["slope"] == pytest.approx(-1.0, abs=0.15)
        assert res.fits["one_minus_R"]["r2"] > 0.999

    def test_ring_cbga_slopes(self):
        res = xp.scaling_study("ring", CBGA_RING, [64, 91, 128, 181, 256])
        assert res.fits["one_minus_R"]["slope"] == pytest.approx(-2.0, abs=0.15)
        assert res.fits["trB"]["slope"] == pytest.approx(-1.0, abs=0.15)

    def test_complete_flat_bias(self):
        res = xp.scaling_study("complete", BGA, [20, 40, 80])
        assert abs(res.fits["trB"]["slope"]) < 0.05
        for r, n in zip(res.rates, res.n_values):
            assert r == pytest.approx(0.25, abs=1e-9)

    def test_torus_rows(self):
        res = xp.scaling_study("torus", BGA, [3, 5, 7])
        assert res.n_values == [9, 25, 49]
        assert all(0 < r < 1 for r in res.rates)
        assert all(t > 0 for t in res.trBs)

    def test_lattice_family_with_fixed_generators(self):
        res = xp.scaling_study(
            "cayley", BGA, [1, 2, 3], dims=1, generators=[(1,), (-1,)]
        )
        ring = xp.scaling_study("ring", BGA, [15])  # n=7 window -> Z_15
        assert res.n_values == [3, 5, 7]
        res2 = xp.scaling_study("cayley", BGA, [7], dims=1, generators=[(1,), (-1,)])
        assert res2.trBs[0] == pytest.approx(ring.trBs[0], abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            xp.scaling_study("ring", BGA, [30, 20])
        with pytest.raises(ValueError):
            xp.scaling_study("smallworld", BGA, [10, 20])
        with pytest.raises(ValueError):
            xp.scaling_study("cayley", BGA, [2, 3])  # generators missing

    def test_esr_gap_emitted(self):
        res = xp.scaling_study("ring", BGA, [32, 64])
        rows = res.rows()
        assert all("esr_gap" in r and np.isfinite(r["esr_gap"]) for r in rows)


class TestMcBias:
    def test_complete_matches_closed_form(self):
        g = build_named_graph("complete", [30])
        est = xp.mc_bias_estimate(g, BGA, trials=800, seed=21)
        expect = (1.0 / 3.0) * (29.0 / 30.0)
        assert abs(est.mean - expect) <= 3 * est.se

    def test_ring_matches_invariant_vector(self):
        g = build_named_graph("ring", [30])
        est = xp.mc_bias_estimate(g, BGA, trials=600, seed=22)
        expect = bias(g, BGA, "cayley").trB
        assert abs(est.mean - expect) <= 3 * est.se

    def test_constant_start_exact_zero(self):
        g = build_named_graph("ring", [12])
        est = xp.mc_bias_estimate(g, BGA, trials=100, seed=23, x0=2.5)
        assert est.mean == 0.0 and est.se == 0.0

    def test_workers_equal_serial(self):
        g = build_named_graph("ring", [12])
        a = xp.mc_bias_estimate(g, CBGA_RING, trials=120, seed=24, workers=1)
        b = xp.mc_bias_estimate(g, CBGA_RING, trials=120, seed=24, workers=2)
        assert a.mean == b.mean and a.se == b.se

    def test_trials_floor(self):
        g = build_named_graph("ring", [10])
        with pytest.raises(ValueError):
            xp.mc_bias_estimate(g, BGA, trials=50, seed=0)


class TestRgg:
    def test_small_study_shapes_and_determinism(self):
        res1 = xp.rgg_bias_experiment([40, 60], runs=30, params=BGA, seed=31)
        res2 = xp.rgg_bias_experiment([40, 60], runs=30, params=BGA, seed=31)
        assert res1.means == res2.means and res1.ses == res2.ses
        assert set(res1.companions) == {"complete", "ring"}
        assert len(res1.companions["ring"]) == 2
        assert all(m > 0 for m in res1.means)
        rows = res1.rows()
        assert {r["family"] for r in rows} == {"rgg", "complete", "ring"}

    def test_companion_slopes(self):
        res = xp.rgg_bias_experiment([50, 100, 200], runs=30, params=BGA, seed=32)
        assert res.fits["complete"]["slope"] == pytest.approx(0.0, abs=0.1)
        assert res.fits["ring"]["slope"] == pytest.approx(-1.0, abs=0.1)

    def test_runs_floor(self):
        with pytest.raises(ValueError):
            xp.rgg_bias_experiment([40], runs=10, params=BGA, seed=0)


class TestOptimalP:
    def test_complete_argmin_at_inverse_n(self):
        res = xp.optimal_p_search("complete", 0.5, np.arange(0.01, 1.0, 0.01), 20)
        assert abs(res.p_argmin - 0.05) <= 0.01 + 1e-12
        assert res.p_theory == pytest.approx(0.05)
        assert res.distance <= 0.01 + 1e-12

    def test_ring_argmin_near_one_third(self):
        res = xp.optimal_p_search("ring", 0.5, np.arange(0.01, 1.0, 0.01), 30)
        assert abs(res.p_argmin - 1.0 / 3.0) <= 0.01 + 1e-12

    def test_torus_lower_bound_curve(self):
        res = xp.optimal_p_search("torus", 0.5, np.arange(0.01, 1.0, 0.01), 25)
        assert res.p_theory == pytest.approx(0.2)
        assert abs(res.p_argmin_lower - 0.2) <= 0.01 + 1e-12


class TestDemocracy:
    def test_ring_bga_vanishing(self):
        res = xp.weak_democracy_check("ring", BGA, [17, 33, 65, 129])
        assert res.verdict == "vanishing"
        assert res.slope < -0.5

    def test_torus_cbga_vanishing(self):
        res = xp.weak_democracy_check("torus", AlgoParams("cbga", 0.5, 0.2), [3, 5, 7, 9])
        assert res.verdict == "vanishing"

    def test_complete_bga_nonvanishing(self):
        res = xp.weak_democracy_check("complete", BGA, [50, 100, 200, 400])
        assert res.verdict == "non-vanishing"
        assert res.limit_estimate == pytest.approx(1.0 / 3.0, rel=0.02)


class TestFanOut:
    def test_order_preserved(self):
        sq = xp.fan_out(lambda x: x * x, range(10), workers=1)
        assert sq == [x * x for x in range(10)]


def _cube(x):
    return x**3


class TestFanOutParallel:
    def test_pool_matches_serial(self):
        serial = xp.fan_out(_cube, range(25), workers=1)
        pooled = xp.fan_out(_cube, range(25), workers=3)
        assert serial == pooled
