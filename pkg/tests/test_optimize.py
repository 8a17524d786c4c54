import io
import math

import pytest

from vanetmarket import (
    Bounds,
    EconParams,
    UtilityModel,
    grid_oracle,
    nelder_mead,
    optimize_profit,
    profit,
    sweep,
)
from vanetmarket.optimize import NonFiniteObjective

SMALL_BOUNDS = Bounds(c1=(1e-8, 1e-4), f_d=(0.1, 20.0), s=(1.0, 50.0))


def golden_section_max(f, lo, hi, tol=1e-12):
    phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


class TestNelderMead:
    def test_parabola_maximum(self):
        result = nelder_mead(lambda x: -((x[0] - 2.0) ** 2), [0.0], [-10.0], [10.0])
        assert result.x[0] == pytest.approx(2.0, abs=1e-6)
        assert result.converged

    def test_negated_rosenbrock(self):
        def rosen(x):
            return -((1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2)

        result = nelder_mead(rosen, [-1.2, 1.0], [-5.0, -5.0], [5.0, 5.0])
        assert result.x[0] == pytest.approx(1.0, abs=1e-4)
        assert result.x[1] == pytest.approx(1.0, abs=1e-4)

    def test_matches_golden_section_on_payment_slice(self):
        params = EconParams()
        f_d, s = 2.0, 5.0
        objective = lambda x: profit(params, x[0], f_d, s)
        lo, hi = 1e-7, 1e-3
        nm = nelder_mead(objective, [2e-4], [lo], [hi])
        gold = golden_section_max(lambda c: profit(params, c, f_d, s), lo, hi)
        assert nm.x[0] == pytest.approx(gold, abs=1e-8)

    def test_constant_objective_converges(self):
        result = nelder_mead(lambda x: 7.5, [0.3, 0.4], [0.0, 0.0], [1.0, 1.0])
        assert result.converged
        assert result.fun == 7.5

    def test_respects_box(self):
        result = nelder_mead(lambda x: x[0] + x[1], [0.5, 0.5], [0.0, 0.0], [1.0, 1.0])
        assert result.x[0] <= 1.0 and result.x[1] <= 1.0
        assert result.fun == pytest.approx(2.0, abs=1e-8)

    def test_non_finite_objective_identifies_point(self):
        def bad(x):
            return math.nan if x[0] > 0.5 else x[0]

        with pytest.raises(NonFiniteObjective, match="nan"):
            nelder_mead(bad, [0.4], [0.0], [1.0])

    def test_start_outside_box_is_clipped(self):
        result = nelder_mead(lambda x: -(x[0] ** 2), [5.0], [-1.0, ], [1.0])
        assert result.x[0] == pytest.approx(0.0, abs=1e-6)


class TestBounds:
    def test_validation(self):
        with pytest.raises(ValueError):
            Bounds(c1=(0.0, 1e-3))
        with pytest.raises(ValueError):
            Bounds(f_d=(2.0, 1.0))
        with pytest.raises(ValueError):
            Bounds(s=(-1.0, 5.0))

    def test_clip_and_contains(self):
        b = Bounds()
        assert b.clip(1e-12, 100.0, 0.5) == (1e-9, 60.0, 1.0)
        assert b.contains(1e-6, 1.0, 10.0)
        assert not b.contains(1e-6, 1.0, 1000.0)


class TestOptimizeProfit:
    params = EconParams()

    def test_deterministic(self):
        a = optimize_profit(self.params, SMALL_BOUNDS, n_starts=8, seed=3)
        b = optimize_profit(self.params, SMALL_BOUNDS, n_starts=8, seed=3)
        assert a == b

    def test_solution_inside_bounds_and_consistent(self):
        sol = optimize_profit(self.params, SMALL_BOUNDS, n_starts=8, seed=1)
        assert SMALL_BOUNDS.contains(sol.c1_star, sol.f_d_star, sol.s_star)
        re_evaluated = profit(self.params, sol.c1_star, sol.f_d_star, sol.s_star)
        assert abs(sol.profit_star - re_evaluated) <= 1e-12

    def test_approximate_stationarity(self):
        for seed in range(3):
            sol = optimize_profit(self.params, SMALL_BOUNDS, n_starts=8, seed=seed)
            assert sol.stationarity_gap <= 1e-6

    def test_beats_grid_oracle_on_defaults(self):
        sol = optimize_profit(self.params, SMALL_BOUNDS, n_starts=8, seed=0)
        oracle = grid_oracle(self.params, SMALL_BOUNDS, resolution=41)
        assert sol.profit_star >= oracle.profit_star - 1e-9

    def test_integer_server_diagnostics(self):
        sol = optimize_profit(self.params, SMALL_BOUNDS, n_starts=4, seed=0)
        for value in (sol.profit_at_floor_s, sol.profit_at_ceil_s):
            assert value <= sol.profit_star + 1e-9 or math.isclose(value, sol.profit_star)

    def test_flat_objective_still_converges(self):
        # alpha tiny and a degenerate-width payment box: profit barely varies
        params = EconParams(utility=UtilityModel(alpha=1e-12, beta=1e-9))
        bounds = Bounds(c1=(1e-9, 1.001e-9), f_d=(0.1, 0.1001), s=(1.0, 1.0001))
        sol = optimize_profit(params, bounds, n_starts=2, seed=0)
        assert sol.converged
        assert bounds.contains(sol.c1_star, sol.f_d_star, sol.s_star)


class TestGridOracle:
    params = EconParams()

    def test_minimal_grid_is_eight_points(self):
        sol = grid_oracle(self.params, SMALL_BOUNDS, resolution=2)
        assert sol.n_evaluations == 8
        corners = []
        for c1 in SMALL_BOUNDS.c1:
            for f_d in SMALL_BOUNDS.f_d:
                for s in SMALL_BOUNDS.s:
                    corners.append(profit(self.params, c1, f_d, s))
        assert sol.profit_star == pytest.approx(max(corners), rel=1e-12)

    def test_refinement_never_worse(self):
        coarse = grid_oracle(self.params, SMALL_BOUNDS, resolution=11)
        fine = grid_oracle(self.params, SMALL_BOUNDS, resolution=41)
        assert fine.profit_star >= coarse.profit_star - 1e-12

    def test_resolution_validation(self):
        with pytest.raises(ValueError):
            grid_oracle(self.params, SMALL_BOUNDS, resolution=1)

    def test_deterministic(self):
        a = grid_oracle(self.params, SMALL_BOUNDS, resolution=5)
        b = grid_oracle(self.params, SMALL_BOUNDS, resolution=5)
        assert a == b


class TestSweep:
    params = EconParams()

    def test_single_value_equals_direct_optimization(self):
        result = sweep(self.params, SMALL_BOUNDS, "c2", [1e-6], n_starts=4, seed=2)
        direct = optimize_profit(self.params, SMALL_BOUNDS, n_starts=4, seed=2)
        assert len(result.solutions) == 1
        assert result.solutions[0] == direct

    def test_value_order_invariance(self):
        forward = sweep(self.params, SMALL_BOUNDS, "c3", [1e-5, 1e-4], n_starts=4, seed=1)
        backward = sweep(self.params, SMALL_BOUNDS, "c3", [1e-4, 1e-5], n_starts=4, seed=1)
        assert forward.solutions[0] == backward.solutions[1]
        assert forward.solutions[1] == backward.solutions[0]

    def test_each_parameter_is_applied(self):
        for name, value in [("c2", 5e-7), ("c3", 5e-5), ("V", 1000.0), ("sigma", 0.9)]:
            result = sweep(self.params, SMALL_BOUNDS, name, [value], n_starts=2, seed=0)
            assert result.parameter == name
            assert result.values == (value,)
        beta_sweep = sweep(self.params, SMALL_BOUNDS, "beta", [0.1], n_starts=2, seed=0)
        assert beta_sweep.values == (0.1,)

    def test_invalid_parameter(self):
        with pytest.raises(ValueError):
            sweep(self.params, SMALL_BOUNDS, "alpha", [0.5])

    def test_empty_values(self):
        with pytest.raises(ValueError):
            sweep(self.params, SMALL_BOUNDS, "c2", [])

    def test_csv_shape(self):
        result = sweep(self.params, SMALL_BOUNDS, "c2", [1e-7, 1e-6], n_starts=2, seed=0)
        buf = io.StringIO()
        result.write_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "param_value,c1,f_d,s,profit"
        assert len(lines) == 3
