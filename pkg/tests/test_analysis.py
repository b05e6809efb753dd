import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_force, decimal_descent
from momsched import analysis, costs, graph
from momsched.analysis import (AnalysisError, BracketError, feasibility_gap, gradient_dispersion,
                               network_bound, residual, solve_oracle, step_bound)
from momsched.costs import (CompositeCost, CpuCost, HardBoxPenalty, Problem, QuadraticCost,
                            SmoothLogPenalty)
from momsched.graph import SwitchingNetwork, complete_graph
from momsched.nonlinearity import Identity, LogQuantizer
from momsched.protocol import Engine


class TestOracle:
    def test_two_quadratics(self):
        p = Problem([QuadraticCost(1, 0, 0), QuadraticCost(2, 0, 0)], [1.5, 1.5])
        opt = solve_oracle(p)
        assert opt.lambda_star == pytest.approx(4.0, rel=1e-12)
        assert opt.x_star == pytest.approx([2.0, 1.0], rel=1e-12)
        assert brute_force(p, half_width=1.0) == pytest.approx([2.0, 1.0], abs=2e-3)

    def test_symmetric(self):
        p = Problem([QuadraticCost(0.2, 1.0, 0)] * 4, [7.0] * 4)
        assert solve_oracle(p).x_star == pytest.approx([7.0] * 4, rel=1e-12)

    def test_cpu_unconstrained_minimum(self):
        rho = [12.0, 20.0, 31.0]
        p = Problem([CpuCost(100, r) for r in rho], [21.0] * 3)
        opt = solve_oracle(p)
        assert opt.x_star == pytest.approx(rho, abs=1e-9)
        assert opt.f_star == pytest.approx(0.0, abs=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 3), st.integers(0, 2**31))
    def test_matches_brute_force(self, n, seed):
        rng = np.random.default_rng(seed)
        cs = []
        for _ in range(n):
            base = (QuadraticCost(rng.uniform(0.3, 2), rng.uniform(-2, 2), 0) if rng.random() < 0.6
                    else CpuCost(rng.uniform(0.5, 3), rng.uniform(0.5, 2)))
            pen = rng.choice(["none", "hard", "log"])
            if pen == "hard":
                cs.append(CompositeCost(base, HardBoxPenalty(-0.5, 0.5, 2.0, 2)))
            elif pen == "log":
                cs.append(CompositeCost(base, SmoothLogPenalty(-0.5, 0.5, 2.0, 2.0)))
            else:
                cs.append(CompositeCost(base))
        p = Problem(cs, rng.uniform(-0.3, 0.3, n))
        opt = solve_oracle(p)
        hw = float(np.abs(opt.x_star - p.demands).max()) + 0.05
        assert hw < 3, "optimum too far out for the grid"
        ref = brute_force(p, 1e-3, hw)
        assert np.abs(opt.x_star - ref).max() <= 2e-3

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 60), st.integers(0, 2**31), st.sampled_from(["academic", "cpu"]))
    def test_feasible_and_stationary(self, n, seed, kind):
        p = (costs.sample_academic_costs(n, seed) if kind == "academic"
             else costs.sample_cpu_costs(n, seed, total=25.0 * n))
        opt = solve_oracle(p)
        assert abs(opt.x_star.sum() - p.total_demand) <= 1e-10 * abs(p.total_demand)
        assert gradient_dispersion(p, opt.x_star) <= 1e-8
        assert opt.f_star == pytest.approx(p.total_cost(opt.x_star))

    def test_bracket_failure(self):
        p = Problem([QuadraticCost(1, 0, 0), QuadraticCost(1, 0, 0)], [1e6, 1e6])
        with pytest.raises(BracketError):
            solve_oracle(p, scale=1.0, max_doublings=3)

    def test_oracle_beats_random_feasible_points(self):
        p = costs.sample_academic_costs(10, 4)
        opt = solve_oracle(p)
        rng = np.random.default_rng(0)
        for _ in range(200):
            d = rng.normal(size=10)
            d -= d.mean()
            assert p.total_cost(opt.x_star + d) >= opt.f_star


class TestStepBound:
    def test_hand_value(self):
        b = step_bound(1, 1, 2, 2, 1, 0)
        assert b.eta_bar == 0.5 and b.eta_tau_bar == 0.5

    def test_delayed(self):
        assert step_bound(1, 1, 2, 2, 1, 1).eta_tau_bar == 0.25

    def test_decreasing_in_lambda(self):
        vals = [step_bound(1, 1, lam, lam, 0.7).eta_bar for lam in (1, 2, 5)]
        assert vals == pytest.approx([1 / 0.7, 1 / 1.4, 1 / 3.5])

    @pytest.mark.parametrize("bad", [dict(kappa=0), dict(K=-1), dict(lambda2=0), dict(u=0),
                                     dict(tau_bar=-1)])
    def test_invalid(self, bad):
        args = dict(kappa=1, K=1, lambda2=1, lambdaN=2, u=1, tau_bar=0) | bad
        with pytest.raises(AnalysisError):
            step_bound(**args)

    @settings(max_examples=200)
    @given(st.floats(1e-3, 1), st.floats(1, 10), st.floats(1e-2, 10), st.floats(1, 100),
           st.floats(1e-3, 10), st.integers(0, 50))
    def test_delay_division_exact(self, k, K, l2, ln, u, tau):
        b = step_bound(k, K, l2, ln, u, tau)
        assert b.eta_tau_bar == b.eta_bar / (tau + 1)
        # multiplying back is exact only up to the rounding of one division
        assert abs(b.eta_tau_bar * (tau + 1) - b.eta_bar) <= np.spacing(b.eta_bar)
        assert b.eta_bar == k * l2 / (u * ln**2 * K**2)

    @pytest.mark.parametrize("tau", [0, 1, 3, 7, 15])
    def test_delay_division_roundtrip_powers_of_two(self, tau):
        b = step_bound(0.999, 1.001, 0.37, 5.3, 1.29, tau)
        assert b.eta_tau_bar * (tau + 1) == b.eta_bar

    def test_network_bound_uses_window_union(self):
        p = costs.sample_academic_costs(20, 1)
        s = SwitchingNetwork(graph.generate_connected_er(20, 0.25, seed=1), 0.5, seed=3, window=6)
        spec = graph.spectral_bounds(graph.window_union(s, 0, 6))
        b = network_bound(p, s, LogQuantizer(2.0**-10), tau_bar=2)
        k, K = LogQuantizer(2.0**-10).sector_bounds()
        ref = step_bound(k, K, spec.lambda2, spec.lambdaN, p.curvature_bound(), 2)
        assert b == ref


class TestMetrics:
    def test_dispersion_hand(self):
        p = Problem([QuadraticCost(1, 0, 0)] * 2, [0, 0])
        assert gradient_dispersion(p, [1.0, 2.0]) == 2.0

    def test_dispersion_shape(self):
        p = Problem([QuadraticCost(1, 0, 0)] * 2, [0, 0])
        with pytest.raises(AnalysisError):
            gradient_dispersion(p, [1.0, 2.0, 3.0])

    def test_gap_at_init(self):
        p = costs.sample_academic_costs(7, 1)
        assert feasibility_gap(p, p.demands) == 0.0

    def test_residual_at_optimum(self):
        p = costs.sample_academic_costs(5, 2)
        opt = solve_oracle(p)
        tr = Engine(p, complete_graph(5), eta=0.01).run(1)
        tr.x[:] = opt.x_star
        tr.F[:] = opt.f_star
        assert np.all(residual(tr, opt) == 0)

    def test_residual_initial(self):
        p = costs.sample_academic_costs(5, 2)
        opt = solve_oracle(p)
        tr = Engine(p, complete_graph(5), eta=0.01).run(3)
        assert residual(tr, opt)[0] == p.total_cost(p.demands) - opt.f_star

    def test_residual_mismatch(self):
        p = costs.sample_academic_costs(5, 2)
        tr = Engine(p, complete_graph(5), eta=0.01).run(1)
        with pytest.raises(AnalysisError):
            residual(tr, solve_oracle(costs.sample_academic_costs(4, 2)))

    def test_rounds_to_tolerance(self):
        res = np.array([1.0, 0.5, 1e-7, 1e-9])
        assert analysis.rounds_to_tolerance(res, 1e-6) == 2
        assert analysis.rounds_to_tolerance(res, 1e-12) is None


class TestConvergence:
    @pytest.mark.parametrize("seed", range(3))
    def test_descent_to_oracle(self, seed):
        p = costs.sample_academic_costs(8, seed)
        t = graph.generate_connected_er(8, 0.5, seed=seed)
        b = network_bound(p, t, Identity())
        tr = Engine(p, t, eta=0.9 * b.eta_bar).run(20_000, stop_dispersion=1e-9)
        opt = solve_oracle(p)
        res = residual(tr, opt)
        assert res.min() >= -1e-12 * abs(opt.f_star)
        assert np.abs(tr.x[-1] - opt.x_star).max() <= 1e-6 * np.abs(opt.x_star).max()
        # strict descent while the decrease is resolvable in float64
        disp = np.ptp(p.gradients(tr.x), axis=1)
        assert np.all(np.diff(res)[disp[:-1] > 1e-4] < 0)

    @pytest.mark.parametrize("seed", range(3))
    def test_descent_exact_arithmetic(self, seed):
        p = costs.sample_academic_costs(8, seed)
        t = graph.generate_connected_er(8, 0.5, seed=seed)
        eta = 0.9 * network_bound(p, t, Identity()).eta_bar
        bad, _ = decimal_descent(p, t, eta, 3000)
        assert bad == 0
