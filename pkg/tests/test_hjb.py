"""Household solver: invariants, diagnostics, scaling, simulation."""

import numpy as np
import pytest

import bewley as bw
from bewley.errors import (
    InvalidRate,
    NonConvergence,
    TruncationTooSmall,
    UnsupportedBorrowingLimit,
    ValidationError,
)


def second_differences(v, nodes):
    first = np.diff(v, axis=0) / np.diff(nodes)[:, None]
    return np.diff(first, axis=0)


class TestSolveHousehold:
    def test_invalid_rate(self, e0):
        with pytest.raises(InvalidRate):
            bw.solve_household(e0.chain, e0.utility, e0.household_params(r=0.05))
        with pytest.raises(InvalidRate):
            bw.solve_household(e0.chain, e0.utility, e0.household_params(r=0.06))

    def test_max_iter_zero_raises(self, e0):
        with pytest.raises(NonConvergence) as err:
            bw.solve_household(
                e0.chain, e0.utility, e0.household_params(r=0.03),
                bw.SolverSettings(max_iter=0),
            )
        assert err.value.iterations == 0

    def test_truncation_too_small(self, e0):
        with pytest.raises(TruncationTooSmall):
            bw.solve_household(
                e0.chain, e0.utility, e0.household_params(r=0.049),
                bw.SolverSettings(a_max=5.0),
            )

    def test_residual_below_tolerance(self, e0_sol_r003):
        assert e0_sol_r003.bellman_residual <= 1e-8

    def test_value_increasing_and_concave(self, e0_sol_r003):
        sol = e0_sol_r003
        assert np.all(np.diff(sol.v, axis=0) > 0)
        second = second_differences(sol.v, sol.grid.nodes)
        assert second.max() <= 1e-10

    def test_marginal_value_positive_and_consistent(self, e0_sol_r003):
        sol = e0_sol_r003
        assert np.all(sol.v_a > 0)
        np.testing.assert_allclose(
            sol.c, sol.utility.u_prime_inv(sol.v_a), rtol=1e-12
        )

    def test_consumption_monotone_in_wealth(self, e0_sol_r003):
        assert np.all(np.diff(e0_sol_r003.c, axis=0) >= -1e-12)

    def test_boundary_feasibility(self, e0_sol_r003):
        sol = e0_sol_r003
        flow0 = sol.income_flow[0]
        assert np.all(sol.c[0] > 0)
        assert np.all(sol.c[0] <= flow0 + 1e-12)
        assert np.all(sol.s[0] >= -1e-12)
        assert np.all(sol.v_a[0] >= sol.utility.u_prime(flow0) - 1e-10)

    def test_low_state_dissaves_above_constraint(self, e0_sol_r003):
        sol = e0_sol_r003
        assert sol.s[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert np.all(sol.s[1:, 0] < 0)
        assert sol.c[0, 0] <= 0.5 + 1e-12

    def test_upwind_consistency(self, e0_sol_r003):
        sol = e0_sol_r003
        steps = sol.grid.steps[:, None]
        dv_f = np.diff(sol.v, axis=0) / steps
        dv_b = dv_f
        flow = sol.income_flow
        saving = sol.s > 0
        dissaving = sol.s < 0
        still = ~saving & ~dissaving
        # forward difference where drift is positive
        np.testing.assert_allclose(
            sol.v_a[:-1][saving[:-1]], dv_f[saving[:-1]], rtol=1e-9
        )
        # backward difference where drift is negative (rows >= 1)
        np.testing.assert_allclose(
            sol.v_a[1:][dissaving[1:]], dv_b[dissaving[1:]], rtol=1e-9
        )
        # zero-drift nodes consume the income flow
        np.testing.assert_allclose(sol.c[still], flow[still], rtol=1e-12)

    def test_value_bounds(self, e0_sol_r003):
        sol = e0_sol_r003
        rho, r = sol.params.rho, sol.params.r
        a = sol.grid.nodes[:, None]
        upper = sol.utility.u(rho * a + sol.params.net_wage) / rho
        lower = float(sol.utility.u(0.5 * sol.params.net_wage * sol.chain.states[0]) / rho)
        slack = 1e-6 * (1.0 + np.abs(sol.v))
        assert np.all(sol.v <= upper + slack)
        assert np.all(sol.v >= lower - 1e-6)

    def test_continuity_in_r(self, e0):
        settings = bw.SolverSettings(a_max=30.0, n=1500)
        for r in [0.0, 0.02, 0.04]:
            lo = bw.solve_household(e0.chain, e0.utility, e0.household_params(r=r), settings)
            hi = bw.solve_household(
                e0.chain, e0.utility, e0.household_params(r=r + 1e-4), settings
            )
            compact = lo.grid.nodes <= 5.0
            assert np.abs(lo.v - hi.v)[compact].max() < 2e-2
            assert np.abs(lo.c - hi.c)[compact].max() < 5e-3

    def test_auto_truncation_scales_with_rate(self, e0):
        near = bw.solve_household(e0.chain, e0.utility, e0.household_params(r=0.045))
        far = bw.solve_household(e0.chain, e0.utility, e0.household_params(r=0.0))
        assert near.grid.a_max > far.grid.a_max
        assert near.s[-1].max() < 0
        assert far.s[-1].max() < 0


class TestEulerResidual:
    def test_boundary_slack_positive_at_lowest_state(self, e0_sol_r003):
        res = bw.euler_residual(e0_sol_r003)
        # at (a_min, z_min) the drift is zero and the inequality slack
        # (rho - r) v_a - L v_a must be strictly positive
        assert e0_sol_r003.s[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert res[0, 0] > 0

    def test_refinement_study(self, e0):
        """The residual of the first-order condition decreases under grid
        refinement; in the smooth region (away from the square-root layer
        at the constraint and from drift sign changes) it at least halves
        per doubling."""
        sups = {}
        full = {}
        for n in [1000, 2000]:
            sol = bw.solve_household(
                e0.chain, e0.utility, e0.household_params(r=0.03),
                bw.SolverSettings(a_max=15.0, n=n),
            )
            res = np.abs(bw.euler_residual(sol))
            mask = np.ones_like(res, dtype=bool)
            mask[sol.grid.nodes <= 0.5] = False
            mask[-5:] = False
            for j in range(sol.chain.d):
                for i in np.where(np.diff(np.sign(sol.s[:, j])) != 0)[0]:
                    mask[max(0, i - 5) : i + 6, j] = False
            sups[n] = res[mask].max()
            full[n] = res[1:-1].max()
        ratio = sups[2000] / sups[1000]
        assert 0.15 <= ratio <= 0.7
        assert full[2000] <= full[1000] + 1e-9

    def test_single_state_reduction(self, single_state_economy):
        """With one income state the chain term vanishes and the residual
        equals (rho - r) u'(c) - u''(c) c_a s up to discretization."""
        econ = single_state_economy
        sol = bw.solve_household(
            econ.chain, econ.utility, econ.household_params(r=0.03),
            bw.SolverSettings(a_max=20.0, n=2000),
        )
        res = bw.euler_residual(sol)
        c = sol.c[:, 0]
        c_a = np.gradient(c, sol.grid.nodes)
        by_hand = (0.05 - 0.03) * econ.utility.u_prime(c) - econ.utility.u_second(c) * c_a * sol.s[:, 0]
        inner = slice(10, -10)
        np.testing.assert_allclose(res[inner, 0], by_hand[inner], atol=2e-3)


class TestDissavingThreshold:
    def test_finite_and_stable(self, e0):
        coarse = bw.solve_household(
            e0.chain, e0.utility, e0.household_params(r=0.03),
            bw.SolverSettings(a_max=15.0, n=1000),
        )
        fine = bw.solve_household(
            e0.chain, e0.utility, e0.household_params(r=0.03),
            bw.SolverSettings(a_max=30.0, n=2000),
        )
        a_bar_coarse = bw.dissaving_threshold(coarse)
        a_bar_fine = bw.dissaving_threshold(fine)
        assert a_bar_coarse < coarse.grid.a_max
        cell = coarse.grid.steps.max()
        assert abs(a_bar_fine - a_bar_coarse) < cell

    def test_single_state_dissaves_everywhere(self, single_state_economy):
        econ = single_state_economy
        sol = bw.solve_household(
            econ.chain, econ.utility, econ.household_params(r=0.03),
            bw.SolverSettings(a_max=20.0, n=1000),
        )
        assert bw.dissaving_threshold(sol) == econ.a_min

    def test_threshold_grows_toward_rho(self, e0):
        low = bw.solve_household(e0.chain, e0.utility, e0.household_params(r=0.03))
        high = bw.solve_household(e0.chain, e0.utility, e0.household_params(r=0.049))
        assert bw.dissaving_threshold(high) > bw.dissaving_threshold(low)


class TestScaledConsumption:
    def test_identity_at_base(self, e0_sol_r003):
        scaled = bw.scaled_consumption(e0_sol_r003, w=1.0, tau=0.0)
        np.testing.assert_allclose(scaled.c, e0_sol_r003.c, rtol=1e-14)
        np.testing.assert_allclose(scaled.grid.nodes, e0_sol_r003.grid.nodes, rtol=1e-14)

    def test_against_direct_resolve(self, e0):
        base = bw.solve_household(
            e0.chain, e0.utility, e0.household_params(r=0.03),
            bw.SolverSettings(a_max=30.0, n=1500),
        )
        scaled = bw.scaled_consumption(base, w=1.0, tau=0.5)
        direct = bw.solve_household(
            e0.chain, e0.utility, e0.household_params(r=0.03, tau=0.5),
            bw.SolverSettings(a_max=15.0, n=1500),
        )
        np.testing.assert_allclose(scaled.grid.nodes, direct.grid.nodes, atol=1e-12)
        np.testing.assert_allclose(scaled.c, direct.c, rtol=1e-8)
        np.testing.assert_allclose(scaled.v, direct.v, rtol=1e-8)

    def test_policy_vanishes_on_support_as_tau_to_one(self, e0_fine_r003):
        sol, g, _, _ = e0_fine_r003
        support = sol.grid.nodes <= g.support_upper
        sups = []
        for tau in [0.9, 0.99, 0.999]:
            scaled = bw.scaled_consumption(sol, w=1.0, tau=tau)
            scaled_g = bw.stationary_kfe(scaled)
            in_support = scaled.grid.nodes <= scaled_g.support_upper
            sups.append(scaled.c[in_support].max())
            a_agg, c_agg = bw.aggregates(scaled_g, scaled)
            assert a_agg == pytest.approx((1 - tau) * float((g.g.sum(axis=1) * sol.grid.nodes).sum()), rel=1e-10)
        assert sups[0] > sups[1] > sups[2]
        assert sups[2] < 1e-2

    def test_rejects_nonbase_input(self, e0):
        base = bw.solve_household(e0.chain, e0.utility, e0.household_params(r=0.03, tau=0.2))
        with pytest.raises(ValidationError):
            bw.scaled_consumption(base, w=1.0, tau=0.5)

    def test_rejects_negative_borrowing_limit(self, e0_sol_r003):
        from dataclasses import replace

        shifted = replace(e0_sol_r003, params=bw.HouseholdParams(rho=0.05, r=0.03, a_min=-0.5))
        with pytest.raises(UnsupportedBorrowingLimit):
            bw.scaled_consumption(shifted, w=1.0, tau=0.5)


class TestSimulatePath:
    def test_bit_identical_for_fixed_seed(self, e0_sol_r003):
        one = bw.simulate_path(e0_sol_r003, a0=2.0, z0=0, horizon=50.0, seed=7)
        two = bw.simulate_path(e0_sol_r003, a0=2.0, z0=0, horizon=50.0, seed=7)
        assert np.array_equal(one.a, two.a)
        assert np.array_equal(one.z_index, two.z_index)
        assert np.array_equal(one.c, two.c)

    def test_different_seeds_differ(self, e0_sol_r003):
        one = bw.simulate_path(e0_sol_r003, a0=2.0, z0=0, horizon=50.0, seed=1)
        two = bw.simulate_path(e0_sol_r003, a0=2.0, z0=0, horizon=50.0, seed=2)
        assert not np.array_equal(one.z_index, two.z_index)

    def test_stays_in_state_space(self, e0_sol_r003):
        path = bw.simulate_path(e0_sol_r003, a0=1.0, z0=1, horizon=100.0, seed=3)
        assert path.a.min() >= e0_sol_r003.grid.a_min
        assert path.a.max() <= e0_sol_r003.grid.a_max

    def test_single_state_hits_constraint(self, single_state_economy):
        econ = single_state_economy
        sol = bw.solve_household(
            econ.chain, econ.utility, econ.household_params(r=0.03),
            bw.SolverSettings(a_max=20.0, n=2000),
        )
        path = bw.simulate_path(sol, a0=1.0, z0=0, horizon=300.0, seed=0)
        # monotone up to integrator tolerance noise; with a single state
        # the approach to the constraint is exponential, not finite-time
        assert np.all(np.diff(path.a) <= 5e-9)
        assert path.a[-1] < 1e-3

    def test_absorbed_below_lower_bound(self, e0):
        # r = -0.8 < lower bound -0.75: the constraint absorbs every path
        sol = bw.solve_household(e0.chain, e0.utility, e0.household_params(r=-0.8))
        path = bw.simulate_path(sol, a0=0.0, z0=1, horizon=100.0, seed=11)
        assert np.all(path.a <= 1e-12)

    def test_budget_constraint_along_path(self, e0_sol_r003):
        sol = e0_sol_r003
        rho = sol.params.rho
        horizon = 120.0
        path = bw.simulate_path(sol, a0=2.0, z0=1, horizon=horizon, seed=5, n_samples=6001)
        disc = np.exp(-rho * path.t)
        lhs = np.trapezoid(disc * path.c, path.t)
        income = sol.params.income(sol.chain.states)[path.z_index]
        rhs = 2.0 + np.trapezoid(disc * income, path.t)
        tail = np.exp(-rho * horizon) * sol.chain.states[-1] / rho
        assert lhs <= rhs + tail + 1e-3

    def test_deterministic_consumption_growth(self, single_state_economy):
        """d = 1: interior log-consumption decays at (r - rho)/gamma."""
        econ = single_state_economy
        sol = bw.solve_household(
            econ.chain, econ.utility, econ.household_params(r=0.03),
            bw.SolverSettings(a_max=20.0, n=4000),
        )
        path = bw.simulate_path(sol, a0=10.0, z0=0, horizon=60.0, seed=0, n_samples=3001)
        window = (path.a > 1.0) & (path.a < 9.5)
        slope = np.polyfit(path.t[window], np.log(path.c[window]), 1)[0]
        assert slope == pytest.approx(-0.02, abs=1e-3)
