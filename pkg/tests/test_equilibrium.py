"""Equilibrium location, Walras' law, fixed point, limit experiment, prices."""

import math
from dataclasses import replace

import numpy as np
import pytest

import bewley as bw
from bewley.equilibrium import _check_scan_resolution
from bewley.errors import (
    NonMonetary,
    OutOfSweepRange,
    RateBelowNegDepreciation,
    ScanTooCoarse,
    ZeroAssetDemand,
)


@pytest.fixture(scope="module")
def base(e0):
    return bw.base_sweep(e0)


@pytest.fixture(scope="module")
def huggett_unique(e0, base):
    return bw.find_huggett_equilibria(e0, 0.1, base=base)


@pytest.fixture(scope="module")
def huggett_two(e0, base):
    return bw.find_huggett_equilibria(e0, -0.005, base=base)


class TestHuggettExcess:
    def test_zero_tau_below_lower_bound(self, base):
        # A vanishes below the lower interest bound, so r A(r) does too
        for r in [-0.85, -0.8]:
            pass  # below sweep range by construction
        assert bw.huggett_excess(-0.7, 0.0, base) == pytest.approx(0.0, abs=1e-8)

    def test_explodes_toward_rho(self, base):
        values = [bw.huggett_excess(r, 0.1, base) for r in (0.03, 0.042, 0.047)]
        assert values[0] < values[1] < values[2]
        assert values[2] > 0.3

    def test_tau_continuity_at_zero(self, base):
        r = -0.01
        eps_tau = bw.huggett_excess(r, -1e-9, base)
        assert eps_tau == pytest.approx(r * base.interp_A(r), abs=1e-8)
        assert eps_tau < 0

    def test_out_of_range(self, base):
        with pytest.raises(OutOfSweepRange):
            bw.huggett_excess(-2.0, 0.1, base)


class TestFindHuggett:
    def test_positive_tau_unique_in_zero_rho(self, huggett_unique, e0):
        scan = huggett_unique
        assert scan.verdict == "unique"
        assert len(scan.roots) == 1
        root = scan.roots[0]
        assert 0 < root.r_star < e0.rho
        assert root.B_star == root.A_star > 0
        assert root.K_star == 0.0 and root.w_star == 1.0
        assert max(root.residuals) < 1e-6

    def test_small_deficit_two_roots(self, huggett_two, e0):
        scan = huggett_two
        r_bound = bw.lower_interest_bound(
            e0.chain, e0.utility, e0.household_params(r=0.0)
        )
        assert scan.verdict == "two"
        assert len(scan.roots) == 2
        for root in scan.roots:
            assert r_bound < root.r_star < 0
            assert max(root.residuals) < 1e-6

    def test_large_deficit_no_roots(self, e0, base):
        scan = bw.find_huggett_equilibria(e0, -0.9, base=base)
        assert scan.verdict == "none"
        assert len(scan.roots) == 0

    def test_zero_tau_family(self, e0, base):
        scan = bw.find_huggett_equilibria(e0, 0.0, base=base)
        assert scan.verdict == "family"
        lo, hi = scan.family_interval
        assert lo == -np.inf
        assert hi == pytest.approx(-0.75, abs=1e-12)
        rep = scan.roots[0]
        assert rep.r_star == 0.0
        assert rep.B_star == pytest.approx(rep.A_star)
        assert max(rep.residuals) < 1e-6

    def test_root_stable_to_scan_halving(self, e0):
        coarse = bw.find_huggett_equilibria(e0, 0.1, scan=(0.02, 0.048, 0.004))
        fine = bw.find_huggett_equilibria(e0, 0.1, scan=(0.02, 0.048, 0.002))
        assert coarse.roots[0].r_star == pytest.approx(
            fine.roots[0].r_star, abs=1e-8
        )

    def test_deficit_excess_sign_pattern(self, huggett_two, base, e0):
        """A(r) - tau/r changes sign -/+/- across (lower bound, r1, r2, 0)."""
        tau = huggett_two.tau
        r1, r2 = (root.r_star for root in huggett_two.roots)
        probes = [-0.6, 0.5 * (r1 + r2), 0.5 * r2]
        signs = [
            np.sign(base.interp_A(r) * (1 - tau) - tau / r) for r in probes
        ]
        assert signs == [-1, 1, -1]

    def test_scan_resolution_guard(self):
        with pytest.raises(ScanTooCoarse):
            _check_scan_resolution([-0.021, -0.019], step=0.01)
        _check_scan_resolution([-0.2, -0.05], step=0.01)  # fine

    def test_no_deficit_roots_when_lower_bound_nonnegative(self):
        # mild income risk pushes the lower interest bound above zero;
        # deficits then admit no equilibrium at all
        chain = bw.build_income_chain([0.95, 1.05], [[0, 0.4], [0.4, 0]])
        econ = bw.Economy(chain=chain, utility=bw.Utility(gamma=1.0), rho=0.05)
        bound = bw.lower_interest_bound(
            chain, econ.utility, econ.household_params(r=0.0)
        )
        assert bound > 0
        scan = bw.find_huggett_equilibria(econ, -0.005, settings=bw.SolverSettings(n=300))
        assert scan.verdict == "none"


class TestAiyagariExcess:
    def test_supply_curve_closed_form(self, base):
        # S(-0.02) = (0.3/0.7)/0.03 + (-0.05)/(-0.02) = 16.7857...
        firm = bw.FirmParams(alpha=0.3, delta=0.05)
        tau, r = -0.05, -0.02
        supply = 0.3 / 0.7 / 0.03 + tau / r
        excess = bw.aiyagari_excess(r, tau, firm, base)
        assert excess == pytest.approx((1 - tau) * base.interp_A(r) - supply, abs=1e-12)
        assert supply == pytest.approx(16.7857, abs=2e-4)

    def test_alpha_to_zero_recovers_huggett_form(self, base):
        firm = bw.FirmParams(alpha=1e-12, delta=0.05)
        tau, r = 0.1, 0.03
        aiy = bw.aiyagari_excess(r, tau, firm, base)
        hug_form = (1 - tau) * base.interp_A(r) - tau / r
        assert aiy == pytest.approx(hug_form, abs=1e-9)

    def test_zero_tau_finite_at_zero_rate(self, base):
        firm = bw.FirmParams(alpha=0.3, delta=0.05)
        for r in (-1e-4, 1e-4):
            want = base.interp_A(r) - 0.3 / (0.7 * (r + 0.05))
            assert bw.aiyagari_excess(r, 0.0, firm, base) == pytest.approx(want, abs=1e-12)

    def test_rate_floor(self, base):
        with pytest.raises(RateBelowNegDepreciation):
            bw.aiyagari_excess(-0.06, 0.0, bw.FirmParams(alpha=0.3, delta=0.05), base)


class TestFindAiyagari:
    def test_positive_tau_one_accepted_one_rejected(self, e0, base):
        firm = bw.FirmParams(alpha=0.3, delta=0.05)
        scan = bw.find_aiyagari_equilibria(e0, 0.1, firm, base=base)
        assert scan.verdict == "unique"
        root = scan.roots[0]
        assert 0 < root.r_star < e0.rho
        k_star, w_star = bw.firm_side(firm, root.r_star)
        assert root.K_star == pytest.approx(k_star, rel=1e-12)
        assert root.w_star == pytest.approx(w_star, rel=1e-12)
        assert root.B_star == pytest.approx(w_star * 0.1 / root.r_star, rel=1e-12)
        assert max(root.residuals) < 1e-6
        # the negative-rate intersection violates the budget sign and is
        # retained as a rejected candidate
        assert len(scan.rejected) == 1
        assert scan.rejected[0].r_star < 0

    def test_zero_tau_unique_zero_debt(self, e0, base):
        firm = bw.FirmParams(alpha=0.3, delta=0.05)
        scan = bw.find_aiyagari_equilibria(e0, 0.0, firm, base=base)
        assert scan.verdict == "unique"
        root = scan.roots[0]
        assert root.B_star == 0.0
        assert max(root.residuals) < 1e-6

    def test_small_deficit_small_alpha_two_roots(self, e0, base):
        firm = bw.FirmParams(alpha=0.01, delta=0.05)
        scan = bw.find_aiyagari_equilibria(e0, -0.005, firm, base=base)
        assert scan.verdict == "two"
        assert all(-firm.delta < root.r_star < 0 for root in scan.roots)
        assert all(root.B_star >= 0 for root in scan.roots)
        assert all(max(root.residuals) < 1e-6 for root in scan.roots)

    def test_high_alpha_no_roots(self, e0, base):
        firm = bw.FirmParams(alpha=0.9, delta=0.05)
        scan = bw.find_aiyagari_equilibria(e0, -0.005, firm, base=base)
        assert scan.verdict == "none"
        assert len(scan.roots) == 0


class TestWalrasCheck:
    def test_consistent_tuple(self, huggett_unique, e0):
        root = huggett_unique.roots[0]
        residuals = bw.walras_check(root, e0)
        assert max(residuals) < 1e-6

    def test_linear_response_to_debt_perturbation(self, huggett_unique, e0):
        root = huggett_unique.roots[0]
        bumped = replace(root, B_star=root.B_star + 0.1)
        asset, goods, budget = bw.walras_check(bumped, e0)
        scale = 1.0 + abs(root.A_star)
        assert asset == pytest.approx(0.1 / scale, rel=1e-6)
        assert budget == pytest.approx(abs(root.r_star) * 0.1 / scale, rel=1e-4)
        assert goods == pytest.approx(bw.walras_check(root, e0)[1], abs=1e-12)

    def test_any_two_imply_third(self, huggett_unique, e0):
        """Two residuals forced small keep the third within a small
        multiple: delta B moves asset by delta and budget by |r| delta."""
        root = huggett_unique.roots[0]
        for delta in (1e-4, 1e-3, 1e-2):
            bumped = replace(root, B_star=root.B_star + delta)
            asset, goods, budget = bw.walras_check(bumped, e0)
            third_bound = 3.0 * max(asset, goods)
            assert budget <= third_bound

    def test_aiyagari_residuals_need_firm(self, e0, base):
        firm = bw.FirmParams(alpha=0.3, delta=0.05)
        scan = bw.find_aiyagari_equilibria(e0, 0.1, firm, base=base)
        root = scan.roots[0]
        with pytest.raises(ValueError):
            bw.walras_check(root, e0)
        assert max(bw.walras_check(root, e0, firm)) < 1e-6


class TestFixedPointIteration:
    def test_converges_to_finder_root(self, e0, huggett_unique):
        trace = bw.fixed_point_iteration(e0, 0.1, r0=0.035, damping=0.3, max_iter=200)
        assert trace.converged
        assert trace.r_star == pytest.approx(
            huggett_unique.roots[0].r_star, abs=1e-6
        )

    def test_zero_asset_demand_below_lower_bound(self, e0):
        with pytest.raises(ZeroAssetDemand):
            bw.fixed_point_iteration(e0, 0.0, r0=-0.8, damping=0.5)

    def test_undamped_near_unstable_root(self, e0, huggett_two):
        """Full steps near the lower (unstable) root either diverge or
        escape to some root of the excess function; both are legitimate."""
        lower = huggett_two.roots[0].r_star
        trace = bw.fixed_point_iteration(
            e0, -0.005, r0=lower + 1e-3, damping=1.0, max_iter=40
        )
        if trace.converged:
            root_rates = [root.r_star for root in huggett_two.roots]
            assert min(abs(trace.r_star - rr) for rr in root_rates) < 1e-6
        else:
            assert trace.trace.size >= 2


class TestLimitExperiment:
    def test_positive_tau_gap_shrinks(self, e0, base):
        table = bw.huggett_limit_experiment(
            e0, 0.1, [0.3, 0.1, 0.03], 0.05, base=base
        )
        gaps = table.gaps()
        assert np.all(np.diff(gaps) < 0)
        assert all(len(roots) == 1 for roots in table.aiyagari_roots)

    def test_deficit_tracks_roots_above_neg_delta(self, e0, base):
        table = bw.huggett_limit_experiment(
            e0, -0.005, [0.01, 0.003, 0.001], 0.05, base=base
        )
        upper_huggett = max(table.huggett_roots)
        uppers = [max(roots) for roots in table.aiyagari_roots]
        assert all(
            r >= -0.05 for roots in table.aiyagari_roots for r in roots
        )
        gaps = [abs(u - upper_huggett) for u in uppers]
        assert gaps[-1] < gaps[0]

    def test_alpha_sequence_must_decrease(self, e0, base):
        with pytest.raises(ValueError):
            bw.huggett_limit_experiment(e0, 0.1, [0.1, 0.3], 0.05, base=base)


class TestPriceLevel:
    def _result(self, b_star=50.0, r_star=0.01):
        return bw.EquilibriumResult(
            kind="huggett", tau_star=0.1, r_star=r_star, B_star=b_star,
            K_star=0.0, w_star=1.0, A_star=b_star, C_star=1.0,
            residuals=(0.0, 0.0, 0.0), bracket=(0.0, 0.0),
        )

    def test_initial_ratio(self):
        assert bw.price_level(100.0, 0.03, self._result(), 0.0) == pytest.approx(2.0)

    def test_exponential_path(self):
        value = bw.price_level(100.0, 0.03, self._result(r_star=0.01), 10.0)
        assert value == pytest.approx(2.0 * math.exp(0.2), rel=1e-12)
        assert value == pytest.approx(2.44280552, abs=5e-8)

    def test_constant_when_nominal_equals_real(self):
        res = self._result(r_star=0.03)
        path = bw.price_level(100.0, 0.03, res, np.linspace(0.0, 20.0, 5))
        np.testing.assert_allclose(path, 2.0, rtol=1e-15)

    def test_non_monetary(self):
        with pytest.raises(NonMonetary):
            bw.price_level(100.0, 0.03, self._result(b_star=0.0), 1.0)
