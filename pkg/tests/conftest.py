"""Shared fixtures: the two-state reference economy and cached solves."""

import pytest

import bewley as bw

E0_STATES = [0.5, 1.5]
E0_RATES = [[0.0, 0.4], [0.4, 0.0]]
E0_RHO = 0.05
E0_GAMMA = 1.0


@pytest.fixture(scope="session")
def e0_chain():
    return bw.build_income_chain(E0_STATES, E0_RATES)


@pytest.fixture(scope="session")
def e0(e0_chain):
    return bw.Economy(chain=e0_chain, utility=bw.Utility(gamma=E0_GAMMA), rho=E0_RHO)


@pytest.fixture(scope="session")
def e0_sol_r003(e0):
    """Default-settings solve of E0 at r = 0.03, shared across tests."""
    params = e0.household_params(r=0.03)
    return bw.solve_household(e0.chain, e0.utility, params)


@pytest.fixture(scope="session")
def e0_fine_r003(e0):
    """Well-resolved solve plus forward solve at r = 0.03."""
    settings = bw.SolverSettings(a_max=15.0, n=2000)
    sol, g, a_agg, c_agg = bw.solve_at_rate(e0, 0.03, settings)
    return sol, g, a_agg, c_agg


@pytest.fixture(scope="session")
def single_state_economy():
    chain = bw.build_income_chain([1.0], [[0.0]])
    return bw.Economy(chain=chain, utility=bw.Utility(gamma=1.0), rho=E0_RHO)
