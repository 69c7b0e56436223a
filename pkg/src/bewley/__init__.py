"""Stationary equilibria of heterogeneous-agent bond and capital economies.

The package solves the household Hamilton-Jacobi-Bellman system on a
truncated wealth grid, computes the invariant wealth-income distribution
from the adjoint generator, and locates market-clearing interest rates
and price levels for Huggett (bond-only) and Aiyagari (capital) models.
"""

from .equilibrium import (
    EquilibriumResult,
    EquilibriumScan,
    FixedPointTrace,
    LimitTable,
    aiyagari_excess,
    base_sweep,
    default_scan_grid,
    find_aiyagari_equilibria,
    find_huggett_equilibria,
    fixed_point_iteration,
    huggett_excess,
    huggett_limit_experiment,
    price_level,
    walras_check,
)
from .hjb import (
    HouseholdSolution,
    SimulatedPath,
    SolverSettings,
    dissaving_threshold,
    euler_residual,
    scaled_consumption,
    simulate_path,
    solve_household,
)
from .model import (
    Economy,
    FirmParams,
    HouseholdParams,
    IncomeChain,
    Utility,
    WealthGrid,
    build_income_chain,
    firm_side,
    hamiltonian,
    lower_interest_bound,
)
from .stationary import (
    StationaryDistribution,
    SweepTable,
    aggregates,
    solve_at_rate,
    stationary_kfe,
    stationary_montecarlo,
    sweep_A,
    total_variation_wealth,
)

__version__ = "0.1.0"

__all__ = [
    "Economy",
    "EquilibriumResult",
    "EquilibriumScan",
    "FirmParams",
    "FixedPointTrace",
    "HouseholdParams",
    "HouseholdSolution",
    "IncomeChain",
    "LimitTable",
    "SimulatedPath",
    "SolverSettings",
    "StationaryDistribution",
    "SweepTable",
    "Utility",
    "WealthGrid",
    "aggregates",
    "aiyagari_excess",
    "base_sweep",
    "build_income_chain",
    "default_scan_grid",
    "dissaving_threshold",
    "euler_residual",
    "find_aiyagari_equilibria",
    "find_huggett_equilibria",
    "firm_side",
    "fixed_point_iteration",
    "hamiltonian",
    "huggett_excess",
    "huggett_limit_experiment",
    "lower_interest_bound",
    "price_level",
    "scaled_consumption",
    "simulate_path",
    "solve_at_rate",
    "solve_household",
    "stationary_kfe",
    "stationary_montecarlo",
    "sweep_A",
    "total_variation_wealth",
    "walras_check",
]
