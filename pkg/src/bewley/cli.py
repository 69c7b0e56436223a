"""Command-line interface: configuration, dispatch, CSV emission.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 no equilibrium found under --require.  Diagnostics go to stderr; data
goes to files and stdout only.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import csvio
from .config import RunConfig, parse_config
from .equilibrium import (
    base_sweep,
    find_aiyagari_equilibria,
    find_huggett_equilibria,
    huggett_limit_experiment,
)
from .errors import (
    BewleyError,
    ConfigError,
    DegenerateNullSpace,
    NonConvergence,
    TruncationTooSmall,
)
from .hjb import dissaving_threshold, scaled_consumption, solve_household
from .model import FirmParams, firm_side, hamiltonian, lower_interest_bound
from .stationary import aggregates, stationary_kfe

# Regimes behind the published figure sets: demand vs bond supply for one
# surplus and two deficits, demand vs capital-plus-bond supply for a small
# and a large capital share.
_FIGURES = (
    ("fig1", "huggett", 0.1, None),
    ("fig2a", "huggett", -0.9, None),
    ("fig2b", "huggett", -0.005, None),
    ("fig3a", "aiyagari", -0.005, 0.01),
    ("fig3b", "aiyagari", -0.005, 0.9),
)

_EXIT_CONFIG = 2
_EXIT_SOLVER = 3
_EXIT_NO_EQUILIBRIUM = 4


def _solve_with_tau(config: RunConfig, r: float, tau: float):
    params = config.economy.household_params(r, w=1.0, tau=tau)
    return solve_household(
        config.economy.chain, config.economy.utility, params, config.settings
    )


def cmd_household(config: RunConfig, args) -> int:
    sol = _solve_with_tau(config, args.r, args.tau if args.tau is not None else config.tau)
    csvio.write_household_csv(sol, config.output_dir / "household.csv")
    return 0


def cmd_stationary(config: RunConfig, args) -> int:
    sol = _solve_with_tau(config, args.r, args.tau if args.tau is not None else config.tau)
    g = stationary_kfe(sol)
    csvio.write_distribution_csv(g, sol, config.output_dir / "distribution.csv")
    return 0


def cmd_sweep(config: RunConfig, args) -> int:
    tau = args.tau if args.tau is not None else config.tau
    table = base_sweep(config.economy, config.scan, config.settings)
    # rescale the base rows instead of re-solving: A(r, 1, tau) = (1 - tau) A(r, 1, 0)
    from .stationary import SweepTable

    table_tau = SweepTable(
        r=table.r.copy(),
        A=(1.0 - tau) * table.A,
        C=(1.0 - tau) * table.C,
        boundary_mass=table.boundary_mass.copy(),
        converged=table.converged.copy(),
        w=1.0,
        tau=tau,
    )
    csvio.write_sweep_csv(table_tau, config.output_dir / "sweep.csv")
    return 0


def cmd_equilibrium_huggett(config: RunConfig, args) -> int:
    tau = args.tau if args.tau is not None else config.tau
    scan = find_huggett_equilibria(config.economy, tau, config.scan, config.settings)
    csvio.write_equilibria_csv(list(scan.roots), config.output_dir / "equilibria_huggett.csv")
    csvio.write_excess_csv(scan, config.output_dir / "excess_huggett.csv")
    if args.require and not scan.roots:
        print(f"no huggett equilibrium for tau={tau}", file=sys.stderr)
        return _EXIT_NO_EQUILIBRIUM
    return 0


def cmd_equilibrium_aiyagari(config: RunConfig, args) -> int:
    tau = args.tau if args.tau is not None else config.tau
    firm = config.firm
    if args.alpha is not None:
        firm = FirmParams(alpha=args.alpha, delta=firm.delta)
    scan = find_aiyagari_equilibria(
        config.economy, tau, firm, config.scan, config.settings
    )
    csvio.write_equilibria_csv(list(scan.roots), config.output_dir / "equilibria_aiyagari.csv")
    csvio.write_equilibria_csv(
        list(scan.rejected), config.output_dir / "equilibria_aiyagari_rejected.csv"
    )
    csvio.write_excess_csv(scan, config.output_dir / "excess_aiyagari.csv")
    if args.require and not scan.roots:
        print(f"no aiyagari equilibrium for tau={tau}", file=sys.stderr)
        return _EXIT_NO_EQUILIBRIUM
    return 0


def cmd_limit(config: RunConfig, args) -> int:
    tau = args.tau if args.tau is not None else config.tau
    alphas = (
        [float(tok) for tok in args.alphas.split(",")]
        if args.alphas
        else [0.3, 0.1, 0.03, 0.01, 0.003, 0.001]
    )
    table = huggett_limit_experiment(
        config.economy, tau, alphas, config.firm.delta, config.scan, config.settings
    )
    csvio.write_limit_csv(table, config.output_dir / "limit.csv")
    return 0


def _figure_supply(kind, tau, alpha, delta, r_values):
    if kind == "huggett":
        return tau / r_values
    return alpha / ((1.0 - alpha) * (r_values + delta)) + tau / r_values


def cmd_figures(config: RunConfig, args) -> int:
    economy = config.economy
    base = base_sweep(economy, config.scan, config.settings, firm=config.firm)
    out = config.output_dir
    for name, kind, tau, alpha in _FIGURES:
        if kind == "huggett":
            scan = find_huggett_equilibria(
                economy, tau, config.scan, config.settings, base=base
            )
            keep = np.ones(base.n_rows, dtype=bool)
            delta = config.firm.delta
            roots = [res for res in scan.roots if res.r_star != 0.0]
        else:
            firm = FirmParams(alpha=alpha, delta=config.firm.delta)
            scan = find_aiyagari_equilibria(
                economy, tau, firm, config.scan, config.settings, base=base
            )
            keep = base.r > -firm.delta + 1e-6
            delta = firm.delta
            roots = list(scan.roots)

        from .stationary import SweepTable

        demand = SweepTable(
            r=base.r[keep].copy(),
            A=(1.0 - tau) * base.A[keep],
            C=(1.0 - tau) * base.C[keep],
            boundary_mass=base.boundary_mass[keep].copy(),
            converged=base.converged[keep].copy(),
            w=1.0,
            tau=tau,
        )
        csvio.write_sweep_csv(demand, out / f"{name}_demand.csv")
        supply = _figure_supply(kind, tau, alpha if alpha else 0.0, delta, demand.r)
        csvio.write_supply_csv(demand.r, supply, out / f"{name}_supply.csv")
        csvio.write_equilibria_csv(roots, out / f"{name}_equilibria.csv")
        csvio.write_excess_csv(scan, out / f"{name}_excess.csv")
    return 0


def _check(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"{status} {name}" + (f" ({detail})" if detail else ""))
    return bool(ok)


def cmd_validate(config: RunConfig, args) -> int:
    """Run every machine-checkable module invariant on the configured economy."""
    economy = config.economy
    chain, utility = economy.chain, economy.utility
    ok = True

    nu = chain.stationary_law
    ok &= _check(
        "chain-balance", np.abs(nu @ chain.generator).max() < 1e-12
        and abs(nu.sum() - 1) < 1e-12
    )
    ok &= _check("chain-mean-one", abs(nu @ chain.states - 1.0) < 1e-12)
    from scipy.linalg import expm

    nu_expm = expm(np.asarray(chain.generator) * 2000.0).mean(axis=0)
    ok &= _check("chain-ergodic-recovery", np.abs(nu - nu_expm).max() < 1e-8)

    p_grid = np.geomspace(1e-6, 1e6, 25)
    envelope = max(
        abs(h + p * c - float(utility.u(c)))
        for p in p_grid
        for h, c in [hamiltonian(utility, p)]
    )
    ok &= _check("hamiltonian-envelope", envelope < 1e-10 * 1e6)
    h_values = [hamiltonian(utility, p)[0] for p in p_grid]
    ok &= _check("hamiltonian-decreasing", all(np.diff(h_values) < 0))

    firm = config.firm
    foc = max(
        abs(firm.alpha * k ** (firm.alpha - 1) - firm.delta - r) + abs((1 - firm.alpha) * k**firm.alpha - w)
        for r in (-0.5 * firm.delta, 0.0, 0.5 * economy.rho)
        for k, w in [firm_side(firm, r)]
    )
    ok &= _check("firm-profit-conditions", foc < 1e-12)

    r_bound = lower_interest_bound(chain, utility, economy.household_params(r=0.0))
    r_probe = 0.6 * economy.rho if r_bound < 0.6 * economy.rho else 0.5 * (r_bound + economy.rho)
    params = economy.household_params(r=r_probe)
    sol = solve_household(chain, utility, params, config.settings)
    ok &= _check("hjb-residual", sol.bellman_residual <= config.settings.tol,
                 f"residual={sol.bellman_residual:.2e}")
    first = np.diff(sol.v, axis=0) / sol.grid.steps[:, None]
    ok &= _check("hjb-concave-value", np.diff(first, axis=0).max() <= 1e-10)
    ok &= _check("hjb-monotone-consumption", np.all(np.diff(sol.c, axis=0) >= -1e-12))
    flow0 = sol.income_flow[0]
    ok &= _check(
        "hjb-boundary-feasibility",
        np.all(sol.c[0] > 0) and np.all(sol.c[0] <= flow0 + 1e-12),
    )
    upper = utility.u(economy.rho * sol.grid.nodes[:, None] + params.net_wage) / economy.rho
    lower = float(utility.u(0.5 * params.net_wage * chain.states[0]) / economy.rho)
    ok &= _check(
        "hjb-value-bounds",
        np.all(sol.v <= upper + 1e-6 * (1 + np.abs(sol.v))) and np.all(sol.v >= lower - 1e-6),
    )

    g = stationary_kfe(sol)
    ok &= _check("kfe-probability-mass", abs(g.g.sum() - 1) < 1e-12 and g.g.min() >= 0)
    ok &= _check("kfe-income-marginal", np.abs(g.income_marginal() - nu).max() < 1e-10)
    a_bar = dissaving_threshold(sol)
    ok &= _check("kfe-compact-support", g.support_upper <= a_bar + sol.grid.steps.max() + 1e-12)
    a_agg, c_agg = aggregates(g, sol)
    conservation = abs(c_agg - params.r * a_agg - params.net_wage)
    ok &= _check("conservation-identity", conservation < 1e-8, f"|C-rA-w(1-tau)|={conservation:.2e}")

    if economy.a_min == 0.0:
        scaled = scaled_consumption(sol, w=2.0, tau=0.5)
        g_scaled = stationary_kfe(scaled)
        a_scaled, _ = aggregates(g_scaled, scaled)
        scaling_gap = abs(a_scaled - 2.0 * 0.5 * a_agg) / max(a_agg, 1e-300)
        ok &= _check("crra-scaling", scaling_gap < 1e-8, f"gap={scaling_gap:.2e}")

    scan = find_huggett_equilibria(economy, config.tau, config.scan, config.settings)
    if scan.roots:
        worst = max(max(res.residuals) for res in scan.roots)
        ok &= _check("walras-residuals", worst < 1e-6, f"max={worst:.2e}")
    else:
        _check("walras-residuals", True, "no equilibrium at configured tau; skipped")

    print("ALL PASS" if ok else "FAILURES PRESENT")
    return 0 if ok else 1


_COMMANDS = {
    "household": cmd_household,
    "stationary": cmd_stationary,
    "sweep": cmd_sweep,
    "equilibrium-huggett": cmd_equilibrium_huggett,
    "equilibrium-aiyagari": cmd_equilibrium_aiyagari,
    "limit": cmd_limit,
    "figures": cmd_figures,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bewley",
        description="Stationary equilibria of heterogeneous-agent bond and capital economies",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to the INI configuration")
    parser.add_argument("--out", default=".", help="output directory for CSV files")
    parser.add_argument("--r", type=float, default=None, help="interest rate (household/stationary)")
    parser.add_argument("--tau", type=float, default=None, help="override policy.tau")
    parser.add_argument("--alpha", type=float, default=None, help="override firm.alpha")
    parser.add_argument("--seed", type=int, default=None, help="override mc.seed")
    parser.add_argument("--alphas", default=None, help="comma-separated alpha sequence (limit)")
    parser.add_argument("--require", action="store_true",
                        help="exit 4 when an equilibrium command finds no root")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(args.config)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return _EXIT_CONFIG

    from dataclasses import replace

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = replace(config, output_dir=out_dir)
    if args.seed is not None:
        config = replace(config, mc=replace(config.mc, seed=args.seed))

    if args.command in ("household", "stationary") and args.r is None:
        print(f"{args.command} requires --r", file=sys.stderr)
        return _EXIT_CONFIG
    if args.r is not None and args.r >= config.economy.rho:
        print(f"--r must be below rho={config.economy.rho}", file=sys.stderr)
        return _EXIT_CONFIG

    try:
        return _COMMANDS[args.command](config, args)
    except (NonConvergence, TruncationTooSmall, DegenerateNullSpace) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return _EXIT_SOLVER
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return _EXIT_CONFIG
    except BewleyError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
