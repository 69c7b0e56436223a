"""Deterministic CSV emission: fixed schemas, 17 significant digits."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .equilibrium import EquilibriumResult, EquilibriumScan, LimitTable
from .hjb import HouseholdSolution
from .stationary import StationaryDistribution, SweepTable


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write(path: Path, header: str, rows) -> None:
    lines = [header]
    lines.extend(",".join(row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def write_household_csv(sol: HouseholdSolution, path: Path) -> None:
    states = sol.chain.states
    rows = (
        (
            _fmt(sol.grid.nodes[i]), str(j), _fmt(states[j]),
            _fmt(sol.v[i, j]), _fmt(sol.c[i, j]), _fmt(sol.s[i, j]),
        )
        for i in range(sol.grid.n)
        for j in range(sol.chain.d)
    )
    _write(path, "a,z_index,z,v,c,s", rows)


def write_distribution_csv(g: StationaryDistribution, sol: HouseholdSolution, path: Path) -> None:
    rows = (
        (_fmt(sol.grid.nodes[i]), str(j), _fmt(g.g[i, j]))
        for i in range(sol.grid.n)
        for j in range(sol.chain.d)
    )
    _write(path, "a,z_index,mass", rows)


def write_sweep_csv(table: SweepTable, path: Path) -> None:
    rows = (
        (
            _fmt(table.r[i]), _fmt(table.A[i]), _fmt(table.C[i]),
            _fmt(table.boundary_mass[i]),
            "true" if table.converged[i] else "false",
        )
        for i in range(table.n_rows)
    )
    _write(path, "r,A,C,boundary_mass,converged", rows)


_EQ_HEADER = (
    "kind,tau,r_star,B_star,K_star,w_star,A_star,C_star,"
    "res_asset,res_goods,res_budget,bracket_lo,bracket_hi"
)


def write_equilibria_csv(results: list[EquilibriumResult], path: Path) -> None:
    rows = (
        (
            res.kind, _fmt(res.tau_star), _fmt(res.r_star), _fmt(res.B_star),
            _fmt(res.K_star), _fmt(res.w_star), _fmt(res.A_star), _fmt(res.C_star),
            _fmt(res.residuals[0]), _fmt(res.residuals[1]), _fmt(res.residuals[2]),
            _fmt(res.bracket[0]), _fmt(res.bracket[1]),
        )
        for res in results
    )
    _write(path, _EQ_HEADER, rows)


def write_excess_csv(scan: EquilibriumScan, path: Path) -> None:
    rows = (
        (
            _fmt(scan.excess_r[i]), _fmt(scan.excess[i]),
            "true" if scan.accepted_region[i] else "false",
        )
        for i in range(scan.excess_r.size)
    )
    _write(path, "r,excess,accepted", rows)


def write_supply_csv(r_values: np.ndarray, supply: np.ndarray, path: Path) -> None:
    """Supply curve (tau/r or S(r)) in the sweep schema so the plotting
    layer can consume it without computing anything."""
    rows = (
        (_fmt(r_values[i]), _fmt(supply[i]), "nan", "nan", "true")
        for i in range(r_values.size)
    )
    _write(path, "r,A,C,boundary_mass,converged", rows)


def write_limit_csv(table: LimitTable, path: Path) -> None:
    huggett_top = max(table.huggett_roots) if table.huggett_roots else float("nan")
    rows = []
    for alpha, roots in zip(table.alphas, table.aiyagari_roots):
        for track, r_star in enumerate(sorted(roots)):
            rows.append(
                (
                    _fmt(alpha), str(track), _fmt(r_star), _fmt(huggett_top),
                    _fmt(abs(r_star - huggett_top)),
                )
            )
    _write(path, "alpha,track,r_star,r_huggett,gap", rows)
