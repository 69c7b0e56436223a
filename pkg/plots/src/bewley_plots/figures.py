"""Render asset-demand/supply figures from solver CSV files.

This layer computes nothing: demand and supply curves, equilibrium
markers and their ordinates all come straight out of the CSVs written
by the solver CLI. Markers sit exactly at the tabulated r_star values;
no re-fitting, no interpolation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class PlotError(Exception):
    """Base class for rendering failures (CLI exit code 1)."""


class SchemaMismatch(PlotError):
    def __init__(self, path, column):
        self.column = column
        super().__init__(f"{path}: expected column(s) {column}")


class EmptyInput(PlotError):
    def __init__(self, path):
        super().__init__(f"{path}: no data rows")


_SWEEP_HEADER = ["r", "A", "C", "boundary_mass", "converged"]
_EQ_HEADER = [
    "kind", "tau", "r_star", "B_star", "K_star", "w_star", "A_star", "C_star",
    "res_asset", "res_goods", "res_budget", "bracket_lo", "bracket_hi",
]


@dataclass(frozen=True)
class FigureSpec:
    """One figure: two curve files, a marker file, styling, output stem."""

    demand_csv: Path
    supply_csv: Path
    equilibria_csv: Path
    output_stem: Path
    demand_label: str = "asset demand"
    supply_label: str = "asset supply"
    asymptotes: tuple[float, ...] = (0.0,)
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    title: str = ""
    formats: tuple[str, ...] = ("png", "pdf")


def _read_rows(path: Path, header: list[str]) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise SchemaMismatch(path, f"file missing (wanted header {header})")
    with path.open() as handle:
        reader = csv.reader(handle)
        try:
            found = next(reader)
        except StopIteration:
            raise EmptyInput(path)
        missing = [column for column in header if column not in found]
        if missing:
            raise SchemaMismatch(path, missing)
        index = {column: found.index(column) for column in header}
        rows = [
            {column: row[index[column]] for column in header}
            for row in reader
            if row
        ]
    return rows


def read_curve(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """(r, A) pairs from a sweep-schema CSV, converged rows only."""
    rows = _read_rows(path, _SWEEP_HEADER)
    if not rows:
        raise EmptyInput(path)
    kept = [
        (float(row["r"]), float(row["A"]))
        for row in rows
        if row["converged"] == "true" and row["A"] != "nan"
    ]
    if not kept:
        raise EmptyInput(path)
    r, a = map(np.asarray, zip(*kept))
    return r, a


def read_markers(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """(r_star, A_star) of every equilibrium row; may be empty."""
    rows = _read_rows(path, _EQ_HEADER)
    if not rows:
        return np.empty(0), np.empty(0)
    r = np.asarray([float(row["r_star"]) for row in rows])
    a = np.asarray([float(row["A_star"]) for row in rows])
    return r, a


def _split_at(r: np.ndarray, a: np.ndarray, cuts) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a curve into branches so it is never drawn across a pole."""
    order = np.argsort(r)
    r, a = r[order], a[order]
    edges = sorted(c for c in cuts if r[0] < c < r[-1])
    pieces = []
    lo = 0
    for cut in edges:
        hi = int(np.searchsorted(r, cut))
        if hi > lo:
            pieces.append((r[lo:hi], a[lo:hi]))
        lo = hi
    pieces.append((r[lo:], a[lo:]))
    return [piece for piece in pieces if piece[0].size > 0]


def build_figure(spec: FigureSpec) -> plt.Figure:
    """Assemble the matplotlib figure; drawing only, no numerics."""
    demand_r, demand_a = read_curve(spec.demand_csv)
    supply_r, supply_a = read_curve(spec.supply_csv)
    marker_r, marker_a = read_markers(spec.equilibria_csv)

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(demand_r, demand_a, color="tab:blue", lw=1.8, label=spec.demand_label)
    for i, (piece_r, piece_a) in enumerate(_split_at(supply_r, supply_a, spec.asymptotes)):
        ax.plot(
            piece_r, piece_a, color="tab:red", lw=1.6,
            label=spec.supply_label if i == 0 else None,
        )
    for position in spec.asymptotes:
        ax.axvline(position, color="gray", ls="--", lw=0.9)
    if marker_r.size:
        ax.plot(
            marker_r, marker_a, "o", color="black", ms=7, zorder=5,
            label="equilibria", mfc="none", mew=1.6,
        )

    if spec.xlim is not None:
        ax.set_xlim(*spec.xlim)
    else:
        ax.set_xlim(demand_r.min(), demand_r.max())
    if spec.ylim is not None:
        ax.set_ylim(*spec.ylim)
    else:
        top = max(demand_a.max(), marker_a.max() if marker_a.size else 0.0)
        ax.set_ylim(min(0.0, demand_a.min()) - 0.05 * top, 1.25 * top + 1e-9)
    ax.set_xlabel("interest rate r")
    ax.set_ylabel("aggregate assets")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(frameon=False, loc="upper left")
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> list[Path]:
    """Write one raster and one vector image; returns the paths."""
    fig = build_figure(spec)
    written = []
    for fmt in spec.formats:
        out = spec.output_stem.with_suffix(f".{fmt}")
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=150)
        written.append(out)
    plt.close(fig)
    return written
