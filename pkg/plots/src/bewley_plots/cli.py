"""`bewley-plot <figure-name> --in <dir> --out <dir>`.

Expects the solver's figure sets: <name>_demand.csv, <name>_supply.csv
and <name>_equilibria.csv inside the input directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FigureSpec, PlotError, render

_LABELS = {
    "fig1": ("bond demand A(r, tau)", "bond supply tau/r"),
    "fig2a": ("bond demand A(r, tau)", "bond supply tau/r"),
    "fig2b": ("bond demand A(r, tau)", "bond supply tau/r"),
    "fig3a": ("asset demand A(r, 1, tau)", "capital + bond supply S(r)"),
    "fig3b": ("asset demand A(r, 1, tau)", "capital + bond supply S(r)"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bewley-plot",
        description="Render demand/supply figures from solver CSV output",
    )
    parser.add_argument("figure", help="figure set name, e.g. fig1 or fig3a")
    parser.add_argument("--in", dest="input_dir", required=True)
    parser.add_argument("--out", dest="output_dir", required=True)
    parser.add_argument(
        "--asymptotes", default="0",
        help="comma-separated vertical asymptote positions (default: 0)",
    )
    parser.add_argument("--title", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    input_dir = Path(args.input_dir)
    labels = _LABELS.get(args.figure, ("asset demand", "asset supply"))
    spec = FigureSpec(
        demand_csv=input_dir / f"{args.figure}_demand.csv",
        supply_csv=input_dir / f"{args.figure}_supply.csv",
        equilibria_csv=input_dir / f"{args.figure}_equilibria.csv",
        output_stem=Path(args.output_dir) / args.figure,
        demand_label=labels[0],
        supply_label=labels[1],
        asymptotes=tuple(float(tok) for tok in args.asymptotes.split(",")),
        title=args.title,
    )
    try:
        written = render(spec)
    except PlotError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
