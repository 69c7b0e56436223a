"""Figure rendering for the bewley solver's CSV output."""

from .figures import (
    EmptyInput,
    FigureSpec,
    PlotError,
    SchemaMismatch,
    build_figure,
    read_curve,
    read_markers,
    render,
)

__version__ = "0.1.0"

__all__ = [
    "EmptyInput",
    "FigureSpec",
    "PlotError",
    "SchemaMismatch",
    "build_figure",
    "read_curve",
    "read_markers",
    "render",
]
