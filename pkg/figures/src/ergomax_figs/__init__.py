"""Publication-style diagnostic figures for ergomax run artifacts."""

from .io import FigureError, SchemaMismatch
from .render import FIGURE_KINDS, FigureResult, FigureSpec, render

__all__ = [
    "FIGURE_KINDS",
    "FigureError",
    "FigureResult",
    "FigureSpec",
    "SchemaMismatch",
    "render",
]
