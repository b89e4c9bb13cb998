"""Readers for the run artifacts (CSV tables and summary.json).

The CSV header row is the schema; loaders check for the columns a figure
needs and fail with the missing column's name.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Sequence

import numpy as np


class FigureError(Exception):
    """Anything that prevents a figure from being rendered."""


class SchemaMismatch(FigureError):
    """An input table lacks a column the figure needs."""

    def __init__(self, path, column: str):
        self.path = str(path)
        self.column = column
        super().__init__(f"{path}: missing column {column!r}")


def load_table(path, required: Sequence[str]) -> Dict[str, np.ndarray]:
    """Read a CSV into a dict of float columns, checking `required` names."""
    try:
        with open(path, "r", newline="") as fh:
            header = fh.readline().strip().split(",")
            for col in required:
                if col not in header:
                    raise SchemaMismatch(path, col)
            try:
                data = np.loadtxt(fh, delimiter=",", ndmin=2)
            except ValueError as exc:
                raise FigureError(f"{path}: unreadable rows ({exc})") from exc
    except FileNotFoundError as exc:
        raise FigureError(f"no such input file: {path}") from exc
    if data.size == 0:
        raise FigureError(f"{path}: no data rows")
    if data.shape[1] != len(header):
        raise FigureError(f"{path}: rows have {data.shape[1]} fields, "
                          f"header has {len(header)}")
    return {name: data[:, i] for i, name in enumerate(header)}


def load_summary(path) -> dict:
    try:
        with open(path, "r") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise FigureError(f"no such summary file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise FigureError(f"{path}: not valid JSON ({exc})") from exc


def orbit_matrix(tab: Dict[str, np.ndarray], column: str):
    """Pivot an orbit-major table onto its shared checkpoint grid.

    Returns (grid, values) with values[i, k] the column for orbit i at
    checkpoint grid[k].
    """
    ids = tab["orbit_id"].astype(np.int64)
    ns = tab["checkpoint_n"]
    grid = ns[ids == ids[0]]
    k, m = grid.size, int(ids.max()) + 1
    if ids.size != m * k or not np.all(ns.reshape(m, k) == grid):
        raise FigureError("orbits do not share one checkpoint grid")
    return grid, tab[column].reshape(m, k)
