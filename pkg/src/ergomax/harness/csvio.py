"""CSV artifact schemas and deterministic writers.

Formatting contract: integers plain, floats via repr (shortest exact
round-trip, platform-stable in CPython), newline "\n", header row always
present. Optional columns (ratio_u_n, in_band) appear only when the run
computed them; the header is the schema.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

MAX_SERIES_BASE = ["orbit_id", "checkpoint_n", "M_n"]
HIT_STATS_COLUMNS = ["orbit_id", "checkpoint_n", "S_n", "E_n", "deviation"]
DIMENSION_COLUMNS = ["r", "ball_mass", "log_r", "log_mass"]
DECAY_COLUMNS = ["lag", "c_hat"]
CLASSIFY_COLUMNS = ["horizon", "a_partial", "b_partial"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_rows(path: Path, header: Sequence[str],
               rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_max_series(path: Path, ensemble, ratios=None, in_band=None) -> None:
    """ensemble: list of MaxSeries (shared grid); ratios/in_band: optional
    per-orbit arrays aligned with the grid."""
    header = list(MAX_SERIES_BASE)
    if ratios is not None:
        header.append("ratio_u_n")
    if in_band is not None:
        header.append("in_band")

    def rows():
        for i, series in enumerate(ensemble):
            for j, n in enumerate(series.checkpoints):
                row = [i, int(n), series.values[j]]
                if ratios is not None:
                    row.append(ratios[i][j])
                if in_band is not None:
                    row.append(bool(in_band[i][j]))
                yield row

    write_rows(path, header, rows())


def write_hit_stats(path: Path, ensemble) -> None:
    def rows():
        for i, h in enumerate(ensemble):
            dev = h.deviations
            for j, n in enumerate(h.checkpoints):
                yield [i, int(n), int(h.s_counts[j]), h.e_values[j], dev[j]]

    write_rows(path, HIT_STATS_COLUMNS, rows())


def write_dimension(path: Path, radii, masses) -> None:
    rows = [[r, m, np.log(r), np.log(m)] for r, m in zip(radii, masses)]
    write_rows(path, DIMENSION_COLUMNS, rows)


def write_decay(path: Path, lags, c_hat) -> None:
    write_rows(path, DECAY_COLUMNS, zip(lags, c_hat))


def write_classify(path: Path, horizons, a_partial, b_partial) -> None:
    write_rows(path, CLASSIFY_COLUMNS, zip(horizons, a_partial, b_partial))
