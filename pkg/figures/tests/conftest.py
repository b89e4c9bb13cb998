import json

import numpy as np


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_max_series(path, grid, maxima, ratios=None, in_band=None):
    """Orbit-major table matching the primary writer's layout."""
    header = ["orbit_id", "checkpoint_n", "M_n"]
    if ratios is not None:
        header.append("ratio_u_n")
    if in_band is not None:
        header.append("in_band")
    rows = []
    for i, series in enumerate(maxima):
        for k, n in enumerate(grid):
            row = [i, int(n), repr(float(series[k]))]
            if ratios is not None:
                row.append(repr(float(ratios[i][k])))
            if in_band is not None:
                row.append(int(in_band[i][k]))
            rows.append(row)
    write_csv(path, header, rows)


def write_hit_stats(path, grid, s_counts, e_values):
    rows = []
    for i, s_row in enumerate(s_counts):
        for k, n in enumerate(grid):
            s, e = int(s_row[k]), float(e_values[k])
            rows.append([i, int(n), s, repr(e), repr(s - e)])
    write_csv(path, ["orbit_id", "checkpoint_n", "S_n", "E_n", "deviation"],
              rows)


def write_summary(path, verdicts, analysis=None):
    payload = {"kind": "synthetic", "verdicts": verdicts,
               "config": {"analysis": analysis or {}}}
    path.write_text(json.dumps(payload))


def planted_deviation_table(path, exponent=0.6, orbits=25, points=60):
    """S = round(E + E^exponent) on a log-spaced E grid, every orbit equal."""
    e = np.logspace(0.0, 4.0, points)
    s = np.round(e + e ** exponent)
    write_hit_stats(path, np.arange(1, points + 1),
                    [s.astype(int)] * orbits, e)
    return e, s
