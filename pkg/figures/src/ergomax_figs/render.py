"""The six figure kinds.

Each renderer is a pure view of its inputs: numbers shown on the figure are
taken from the run's summary.json when one is supplied, and anything computed
here (medians, the line drawn through already-plotted points) is a plotting
transform of data the primary component wrote.  Rendering never mutates the
inputs, and re-rendering the same spec byte-reproduces the image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import FigureError, load_summary, load_table, orbit_matrix

FIGURE_KINDS = (
    "RatioConvergence",
    "BandOccupancy",
    "SbcDeviation",
    "DimensionFit",
    "DecayFit",
    "DichotomyWindows",
)


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: Tuple[str, ...]
    output: str
    summary: Optional[str] = None
    options: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class FigureResult:
    output: str
    annotations: Mapping[str, object]


def _corner_text(ax, lines):
    ax.text(0.02, 0.98, "\n".join(lines), transform=ax.transAxes,
            va="top", ha="left", fontsize=8,
            bbox={"boxstyle": "round", "fc": "white", "alpha": 0.8})


def _verdict(spec, key) -> Optional[dict]:
    if spec.summary is None:
        return None
    return load_summary(spec.summary).get("verdicts", {}).get(key)


def _require_summary(spec, key) -> dict:
    if spec.summary is None:
        raise FigureError(f"{spec.kind} needs the run summary (--summary)")
    v = _verdict(spec, key)
    if v is None:
        raise FigureError(f"{spec.summary}: no {key!r} verdict in summary")
    return v


def _finite_median(values: np.ndarray) -> np.ndarray:
    """Columnwise median over finite entries; NaN where none are finite."""
    clean = np.where(np.isfinite(values), values, np.nan)
    med = np.full(values.shape[1], np.nan)
    good = np.isfinite(clean).any(axis=0)
    if good.any():
        med[good] = np.nanmedian(clean[:, good], axis=0)
    return med


def _ratio_convergence(spec, ax):
    reference = float(spec.options.get("reference", 1.0))
    med = None
    for j, path in enumerate(spec.inputs):
        tab = load_table(path, ["orbit_id", "checkpoint_n", "ratio_u_n"])
        grid, ratios = orbit_matrix(tab, "ratio_u_n")
        color = f"C{j % 10}"
        for row in ratios:
            ax.plot(grid, row, color=color, alpha=0.25, lw=0.7)
        cur = _finite_median(ratios)
        ax.plot(grid, cur, color=color, lw=2.0,
                label=f"ensemble median ({Path(path).name})")
        if med is None:
            med = cur
    ax.axhline(reference, color="0.3", ls="--", lw=1.0, label="reference")
    ax.set_xscale("log")
    ax.set_xlabel("checkpoint_n")
    ax.set_ylabel("M_n / u_n")
    ax.set_title("Running-max ratio convergence")
    ax.legend(loc="lower right", fontsize=8)
    finite = med[np.isfinite(med)]
    ann = {"median_final": float(med[-1]),
           "median_span": float(finite.max() - finite.min()),
           "reference": reference}
    _corner_text(ax, [f"final median = {ann['median_final']:.4g}",
                      f"median span = {ann['median_span']:.3g}"])
    return ann


def _eval_sequence(seq: dict, n: np.ndarray) -> np.ndarray:
    """Evaluate a config-echoed sequence family; NaN where undefined (n < 3)."""
    ok = n >= 3
    safe = np.where(ok, n.astype(float), 3.0)
    logn = np.log(safe)
    kind = seq.get("kind")
    if kind == "plain_log":
        out = logn
    elif kind == "pure_power":
        out = safe ** seq["p"] * logn ** seq.get("polylog", 0.0)
    elif kind == "log_plus_loglog":
        out = logn + seq["eta"] * np.log(logn)
    elif kind == "log_minus_loglog":
        out = logn - seq["beta"] * np.log(logn)
    else:
        raise FigureError(f"cannot draw sequence of kind {kind!r}")
    return np.where(ok, out, np.nan)


def _band_occupancy(spec, ax):
    band = _require_summary(spec, "band")
    cfg = load_summary(spec.summary)["config"]["analysis"]
    if "band_lower" not in cfg or "band_upper" not in cfg:
        raise FigureError(f"{spec.summary}: config has no band sequences")
    n_min = int(band["n_min"])

    tab = load_table(spec.inputs[0],
                     ["orbit_id", "checkpoint_n", "M_n", "in_band"])
    grid, maxima = orbit_matrix(tab, "M_n")
    _, in_band = orbit_matrix(tab, "in_band")

    low = _eval_sequence(cfg["band_lower"], grid)
    high = _eval_sequence(cfg["band_upper"], grid)
    show = np.isfinite(low) & np.isfinite(high)
    ax.fill_between(grid[show], low[show], high[show],
                    color="C2", alpha=0.2, label="occupancy band")

    for i, row in enumerate(maxima):
        ax.plot(grid, row, color="C0", alpha=0.25, lw=0.7)
        out = (in_band[i] == 0) & (grid >= n_min)
        if out.any():
            ax.plot(grid[out], row[out], "rx", ms=4, mew=1.0)
    ax.axvline(n_min, color="0.4", ls=":", lw=1.0)
    ax.set_xscale("log")
    ax.set_xlabel("checkpoint_n")
    ax.set_ylabel("M_n")
    ax.set_title("Band occupancy of the running max")
    ax.legend(loc="lower right", fontsize=8)

    last = [v for v in band["last_violations"] if v is not None]
    ann = {"mean_frac_inside": float(band["mean_frac_inside"]),
           "min_frac_inside": float(band["min_frac_inside"]),
           "last_violation_max": float(max(last)) if last else 0.0}
    _corner_text(ax, [f"mean frac inside = {ann['mean_frac_inside']:.4f}",
                      f"min frac inside = {ann['min_frac_inside']:.4f}",
                      f"last violation at n = {ann['last_violation_max']:.0f}"])
    return ann


def _sbc_deviation(spec, ax):
    tab = load_table(spec.inputs[0],
                     ["orbit_id", "checkpoint_n", "S_n", "E_n", "deviation"])
    _, e_vals = orbit_matrix(tab, "E_n")
    _, devs = orbit_matrix(tab, "deviation")
    e = e_vals[0]
    absdev = np.abs(devs)
    for row in absdev:
        ax.plot(e, row, color="C0", alpha=0.25, lw=0.7)
    med = np.median(absdev, axis=0)
    ax.plot(e, med, color="C1", lw=2.0, label="median |S - E|")

    verdict = _verdict(spec, "sbc")
    mask = (e > 1.0) & (med > 0.0)
    if mask.sum() < 2:
        raise FigureError("too few positive deviations to draw a trend")
    log_e, log_m = np.log(e[mask]), np.log(med[mask])
    if verdict is not None and "slope" in verdict:  # fits can be skipped
        slope = float(verdict["slope"])
        ann = {"slope": slope, "r_squared": float(verdict["r_squared"])}
    else:
        slope, _ = np.polyfit(log_e, log_m, 1)
        ann = {"slope": float(slope)}
    intercept = float(np.mean(log_m - slope * log_e))
    ax.plot(e[mask], np.exp(intercept) * e[mask] ** slope, "k--", lw=1.2,
            label=f"slope {slope:.3f}")

    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("E_n")
    ax.set_ylabel("|S_n - E_n|")
    ax.set_title("Hit-count deviation growth")
    ax.legend(loc="lower right", fontsize=8)
    _corner_text(ax, [f"slope = {slope:.3f}"])
    return ann


def _dimension_fit(spec, ax):
    tab = load_table(spec.inputs[0], ["r", "ball_mass", "log_r", "log_mass"])
    ok = np.isfinite(tab["log_mass"])
    log_r, log_m = tab["log_r"][ok], tab["log_mass"][ok]
    ax.plot(log_r, log_m, "o", color="C0", ms=4, label="ball masses")

    verdict = _verdict(spec, "dimension")
    if verdict is not None and "d_hat" in verdict:
        d_hat = float(verdict["d_hat"])
        ann = {"d_hat": d_hat, "stderr": float(verdict["stderr"])}
        label = f"d = {d_hat:.3f} ± {ann['stderr']:.3f}"
    else:
        d_hat, _ = np.polyfit(log_r, log_m, 1)
        ann = {"d_hat": float(d_hat)}
        label = f"d = {d_hat:.3f}"
    intercept = float(np.mean(log_m - d_hat * log_r))
    ax.plot(log_r, intercept + d_hat * log_r, "k--", lw=1.2, label=label)

    ax.set_xlabel("log r")
    ax.set_ylabel("log mass")
    ax.set_title("Local dimension fit")
    ax.legend(loc="lower right", fontsize=8)
    _corner_text(ax, [label])
    return ann


def _decay_fit(spec, ax):
    tab = load_table(spec.inputs[0], ["lag", "c_hat"])
    lags, c_hat = tab["lag"], np.abs(tab["c_hat"])
    ax.plot(lags, c_hat, "o-", color="C0", ms=4, lw=0.8, label="|c_hat|")

    ann = {}
    lines = []
    verdict = _verdict(spec, "decay")
    if verdict is not None:
        ann = {"klass": verdict["klass"], "rate": float(verdict["rate"]),
               "noise_floor": float(verdict["noise_floor"])}
        ax.axhline(ann["noise_floor"], color="0.4", ls=":", lw=1.0,
                   label="noise floor")
        lines = [f"class = {ann['klass']}", f"rate = {ann['rate']:.3f}"]
    ax.set_yscale("log")
    ax.set_xlabel("lag")
    ax.set_ylabel("|c_hat|")
    ax.set_title("Correlation decay")
    ax.legend(loc="upper right", fontsize=8)
    if lines:
        _corner_text(ax, lines)
    return ann


def _dichotomy_windows(spec, ax):
    verdict = _require_summary(spec, "dichotomy")
    if "kind" not in verdict:
        raise FigureError("dichotomy verdict was skipped: "
                          f"{verdict.get('skipped', 'no details')}")
    tab = load_table(spec.inputs[0], ["orbit_id", "checkpoint_n", "ratio_u_n"])
    grid, ratios = orbit_matrix(tab, "ratio_u_n")
    for row in ratios:
        ax.plot(grid, row, color="C0", alpha=0.3, lw=0.8)
    for b in verdict["boundaries"]:
        ax.axvline(b, color="0.5", ls="--", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("checkpoint_n")
    ax.set_ylabel("M_n / u_n")
    ax.set_title("Ratio behaviour across dyadic windows")

    ann = {"kind": verdict["kind"], "c_hat": verdict["c_hat"]}
    lines = [f"verdict = {ann['kind']}"]
    if ann["c_hat"] is not None:
        lines.append(f"c_hat = {float(ann['c_hat']):.3f}")
    _corner_text(ax, lines)
    return ann


_RENDERERS = {
    "RatioConvergence": _ratio_convergence,
    "BandOccupancy": _band_occupancy,
    "SbcDeviation": _sbc_deviation,
    "DimensionFit": _dimension_fit,
    "DecayFit": _decay_fit,
    "DichotomyWindows": _dichotomy_windows,
}

# keep written image bytes free of timestamps so re-rendering reproduces them
_STABLE_METADATA = {".svg": {"Date": None}, ".pdf": {"CreationDate": None}}


def render(spec: FigureSpec) -> FigureResult:
    """Draw one figure and write it to spec.output."""
    if spec.kind not in _RENDERERS:
        raise FigureError(f"unknown figure kind {spec.kind!r}; "
                          f"expected one of {', '.join(FIGURE_KINDS)}")
    if not spec.inputs:
        raise FigureError("no input files given")
    fig, ax = plt.subplots(figsize=(7.0, 4.5), dpi=150)
    try:
        annotations = _RENDERERS[spec.kind](spec, ax)
        for axis in ("xscale", "yscale"):
            if axis in spec.options:
                getattr(ax, f"set_{axis}")(spec.options[axis])
        fig.tight_layout()
        suffix = Path(spec.output).suffix.lower()
        fig.savefig(spec.output, metadata=_STABLE_METADATA.get(suffix))
    finally:
        plt.close(fig)
    return FigureResult(output=str(spec.output), annotations=annotations)
