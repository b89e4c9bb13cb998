"""Run experiments from a config and leave replayable artifacts on disk.

Determinism contract: orbit i draws from Philox(key=[seed + i, 0]); the
master stream (target picking, empirical calibration) uses key=[seed, 1].
Orbits are farmed out to a thread pool but collected in index order, so the
CSV artifacts are byte-identical for any worker count, and replay() can
re-run a summary's config and compare row by row.
"""

from __future__ import annotations

import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from .. import __version__
from ..asymptotics import (SequenceSpec, TailModel, band_occupancy,
                           classify_sequence, dichotomy_detector, growth_ratio,
                           iid_max_series)
from ..dynamics import (MapSystem, from_id, orbit_array, orbit_chunks,
                        periodic_points, pick_target)
from ..errors import (ConfigInvalid, InsufficientMass, InsufficientRange,
                      ParameterError, ReplayMismatch)
from ..measure import (EmpiricalMeasure, annulus_regularity, correlation_decay,
                       local_dimension)
from ..observables import (MaxAccumulator, Observable, apply_profile,
                           default_checkpoints, distances)
from ..targets import (AnalyticLebesgue1D, TargetSchedule,
                       calibration_from_orbit, hit_stats, radius_for_measure,
                       sbc_error_fit, short_return_stat)
from . import csvio
from .config import (ExperimentConfig, SequenceSpecConfig, config_hash,
                     from_dict, to_dict, to_toml, validate)

SUMMARY_FILE = "summary.json"
CONFIG_FILE = "config.toml"
MAX_SERIES_FILE = "max_series.csv"
HIT_STATS_FILE = "hit_stats.csv"
DIMENSION_FILE = "dimension.csv"
DECAY_FILE = "decay.csv"
CLASSIFY_FILE = "classify.csv"

RUN_KINDS_HELP = {
    "simulate": "running maxima of a distance observable along map orbits",
    "bc": "shrinking-target hit counts against prescribed mass",
    "dim": "local dimension and annulus regularity of the empirical measure",
    "decay": "correlation decay class along one orbit",
    "iid": "running maxima of iid draws from a tail model",
    "classify": "summability trichotomy of a threshold sequence",
}

SHORT_RETURN_MASS = 0.01      # diagnostic ball holds 1% of the measure
SHORT_RETURN_PROBE = 10 ** 5

_DEFAULT_LAG_RATIO = 1.3
_DEFAULT_LAG_MAX = 1000


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit argument, else ERGOMAX_WORKERS, else the CPU count."""
    if workers is not None:
        if workers < 1:
            raise ParameterError("workers must be >= 1")
        return int(workers)
    env = os.environ.get("ERGOMAX_WORKERS", "").strip()
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ConfigInvalid("ERGOMAX_WORKERS", f"not an integer: {env!r}") from None
        if w < 1:
            raise ConfigInvalid("ERGOMAX_WORKERS", "must be >= 1")
        return w
    return os.cpu_count() or 1


def orbit_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.Philox(key=[seed + index, 0]))


def master_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.Philox(key=[seed, 1]))


def _initial_state(system: MapSystem, rng: np.random.Generator):
    if system.dim == 1:
        return rng.random()
    return np.array([0.1, 0.1]) + 0.05 * (rng.random(2) - 0.5)


def _seq(sc: SequenceSpecConfig) -> SequenceSpec:
    return SequenceSpec(sc.kind, eta=sc.eta, beta=sc.beta, p=sc.p,
                        polylog=sc.polylog)


def _tail_model(config: ExperimentConfig) -> TailModel:
    return TailModel(config.model.kind, gamma=config.model.gamma)


def _checkpoints(config: ExperimentConfig) -> np.ndarray:
    cc = config.checkpoints
    if cc.kind == "explicit":
        return np.asarray(cc.explicit, dtype=np.int64)
    return default_checkpoints(config.n_max, cc.ratio)


def _exact_period_points(system: MapSystem, period: int) -> np.ndarray:
    pts = periodic_points(system, period)
    if period > 1:
        below = set(periodic_points(system, period - 1).tolist())
        pts = np.array([p for p in pts.tolist() if p not in below])
    return pts


def _resolve_target(config: ExperimentConfig, system: MapSystem,
                    master: np.random.Generator) -> np.ndarray:
    tc = config.target
    if tc.mode == "explicit":
        return np.asarray(tc.point, dtype=np.float64)
    if tc.mode == "periodic":
        pts = _exact_period_points(system, tc.period)
        if pts.size == 0:
            raise ConfigInvalid("target.period",
                                f"no tabulated period-{tc.period} points for {system.id}")
        interior = pts[(pts > 0.0) & (pts < 1.0)]
        return np.array([float(interior[0] if interior.size else pts[0])])
    return pick_target(system, master, tc.exclusion_radius,
                       settle=config.burn_in)


def _build_observable(config: ExperimentConfig, target: np.ndarray) -> Observable:
    oc = config.observable
    return Observable(oc.kind, target, alpha=oc.alpha, cap=oc.cap,
                      eps_floor=oc.eps_floor)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)  # JSON has no inf/nan
    return value


@dataclass(frozen=True)
class RunSummary:
    kind: str
    out_dir: str
    config_hash: str
    files: tuple
    verdicts: dict
    counters: dict
    resolved_target: Optional[tuple]
    wall_time_s: float

    @property
    def summary_path(self) -> Path:
        return Path(self.out_dir) / SUMMARY_FILE


# --- per-kind drivers ----------------------------------------------------------


def _series_analysis(ensemble, analysis):
    """Shared ratio/band/dichotomy verdict block for max-series ensembles."""
    verdicts = {}
    ratios = None
    in_band = None
    cps = ensemble[0].checkpoints

    if analysis.ratio_u is not None:
        spec = _seq(analysis.ratio_u)
        u = spec.evaluate(cps)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios = [s.values / u for s in ensemble]
        try:
            fits = [growth_ratio(s, spec, analysis.tail_fraction) for s in ensemble]
            verdicts["growth"] = {
                "limit_hats": [f.limit_hat for f in fits],
                "median_limit": float(np.median([f.limit_hat for f in fits])),
                "spreads": [f.spread for f in fits],
                "tail_fraction": analysis.tail_fraction,
                "n_window": fits[0].n_window,
            }
        except InsufficientRange as e:
            verdicts["growth"] = {"skipped": str(e)}
        if analysis.dichotomy:
            try:
                v = dichotomy_detector(ensemble, spec)
                verdicts["dichotomy"] = {
                    "kind": v.kind,
                    "c_hat": v.c_hat,
                    "rel_spread": v.rel_spread,
                    "median_window_spread": v.median_window_spread,
                    "median_full_span": v.median_full_span,
                    "frac_big_span": v.frac_big_span,
                    "span_growth": v.span_growth,
                    "boundaries": v.boundaries,
                }
            except (ParameterError, InsufficientRange) as e:
                verdicts["dichotomy"] = {"skipped": str(e)}

    if analysis.band_lower is not None and analysis.band_upper is not None:
        lo_spec = _seq(analysis.band_lower)
        hi_spec = _seq(analysis.band_upper)
        n_min = max(analysis.band_n_min, 3)
        sel = cps >= n_min
        lo = lo_spec.evaluate(cps[sel])
        hi = hi_spec.evaluate(cps[sel])
        in_band = []
        for s in ensemble:
            ib = np.ones(cps.size, dtype=bool)   # inside by convention pre-band
            ib[sel] = (s.values[sel] >= lo) & (s.values[sel] <= hi)
            in_band.append(ib)
        occ = [band_occupancy(s, lo_spec, hi_spec, analysis.band_n_min)
               for s in ensemble]
        verdicts["band"] = {
            "frac_inside": [o.frac_inside for o in occ],
            "mean_frac_inside": float(np.mean([o.frac_inside for o in occ])),
            "min_frac_inside": float(np.min([o.frac_inside for o in occ])),
            "last_violations": [o.last_violation for o in occ],
            "n_checked": occ[0].n_checked,
            "n_min": analysis.band_n_min,
        }
    return verdicts, ratios, in_band


def _run_simulate(config: ExperimentConfig, out: Path, workers: int):
    system = from_id(config.map.id, config.map.params, config.map.jitter)
    cps = _checkpoints(config)
    target = _resolve_target(config, system, master_rng(config.seed))
    obs = _build_observable(config, target)

    def one_orbit(i: int):
        rng = orbit_rng(config.seed, i)
        x0 = _initial_state(system, rng)
        acc = MaxAccumulator(cps)
        clamped = 0
        for chunk in orbit_chunks(system, x0, config.n_max, config.burn_in, rng):
            vals, c = apply_profile(obs, distances(obs, chunk))
            clamped += c
            acc.push(vals)
        return acc.finalize(), clamped

    with ThreadPoolExecutor(max_workers=workers) as ex:
        results = list(ex.map(one_orbit, range(config.n_orbits)))
    ensemble = [r[0] for r in results]
    clamp_total = sum(r[1] for r in results)

    verdicts, ratios, in_band = _series_analysis(ensemble, config.analysis)
    csvio.write_max_series(out / MAX_SERIES_FILE, ensemble, ratios, in_band)
    counters = {"clamp_hits": clamp_total,
                "records_total": int(sum(s.record_times.size for s in ensemble))}
    return [MAX_SERIES_FILE], verdicts, counters, target


def _run_iid(config: ExperimentConfig, out: Path, workers: int):
    model = _tail_model(config)
    cps = _checkpoints(config)

    def one_stream(i: int):
        return iid_max_series(model, config.n_max, config.seed + i, cps)

    with ThreadPoolExecutor(max_workers=workers) as ex:
        ensemble = list(ex.map(one_stream, range(config.n_orbits)))
    verdicts, ratios, in_band = _series_analysis(ensemble, config.analysis)
    csvio.write_max_series(out / MAX_SERIES_FILE, ensemble, ratios, in_band)
    counters = {"records_total": int(sum(s.record_times.size for s in ensemble))}
    return [MAX_SERIES_FILE], verdicts, counters, None


def _run_bc(config: ExperimentConfig, out: Path, workers: int):
    system = from_id(config.map.id, config.map.params, config.map.jitter)
    cps = _checkpoints(config)
    master = master_rng(config.seed)
    target = _resolve_target(config, system, master)
    sc = config.schedule
    if sc.measure == "analytic":
        model = AnalyticLebesgue1D(float(target[0]))
    else:
        model = calibration_from_orbit(system, target, sc.calibration_n,
                                       master, config.burn_in)
    schedule = TargetSchedule(sc.rule, model, beta=sc.beta)

    def one_orbit(i: int):
        rng = orbit_rng(config.seed, i)
        x0 = _initial_state(system, rng)
        chunks = orbit_chunks(system, x0, config.n_max, config.burn_in, rng)
        return hit_stats(chunks, schedule, cps)

    with ThreadPoolExecutor(max_workers=workers) as ex:
        ensemble = list(ex.map(one_orbit, range(config.n_orbits)))
    csvio.write_hit_stats(out / HIT_STATS_FILE, ensemble)

    verdicts = {}
    e_final = float(ensemble[0].e_values[-1])
    e_lo = config.analysis.fit_e_min
    e_hi = config.analysis.fit_e_max
    if e_lo is None:
        e_lo = max(1.0, e_final * 10 ** -2.5)
    if e_hi is None:
        e_hi = e_final
    try:
        fit = sbc_error_fit(ensemble, (e_lo, e_hi))
        verdicts["sbc"] = {
            "slope": fit.slope,
            "r_squared": fit.r_squared,
            "stderr": fit.stderr,
            "n_points": fit.n_points,
            "e_range": list(fit.e_range),
        }
    except (ParameterError, InsufficientRange) as e:
        verdicts["sbc"] = {"skipped": str(e)}

    if config.analysis.short_return:
        r = radius_for_measure(model, SHORT_RETURN_MASS)
        sr = short_return_stat(system, target, r, config.analysis.short_return_k_max,
                               min(SHORT_RETURN_PROBE, config.n_max),
                               config.analysis.short_return_alpha,
                               seed=config.seed, burn_in=config.burn_in)
        verdicts["short_return"] = {
            "nu_hat": sr.nu_hat,
            "ratios": sr.ratios,
            "flagged_lags": sr.flagged_lags,
            "alpha": sr.alpha,
            "radius": r,
        }

    counters = {"truncations": int(sum(h.truncations for h in ensemble))}
    return [HIT_STATS_FILE], verdicts, counters, target


def _run_dim(config: ExperimentConfig, out: Path, workers: int):
    system = from_id(config.map.id, config.map.params, config.map.jitter)
    target = _resolve_target(config, system, master_rng(config.seed))

    def one_orbit(i: int):
        rng = orbit_rng(config.seed, i)
        return orbit_array(system, _initial_state(system, rng),
                           config.n_max, config.burn_in, rng)

    with ThreadPoolExecutor(max_workers=workers) as ex:
        blocks = list(ex.map(one_orbit, range(config.n_orbits)))
    m = EmpiricalMeasure(np.concatenate(blocks))

    a = config.analysis
    grid = a.r_max * 10.0 ** -np.linspace(0.0, a.r_decades, a.r_points)
    fit = local_dimension(m, target, grid)
    csvio.write_dimension(out / DIMENSION_FILE, fit.radii, fit.masses)
    verdicts = {"dimension": {
        "d_hat": fit.d_hat,
        "stderr": fit.stderr,
        "r_squared": fit.r_squared,
        "n_points": int(fit.radii.size),
    }}
    eps_grid = a.annulus_r * 10.0 ** -np.linspace(0.0, a.r_decades, a.r_points)
    try:
        ann = annulus_regularity(m, target, a.annulus_r, eps_grid)
        verdicts["annulus"] = {
            "delta_hat": ann.delta_hat,
            "c_hat": ann.c_hat,
            "r_squared": ann.r_squared,
            "stderr": ann.stderr,
        }
    except (InsufficientMass, InsufficientRange, ParameterError) as e:
        verdicts["annulus"] = {"skipped": str(e)}
    counters = {"samples": m.size}
    return [DIMENSION_FILE], verdicts, counters, target


_HALF = 0.5


def _decay_pair(name: str):
    def first_coord(x):
        return x if x.ndim == 1 else x[:, 0]

    if name == "identity":
        g = first_coord
    elif name == "dist_half":
        def g(x):
            return np.abs(first_coord(x) - _HALF)
    elif name == "square":
        def g(x):
            return first_coord(x) ** 2
    else:  # laminar
        def g(x):
            return (first_coord(x) < _HALF).astype(np.float64)
    return g, g


def _default_lags() -> np.ndarray:
    ks = np.arange(0, int(math.log(_DEFAULT_LAG_MAX) / math.log(_DEFAULT_LAG_RATIO)) + 1)
    lags = np.unique(np.ceil(_DEFAULT_LAG_RATIO ** ks).astype(np.int64))
    return lags[lags <= _DEFAULT_LAG_MAX]


def _run_decay(config: ExperimentConfig, out: Path, workers: int):
    system = from_id(config.map.id, config.map.params, config.map.jitter)
    rng = orbit_rng(config.seed, 0)
    orb = orbit_array(system, _initial_state(system, rng),
                      config.n_max, config.burn_in, rng)
    lags = (np.asarray(config.analysis.lags, dtype=np.int64)
            if config.analysis.lags else _default_lags())
    est = correlation_decay(orb, _decay_pair(config.analysis.decay_pair), lags)
    csvio.write_decay(out / DECAY_FILE, est.lags, est.c_hat)
    verdicts = {"decay": {
        "klass": est.klass,
        "rate": est.rate,
        "r2_exponential": est.r2_exponential,
        "r2_polynomial": est.r2_polynomial,
        "noise_floor": est.noise_floor,
        "n_fit_lags": int(est.fit_lags.size),
        "pair": config.analysis.decay_pair,
    }}
    return [DECAY_FILE], verdicts, {}, None


def _run_classify(config: ExperimentConfig, out: Path, workers: int):
    model = _tail_model(config)
    spec = _seq(config.analysis.ratio_u)
    cls = classify_sequence(model, spec, horizon=config.n_max)
    csvio.write_classify(out / CLASSIFY_FILE, cls.horizons, cls.a_partial,
                         cls.b_partial)
    verdicts = {"classification": {
        "kind": cls.kind,
        "method": cls.method,
        "a_final": float(cls.a_partial[-1]),
        "b_final": float(cls.b_partial[-1]),
    }}
    return [CLASSIFY_FILE], verdicts, {}, None


_DRIVERS = {
    "simulate": _run_simulate,
    "iid": _run_iid,
    "bc": _run_bc,
    "dim": _run_dim,
    "decay": _run_decay,
    "classify": _run_classify,
}


def run(config: ExperimentConfig, workers: Optional[int] = None) -> RunSummary:
    """Execute one experiment, writing artifacts under config.out_dir.

    Artifacts: config.toml (resolved config echo), one data CSV per kind,
    and summary.json holding verdicts, counters, versions and the config
    hash. Returns the RunSummary that summary.json serialises.
    """
    validate(config)
    w = resolve_workers(workers)
    t0 = time.perf_counter()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(to_toml(config))

    files, verdicts, counters, target = _DRIVERS[config.kind](config, out, w)
    wall = time.perf_counter() - t0

    summary = RunSummary(
        kind=config.kind,
        out_dir=str(out),
        config_hash=config_hash(config),
        files=tuple([CONFIG_FILE] + files),
        verdicts=_jsonable(verdicts),
        counters=_jsonable(counters),
        resolved_target=(tuple(float(t) for t in target)
                         if target is not None else None),
        wall_time_s=wall,
    )
    payload = {
        "kind": summary.kind,
        "config_hash": summary.config_hash,
        "config": to_dict(config),
        "files": list(summary.files),
        "verdicts": summary.verdicts,
        "counters": summary.counters,
        "resolved_target": (list(summary.resolved_target)
                            if summary.resolved_target else None),
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "ergomax": __version__,
        },
        "workers": w,
        "wall_time_s": wall,
    }
    (out / SUMMARY_FILE).write_text(json.dumps(payload, indent=2) + "\n")
    return summary


def replay(summary_path, workers: Optional[int] = None) -> RunSummary:
    """Re-run a summary's config into a scratch dir and compare every CSV
    artifact row by row against the original. ReplayMismatch on the first
    difference (or on a tampered config hash)."""
    spath = Path(summary_path)
    payload = json.loads(spath.read_text())
    config = from_dict(payload["config"])
    stored = payload["config_hash"]
    if config_hash(config) != stored:
        raise ReplayMismatch(SUMMARY_FILE, None,
                             "config hash does not match the stored config")
    src = spath.parent
    with tempfile.TemporaryDirectory(prefix="ergomax-replay-") as tmp:
        fresh = run(replace(config, out_dir=str(Path(tmp) / "rerun")), workers)
        for name in payload["files"]:
            if not name.endswith(".csv"):
                continue
            old = (src / name).read_text().splitlines()
            new = (Path(fresh.out_dir) / name).read_text().splitlines()
            for i, (a, b) in enumerate(zip(old, new)):
                if a != b:
                    raise ReplayMismatch(name, i + 1, f"{a!r} != {b!r}")
            if len(old) != len(new):
                raise ReplayMismatch(name, min(len(old), len(new)) + 1,
                                     f"row counts differ ({len(old)} vs {len(new)})")
    return fresh
