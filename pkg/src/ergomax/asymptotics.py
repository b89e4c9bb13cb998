"""Verdicts on maximum-process ensembles and the iid reference theory.

Pieces: threshold sequences u_n (log-scale families and explicit tables),
tail models for iid baselines (exponential, Pareto, Gaussian), growth-ratio
and band-occupancy summaries of MaxSeries ensembles, a detector for the
limit/no-limit dichotomy of M_n/u_n, and a summability classifier for
(tail model, sequence) pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import (BandInverted, InsufficientRange, OutOfRange,
                     ParameterError)
from .observables import MaxAccumulator, MaxSeries, default_checkpoints

LOG_PLUS_LOGLOG = "log_plus_loglog"
LOG_MINUS_LOGLOG = "log_minus_loglog"
PURE_POWER = "pure_power"
PLAIN_LOG = "plain_log"
EXPLICIT_SEQ = "explicit"

SEQUENCE_KINDS = (LOG_PLUS_LOGLOG, LOG_MINUS_LOGLOG, PURE_POWER, PLAIN_LOG,
                  EXPLICIT_SEQ)

EXPONENTIAL = "exponential"
PARETO = "pareto"
GAUSSIAN = "gaussian"

# Sequence families built from log log n are only defined (and positive)
# from n = 3 on; evaluate() returns NaN below that.
SEQUENCE_N_MIN = 3


@dataclass(frozen=True)
class SequenceSpec:
    """A threshold/normalising sequence u_n.

    kinds: log n + eta log log n; log n - beta log log n; n^p (log n)^q;
    log n; or an explicit table (1-based).
    """

    kind: str
    eta: Optional[float] = None
    beta: Optional[float] = None
    p: Optional[float] = None
    polylog: float = 0.0
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in SEQUENCE_KINDS:
            raise ParameterError(f"unknown sequence kind {self.kind!r}")
        if self.kind == LOG_PLUS_LOGLOG and (self.eta is None or self.eta <= 0):
            raise ParameterError("log_plus_loglog needs eta > 0")
        if self.kind == LOG_MINUS_LOGLOG and (self.beta is None or self.beta <= 0):
            raise ParameterError("log_minus_loglog needs beta > 0")
        if self.kind == PURE_POWER and (self.p is None or self.p <= 0):
            raise ParameterError("pure_power needs p > 0")
        if self.kind == EXPLICIT_SEQ:
            if self.values is None:
                raise ParameterError("explicit sequence needs values")
            object.__setattr__(self, "values",
                               np.asarray(self.values, dtype=np.float64))

    def evaluate(self, n) -> np.ndarray:
        """u_n for an array of times; NaN where the family is undefined."""
        ns = np.asarray(n, dtype=np.float64)
        scalar = ns.ndim == 0
        ns = np.atleast_1d(ns)
        if self.kind == EXPLICIT_SEQ:
            idx = ns.astype(np.int64) - 1
            if np.any(idx < 0) or np.any(idx >= self.values.size):
                raise ParameterError("explicit sequence does not cover the requested times")
            out = self.values[idx]
            return float(out[0]) if scalar else out
        ok = ns >= SEQUENCE_N_MIN
        safe = np.where(ok, ns, 3.0)
        logn = np.log(safe)
        if self.kind == PLAIN_LOG:
            out = logn
        elif self.kind == PURE_POWER:
            out = safe ** self.p * logn ** self.polylog
        else:
            ll = np.log(logn)
            mult = self.eta if self.kind == LOG_PLUS_LOGLOG else -self.beta
            out = logn + mult * ll
        out = np.where(ok, out, np.nan)
        return float(out[0]) if scalar else out


def log_plus_loglog(eta: float) -> SequenceSpec:
    return SequenceSpec(LOG_PLUS_LOGLOG, eta=eta)


def log_minus_loglog(beta: float) -> SequenceSpec:
    return SequenceSpec(LOG_MINUS_LOGLOG, beta=beta)


def pure_power(p: float, polylog: float = 0.0) -> SequenceSpec:
    return SequenceSpec(PURE_POWER, p=p, polylog=polylog)


def plain_log() -> SequenceSpec:
    return SequenceSpec(PLAIN_LOG)


def explicit_sequence(values) -> SequenceSpec:
    return SequenceSpec(EXPLICIT_SEQ, values=values)


# --- tail models -------------------------------------------------------------


@dataclass(frozen=True)
class TailModel:
    """Reference iid distributions, by upper tail.

    exponential: F-bar(x) = e^-x on x >= 0
    pareto:      F-bar(x) = x^-gamma on x >= 1
    gaussian:    standard normal

    Sampling is inverse-CDF on the generator's uniform stream (one uniform
    per draw), which pins the byte-level determinism contract.
    """

    kind: str
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (EXPONENTIAL, PARETO, GAUSSIAN):
            raise ParameterError(f"unknown tail model {self.kind!r}")
        if self.kind == PARETO and (self.gamma is None or self.gamma <= 0):
            raise ParameterError("pareto needs gamma > 0")

    def tail(self, x) -> np.ndarray:
        xs = np.asarray(x, dtype=np.float64)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        if self.kind == EXPONENTIAL:
            out = np.where(xs >= 0, np.exp(-np.maximum(xs, 0.0)), 1.0)
        elif self.kind == PARETO:
            out = np.where(xs >= 1, np.maximum(xs, 1.0) ** -self.gamma, 1.0)
        else:
            out = special.ndtr(-xs)
        return float(out[0]) if scalar else out

    def quantile(self, p) -> np.ndarray:
        ps = np.asarray(p, dtype=np.float64)
        scalar = ps.ndim == 0
        ps = np.atleast_1d(ps)
        if np.any((ps < 0) | (ps >= 1)):
            raise OutOfRange("quantile needs p in [0, 1)")
        if self.kind == EXPONENTIAL:
            out = -np.log1p(-ps)
        elif self.kind == PARETO:
            out = (1.0 - ps) ** (-1.0 / self.gamma)
        else:
            out = special.ndtri(ps)
        return float(out[0]) if scalar else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.quantile(rng.random(size))


def exponential_tail() -> TailModel:
    return TailModel(EXPONENTIAL)


def pareto_tail(gamma: float) -> TailModel:
    return TailModel(PARETO, gamma=gamma)


def gaussian_tail() -> TailModel:
    return TailModel(GAUSSIAN)


def iid_max_series(model: TailModel, n: int, seed: int,
                   checkpoints=None, chunk_size: int = 1 << 17) -> MaxSeries:
    """Running max of n iid draws from the model, sampled at checkpoints.

    The draw stream is Philox(key=seed) uniforms through model.quantile, so
    it matches a sample-then-fold oracle exactly at any chunking.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    cps = (np.asarray(checkpoints, dtype=np.int64)
           if checkpoints is not None else default_checkpoints(n))
    rng = np.random.default_rng(np.random.Philox(key=seed))
    acc = MaxAccumulator(cps)
    left = n
    while left > 0:
        k = min(left, chunk_size)
        acc.push(model.quantile(rng.random(k)))
        left -= k
    return acc.finalize()


# --- ensemble verdicts --------------------------------------------------------


@dataclass(frozen=True)
class GrowthRatio:
    """Tail-window summary of M_n / u_n for one orbit."""

    limit_hat: float
    spread: float
    n_window: int


def growth_ratio(series: MaxSeries, spec: SequenceSpec,
                 tail_fraction: float = 0.25) -> GrowthRatio:
    """Mean and spread of M_{n_k}/u_{n_k} over the last tail_fraction of
    checkpoints (those with u defined and positive)."""
    if not (0.0 < tail_fraction <= 1.0):
        raise ParameterError("tail_fraction must lie in (0,1]")
    cps = series.checkpoints
    if cps.size < 20:
        raise InsufficientRange("growth_ratio needs >= 20 checkpoints")
    u = spec.evaluate(cps)
    ok = np.isfinite(u) & (u > 0)
    ratios = series.values[ok] / u[ok]
    k = max(1, math.ceil(tail_fraction * ratios.size))
    window = ratios[-k:]
    if window.size == 0:
        raise InsufficientRange("no checkpoints with positive u_n")
    return GrowthRatio(float(window.mean()),
                       float(window.max() - window.min()), int(window.size))


@dataclass(frozen=True)
class BandOccupancy:
    frac_inside: float
    last_violation: Optional[int]
    n_checked: int


def band_occupancy(series: MaxSeries, lower: SequenceSpec, upper: SequenceSpec,
                   n_min: int) -> BandOccupancy:
    """Fraction of checkpoints n_k >= n_min with lower(n_k) <= M <= upper(n_k),
    plus the last violating checkpoint (the empirical proxy for 'eventually')."""
    cps = series.checkpoints
    sel = cps >= max(n_min, SEQUENCE_N_MIN)
    if not np.any(sel):
        raise InsufficientRange(f"no checkpoints at or beyond n_min={n_min}")
    n = cps[sel]
    lo = lower.evaluate(n)
    hi = upper.evaluate(n)
    if np.any(lo >= hi):
        raise BandInverted("lower band meets or crosses upper band")
    m = series.values[sel]
    inside = (m >= lo) & (m <= hi)
    violations = n[~inside]
    return BandOccupancy(float(inside.mean()),
                         int(violations[-1]) if violations.size else None,
                         int(n.size))


@dataclass(frozen=True)
class DichotomyThresholds:
    """Frozen detector constants; reported with every verdict."""

    window: int = 4                  # trailing dyadic boundaries for the limit test
    limit_rel_spread: float = 0.2    # median-trajectory spread must stay below
    limit_orbit_spread: float = 2.0  # median per-orbit max/min over the window
    nolimit_span: float = 5.0        # per-orbit full-history max/min ratio
    nolimit_frac: float = 0.5        # fraction of orbits that must exceed it
    nolimit_growth: float = 1.2      # full spans must exceed half spans by this


@dataclass(frozen=True)
class DichotomyVerdict:
    kind: str                        # "limit" | "no_limit" | "inconclusive"
    c_hat: Optional[float]
    boundaries: np.ndarray
    rel_spread: float
    median_window_spread: float
    median_full_span: float
    frac_big_span: float
    span_growth: float
    thresholds: DichotomyThresholds


def _dyadic_boundaries(cps: np.ndarray) -> np.ndarray:
    """Largest checkpoint at or below each power of two in range."""
    lo = max(8, int(cps[cps >= SEQUENCE_N_MIN][0]) if np.any(cps >= SEQUENCE_N_MIN) else 8)
    out = []
    j = int(math.ceil(math.log2(lo)))
    while 2 ** j <= cps[-1]:
        under = cps[cps <= 2 ** j]
        if under.size:
            out.append(int(under[-1]))
        j += 1
    return np.unique(np.array(out, dtype=np.int64))


def dichotomy_detector(ensemble: Sequence[MaxSeries], spec: SequenceSpec,
                       thresholds: DichotomyThresholds = DichotomyThresholds()
                       ) -> DichotomyVerdict:
    """Decide whether M_n/u_n looks convergent (limit) or degenerate
    (limsup/liminf splitting to infinity/zero) across an orbit ensemble.

    Ratios are read at dyadic window boundaries. A limit verdict needs the
    ensemble-median trajectory flat over the trailing window AND per-orbit
    ratios concentrated there; a no-limit verdict needs most orbits to sweep
    a wide max/min ratio over their full history, with spans still growing
    between the half and full horizon.
    """
    if len(ensemble) < 30:
        raise ParameterError("dichotomy detector needs >= 30 orbits")
    base = ensemble[0].checkpoints
    for s in ensemble[1:]:
        if not np.array_equal(s.checkpoints, base):
            raise ParameterError("ensemble must share one checkpoint grid")
    bounds = _dyadic_boundaries(base)
    u = spec.evaluate(bounds)
    ok = np.isfinite(u) & (u > 0)
    bounds, u = bounds[ok], u[ok]
    if bounds.size < 6:
        raise InsufficientRange("need >= 6 dyadic window boundaries")
    pos = np.searchsorted(base, bounds)
    ratios = np.stack([s.values[pos] for s in ensemble]) / u  # orbits x bounds
    t = thresholds

    w = min(t.window, bounds.size)
    win = ratios[:, -w:]
    med_traj = np.median(win, axis=0)
    center = float(np.median(med_traj))
    rel_spread = float((med_traj.max() - med_traj.min()) / abs(center)) \
        if center != 0 else float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        win_min = win.min(axis=1)
        window_spreads = np.where(win_min > 0, win.max(axis=1) / win_min, np.inf)
        full_min = ratios.min(axis=1)
        full_spans = np.where(full_min > 0, ratios.max(axis=1) / full_min, np.inf)
        half = ratios[:, : max(2, bounds.size // 2)]
        half_min = half.min(axis=1)
        half_spans = np.where(half_min > 0, half.max(axis=1) / half_min, np.inf)
    median_window_spread = float(np.median(window_spreads))
    median_full_span = float(np.median(full_spans))
    median_half_span = float(np.median(half_spans))
    frac_big = float(np.mean(full_spans > t.nolimit_span))
    growth = median_full_span / median_half_span if median_half_span > 0 else float("inf")

    is_limit = (rel_spread < t.limit_rel_spread
                and median_window_spread < t.limit_orbit_spread)
    is_nolimit = frac_big >= t.nolimit_frac and growth > t.nolimit_growth
    if is_limit and not is_nolimit:
        kind, c_hat = "limit", center
    elif is_nolimit and not is_limit:
        kind, c_hat = "no_limit", None
    else:
        kind, c_hat = "inconclusive", None
    return DichotomyVerdict(kind, c_hat, bounds, rel_spread,
                            median_window_spread, median_full_span, frac_big,
                            float(growth), t)


# --- summability classification ----------------------------------------------


@dataclass(frozen=True)
class SequenceClassification:
    """Verdict on (tail model, sequence): where u_n sits in the trichotomy.

    upper: sum F-bar(u_n) converges (M_n <= u_n eventually, a.s.)
    lower: it diverges but sum F-bar e^{-n F-bar} converges (u_n <= M_n i.o. side)
    intermediate: both diverge
    """

    kind: str                 # "upper" | "lower" | "intermediate"
    method: str               # "analytic" | "heuristic"
    horizons: np.ndarray
    a_partial: np.ndarray     # partial sums of F-bar(u_n)
    b_partial: np.ndarray     # partial sums of F-bar(u_n) e^{-n F-bar(u_n)}


def _partial_sums(model: TailModel, spec: SequenceSpec,
                  horizons: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.zeros(horizons.size)
    b = np.zeros(horizons.size)
    a_run = b_run = 0.0
    prev = SEQUENCE_N_MIN - 1
    chunk = 1 << 19
    for i, h in enumerate(horizons):
        n = prev
        while n < h:
            k = min(chunk, h - n)
            ns = np.arange(n + 1, n + k + 1, dtype=np.float64)
            fbar = model.tail(spec.evaluate(ns))
            a_run += float(fbar.sum())
            b_run += float((fbar * np.exp(-ns * fbar)).sum())
            n += k
        a[i], b[i] = a_run, b_run
        prev = int(h)
    return a, b


def _looks_convergent(horizons: np.ndarray, partial: np.ndarray) -> bool:
    """Last-decade increment below 1% of the running total."""
    if partial[-1] <= 0:
        return True
    inc = partial[-1] - partial[-2]
    return inc < 0.01 * partial[-1]


def classify_sequence(model: TailModel, spec: SequenceSpec,
                      horizon: int = 10 ** 6) -> SequenceClassification:
    """Trichotomy classification of u_n against an iid tail model.

    Exponential-model log families have closed forms and are classified
    analytically (the partial sums are still tabulated for reporting):
    log n + eta log log n gives F-bar = 1/(n (log n)^eta), summable iff
    eta > 1; log n - beta log log n gives F-bar = (log n)^beta / n, divergent,
    with n F-bar = (log n)^beta so the damped series converges for any
    beta > 0; log n alone leaves both series divergent. Everything else runs
    on the partial-sum increment heuristic.
    """
    if horizon < 10 ** 6:
        raise ParameterError("classification horizon must be >= 10^6")
    decades = int(math.floor(math.log10(horizon)))
    horizons = np.unique(np.array(
        [10 ** d for d in range(4, decades + 1)] + [horizon], dtype=np.int64))
    a, b = _partial_sums(model, spec, horizons)

    if model.kind == EXPONENTIAL:
        if spec.kind == LOG_PLUS_LOGLOG:
            kind = "upper" if spec.eta > 1.0 else "intermediate"
            return SequenceClassification(kind, "analytic", horizons, a, b)
        if spec.kind == LOG_MINUS_LOGLOG:
            return SequenceClassification("lower", "analytic", horizons, a, b)
        if spec.kind == PLAIN_LOG:
            return SequenceClassification("intermediate", "analytic", horizons, a, b)

    if _looks_convergent(horizons, a):
        kind = "upper"
    elif _looks_convergent(horizons, b):
        kind = "lower"
    else:
        kind = "intermediate"
    return SequenceClassification(kind, "heuristic", horizons, a, b)
