"""Empirical-measure estimators: ball masses, local dimension, annulus
regularity, and correlation-decay classification.

All exponents come from scipy least-squares fits in log-log coordinates.
Count floors (50 per ball, 20 per annulus) guard the small-scale end; grids
are auto-trimmed before fitting and the fit refuses to run on fewer than 6
surviving points.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import InsufficientMass, InsufficientRange, ParameterError

BALL_COUNT_FLOOR = 50
ANNULUS_COUNT_FLOOR = 20
MIN_FIT_POINTS = 6
MIN_DECAY_LAGS = 4     # exponential mixing leaves few lags above noise
MIN_FIT_SAMPLES = 10 ** 5
NOISE_FLOOR_MULT = 5.0


class EmpiricalMeasure:
    """A point cloud standing in for the invariant measure.

    Samples are an (N,) or (N, d) float array (orbit states or synthetic
    draws). Distance lookups to a fixed center are served from a sorted
    cache, so repeated ball queries at one center are binary searches.
    Immutable after construction; safe for concurrent reads.
    """

    def __init__(self, samples: np.ndarray):
        arr = np.asarray(samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ParameterError("samples must be a nonempty (N,) or (N, d) array")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("samples contain non-finite entries")
        self._samples = arr
        self._samples.setflags(write=False)
        self._cache: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def size(self) -> int:
        return self._samples.shape[0]

    @property
    def dim(self) -> int:
        return self._samples.shape[1]

    def sorted_distances(self, center) -> np.ndarray:
        c = np.atleast_1d(np.asarray(center, dtype=np.float64))
        if c.shape != (self.dim,):
            raise ParameterError(f"center must have dimension {self.dim}")
        key = tuple(c.tolist())
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.dim == 1:
            d = np.abs(self._samples[:, 0] - c[0])
        else:
            d = np.sqrt(((self._samples - c) ** 2).sum(axis=1))
        d.sort()
        d.setflags(write=False)
        with self._lock:
            self._cache[key] = d
        return d


def ball_mass(m: EmpiricalMeasure, center, r: float) -> float:
    """Fraction of samples within distance r of center (closed ball)."""
    if r < 0:
        raise ParameterError("radius must be >= 0")
    d = m.sorted_distances(center)
    return float(np.searchsorted(d, r, side="right")) / m.size


@dataclass(frozen=True)
class DimensionFit:
    """Least-squares local dimension: slope of log mass against log r."""

    d_hat: float
    stderr: float
    r_squared: float
    radii: np.ndarray        # surviving grid (after count-floor trim)
    masses: np.ndarray


def local_dimension(m: EmpiricalMeasure, center, r_grid) -> DimensionFit:
    """Fit log nu(B(center, r)) ~ d * log r over a decreasing radius grid.

    Grid points whose balls hold fewer than BALL_COUNT_FLOOR samples are
    trimmed off; at least MIN_FIT_POINTS must survive and the input grid must
    span two decades.
    """
    grid = np.asarray(r_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < MIN_FIT_POINTS:
        raise ParameterError(f"radius grid needs >= {MIN_FIT_POINTS} entries")
    if np.any(np.diff(grid) >= 0) or grid[-1] <= 0:
        raise ParameterError("radius grid must be strictly decreasing and positive")
    if grid[0] / grid[-1] < 100.0:
        raise InsufficientRange("radius grid must span at least two decades")
    if m.size < MIN_FIT_SAMPLES:
        raise ParameterError(f"fitting needs >= {MIN_FIT_SAMPLES} samples")
    d = m.sorted_distances(center)
    counts = np.searchsorted(d, grid, side="right")
    keep = counts >= BALL_COUNT_FLOOR
    if int(keep.sum()) < MIN_FIT_POINTS:
        raise InsufficientMass(
            f"only {int(keep.sum())} grid radii hold >= {BALL_COUNT_FLOOR} samples")
    radii = grid[keep]
    masses = counts[keep] / m.size
    fit = stats.linregress(np.log(radii), np.log(masses))
    return DimensionFit(float(fit.slope), float(fit.stderr),
                        float(fit.rvalue ** 2), radii, masses)


@dataclass(frozen=True)
class AnnulusFit:
    """Regularity of mass increments on shrinking annuli around radius r:
    nu(B(r+eps)) - nu(B(r)) ~ C * eps^delta."""

    delta_hat: float
    c_hat: float
    r_squared: float
    stderr: float
    eps_used: np.ndarray
    increments: np.ndarray


def annulus_regularity(m: EmpiricalMeasure, center, r: float, eps_grid) -> AnnulusFit:
    grid = np.asarray(eps_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < MIN_FIT_POINTS:
        raise ParameterError(f"eps grid needs >= {MIN_FIT_POINTS} entries")
    if np.any(np.diff(grid) >= 0) or grid[-1] <= 0:
        raise ParameterError("eps grid must be strictly decreasing and positive")
    if m.size < MIN_FIT_SAMPLES:
        raise ParameterError(f"fitting needs >= {MIN_FIT_SAMPLES} samples")
    d = m.sorted_distances(center)
    base = np.searchsorted(d, r, side="right")
    outer = np.searchsorted(d, r + grid, side="right")
    counts = outer - base
    keep = counts >= ANNULUS_COUNT_FLOOR
    if int(keep.sum()) < MIN_FIT_POINTS:
        raise InsufficientMass(
            f"only {int(keep.sum())} annuli hold >= {ANNULUS_COUNT_FLOOR} samples")
    eps = grid[keep]
    inc = counts[keep] / m.size
    fit = stats.linregress(np.log(eps), np.log(inc))
    return AnnulusFit(float(fit.slope), float(np.exp(fit.intercept)),
                      float(fit.rvalue ** 2), float(fit.stderr), eps, inc)


@dataclass(frozen=True)
class DecayEstimate:
    """Per-lag correlation estimates with a decay-class fit.

    klass is "exponential" (log C_j linear in j), "polynomial"
    (log C_j linear in log j), or "unresolved" when too few lags clear the
    statistical noise floor. rate is the winning slope: log theta0 for the
    exponential class, -zeta for the polynomial class.
    """

    lags: np.ndarray
    c_hat: np.ndarray
    klass: str
    rate: float
    r2_exponential: float
    r2_polynomial: float
    noise_floor: float
    fit_lags: np.ndarray


def correlation_decay(orbit: np.ndarray,
                      pair: tuple[Callable[[np.ndarray], np.ndarray],
                                  Callable[[np.ndarray], np.ndarray]],
                      lags: Sequence[int]) -> DecayEstimate:
    """C_j = |avg g1(x_i) g2(x_{i+j}) - avg g1 avg g2| along one orbit.

    The class fit uses only lags whose C_j clears the iid noise floor
    5 * std(g1) * std(g2) / sqrt(N); with fewer than MIN_DECAY_LAGS such lags
    the class is reported unresolved. (The minimum is lower than for the
    geometry fits: a cleanly mixing map can leave only a handful of lags
    above any attainable floor, since the floor shrinks like 1/sqrt(N) while
    the signal halves-or-worse per lag.)
    """
    lags_arr = np.asarray(lags, dtype=np.int64)
    if lags_arr.size == 0 or lags_arr[0] < 1 or np.any(np.diff(lags_arr) <= 0):
        raise ParameterError("lags must be strictly increasing and >= 1")
    orbit = np.asarray(orbit)
    n = orbit.shape[0]
    max_lag = int(lags_arr[-1])
    if n < max_lag + MIN_FIT_SAMPLES:
        raise ParameterError(
            f"orbit must be >= max lag + {MIN_FIT_SAMPLES} states long")
    g1, g2 = pair
    a = np.asarray(g1(orbit), dtype=np.float64)
    b = np.asarray(g2(orbit), dtype=np.float64)
    if a.shape != (n,) or b.shape != (n,):
        raise ParameterError("observable pair must map states to scalars")
    mean_a, mean_b = a.mean(), b.mean()
    c = np.empty(lags_arr.size)
    for i, j in enumerate(lags_arr):
        c[i] = abs(np.dot(a[: n - j], b[j:]) / (n - j) - mean_a * mean_b)
    floor = NOISE_FLOOR_MULT * a.std() * b.std() / np.sqrt(n)
    usable = c > floor
    fit_lags = lags_arr[usable]
    if fit_lags.size < MIN_DECAY_LAGS:
        return DecayEstimate(lags_arr, c, "unresolved", float("nan"),
                             float("nan"), float("nan"), floor, fit_lags)
    logc = np.log(c[usable])
    fit_exp = stats.linregress(fit_lags.astype(float), logc)
    fit_pow = stats.linregress(np.log(fit_lags.astype(float)), logc)
    r2e, r2p = float(fit_exp.rvalue ** 2), float(fit_pow.rvalue ** 2)
    if r2e >= r2p:
        return DecayEstimate(lags_arr, c, "exponential", float(fit_exp.slope),
                             r2e, r2p, floor, fit_lags)
    return DecayEstimate(lags_arr, c, "polynomial", float(fit_pow.slope),
                         r2e, r2p, floor, fit_lags)
