"""Shrinking-target schedules and hit statistics.

A schedule prescribes ball measures s_n around a target (power law n^-beta,
log-power (log n)^beta / n, or explicit radii); a measure model converts
measures to radii (exact Lebesgue geometry in 1-D, or empirical quantiles of
calibration distances). Hit statistics compare the orbit's hit counts S_n
with the prescribed mass E_n = sum of s_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .dynamics import MapSystem, orbit_chunks
from .errors import (InsufficientRange, ParameterError, StreamTooShort,
                     ZeroMass)
from .observables import distances, neg_log_dist

POWER_LAW = "power_law"
LOG_POWER = "log_power"
EXPLICIT = "explicit"

RULE_KINDS = (POWER_LAW, LOG_POWER, EXPLICIT)

DEVIATION_FLOOR = 0.5          # half a count: keeps log|S-E| finite
MIN_CALIBRATION = 10 ** 5
MIN_FIT_CHECKPOINTS = 8
MIN_FIT_ORBITS = 20


@dataclass(frozen=True)
class AnalyticLebesgue1D:
    """Exact interval geometry: m(B(t, r)) = 2r while the ball is interior."""

    target: float

    def __post_init__(self):
        if not (0.0 <= self.target <= 1.0):
            raise ParameterError("analytic 1-D model needs a target in [0,1]")

    @property
    def room(self) -> float:
        return min(self.target, 1.0 - self.target)

    def radii_for_measures(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(radii, truncated mask). Radii are clipped to the interior room;
        truncation is a flag, not a failure."""
        r = np.asarray(s, dtype=np.float64) / 2.0
        trunc = r > self.room
        return np.where(trunc, self.room, r), trunc

    def measures_for_radii(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        lo = np.maximum(self.target - r, 0.0)
        hi = np.minimum(self.target + r, 1.0)
        return np.maximum(hi - lo, 0.0)


@dataclass(frozen=True)
class EmpiricalQuantile:
    """Radii from order statistics of calibration distances to the target."""

    target: np.ndarray
    calibration: np.ndarray   # sorted ascending distances to target

    def __post_init__(self):
        object.__setattr__(self, "target",
                           np.atleast_1d(np.asarray(self.target, dtype=np.float64)))
        cal = np.asarray(self.calibration, dtype=np.float64)
        if cal.ndim != 1 or cal.size < MIN_CALIBRATION:
            raise ParameterError(
                f"calibration needs >= {MIN_CALIBRATION} distances, got {cal.size}")
        if np.any(np.diff(cal) < 0):
            raise ParameterError("calibration distances must be sorted ascending")
        object.__setattr__(self, "calibration", cal)

    def radii_for_measures(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=np.float64)
        n = self.calibration.size
        if np.any(s * n < 1.0):
            raise ZeroMass(
                "requested ball measure below calibration resolution "
                f"(min representable {1.0 / n:.3g})")
        idx = np.minimum(np.ceil(s * n).astype(np.int64), n) - 1
        return self.calibration[idx], np.zeros(s.shape, dtype=bool)

    def measures_for_radii(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        return np.searchsorted(self.calibration, r, side="right") / self.calibration.size


MeasureModel = Union[AnalyticLebesgue1D, EmpiricalQuantile]


def calibration_from_orbit(system: MapSystem, target, n: int,
                           rng: np.random.Generator, burn_in: int = 1000) -> EmpiricalQuantile:
    """Build an EmpiricalQuantile model by sampling n orbit states."""
    obs = neg_log_dist(target)  # reuses the distance geometry
    x0 = rng.random() if system.dim == 1 else np.array([0.1, 0.1]) + 0.05 * (rng.random(2) - 0.5)
    blocks = [distances(obs, ch) for ch in orbit_chunks(system, x0, n, burn_in, rng)]
    d = np.sort(np.concatenate(blocks))
    return EmpiricalQuantile(np.atleast_1d(np.asarray(target, dtype=float)), d)


def radius_for_measure(model: MeasureModel, s: float) -> float:
    """Radius whose ball carries prescribed measure s under the model."""
    if not (0.0 < s <= 1.0):
        raise ParameterError(f"ball measure must lie in (0,1], got {s}")
    r, _ = model.radii_for_measures(np.array([s]))
    return float(r[0])


@dataclass(frozen=True)
class TargetSchedule:
    """Prescribed ball measures s_n around a fixed target.

    power_law:  s_n = n^-beta, beta in (0,1)
    log_power:  s_n = (log n)^beta / n for n >= 2, s_1 = 1, beta > 0
    explicit:   radii given directly

    Rule values are clamped to <= 1 (a prescribed measure cannot exceed 1;
    log_power overshoots on its early hump). Expected counts E_n accumulate
    the measures of the balls actually tested -- i.e. after radius truncation
    at the model's interior room -- so S and E stay coupled even while the
    early schedule saturates the space around the target. Away from clamping
    and truncation this equals the prescribed rule mass exactly.
    Radii are nonincreasing from n >= e^beta on (past the log_power hump).
    """

    rule: str
    model: MeasureModel
    beta: Optional[float] = None
    explicit_radii: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.rule not in RULE_KINDS:
            raise ParameterError(f"unknown schedule rule {self.rule!r}")
        if self.rule == POWER_LAW and not (self.beta is not None and 0.0 < self.beta < 1.0):
            raise ParameterError("power_law needs beta in (0,1)")
        if self.rule == LOG_POWER and not (self.beta is not None and self.beta > 0.0):
            raise ParameterError("log_power needs beta > 0")
        if self.rule == EXPLICIT:
            if self.explicit_radii is None:
                raise ParameterError("explicit rule needs radii")
            r = np.asarray(self.explicit_radii, dtype=np.float64)
            if r.ndim != 1 or np.any(r < 0) or not np.all(np.isfinite(r)):
                raise ParameterError("explicit radii must be finite and >= 0")
            object.__setattr__(self, "explicit_radii", r)

    def rule_values(self, ks: np.ndarray) -> np.ndarray:
        """Prescribed ball measures at (1-based) times ks, clamped to <= 1."""
        ks = np.asarray(ks, dtype=np.float64)
        if self.rule == POWER_LAW:
            return np.minimum(1.0, ks ** -self.beta)
        if self.rule == LOG_POWER:
            vals = np.where(ks >= 2.0, np.log(np.maximum(ks, 2.0)) ** self.beta / ks, 1.0)
            return np.minimum(1.0, vals)
        radii, _ = self.radii_at(ks)
        return self.model.measures_for_radii(radii)

    def radii_at(self, ks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(radii, truncation mask) at the given times."""
        ks_i = np.asarray(ks)
        if self.rule == EXPLICIT:
            idx = np.asarray(ks_i, dtype=np.int64) - 1
            if np.any(idx < 0) or np.any(idx >= self.explicit_radii.size):
                raise ParameterError("explicit radii do not cover the requested times")
            r = self.explicit_radii[idx]
            return r, np.zeros(r.shape, dtype=bool)
        return self.model.radii_for_measures(self.rule_values(ks_i))

    def expected_masses(self, ks: np.ndarray) -> np.ndarray:
        """Measures of the balls actually tested at the given times."""
        radii, _ = self.radii_at(ks)
        return self.model.measures_for_radii(radii)

    @property
    def target(self) -> np.ndarray:
        if isinstance(self.model, AnalyticLebesgue1D):
            return np.array([self.model.target])
        return self.model.target


@dataclass(frozen=True)
class HitStats:
    """Hit counts vs prescribed mass at checkpoints, for one orbit."""

    checkpoints: np.ndarray
    s_counts: np.ndarray       # S_{n_k}: hits of B_j by step j, j <= n_k
    e_values: np.ndarray       # E_{n_k}: partial sums of prescribed measures
    hit_times: Optional[np.ndarray] = None
    truncations: int = 0

    @property
    def deviations(self) -> np.ndarray:
        return self.s_counts - self.e_values


def hit_stats(orbit_source: Union[np.ndarray, Iterable[np.ndarray]],
              schedule: TargetSchedule, checkpoints,
              keep_hit_times: bool = False) -> HitStats:
    """Count schedule hits S_n along an orbit and tabulate E_n.

    orbit_source: a full state array or an iterable of state chunks
    (as produced by orbit_chunks). The j-th state (1-based) is tested
    against the ball of time j.
    """
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size == 0 or cps[0] < 1 or np.any(np.diff(cps) <= 0):
        raise ParameterError("checkpoints must be strictly increasing and >= 1")
    n_max = int(cps[-1])
    if isinstance(orbit_source, np.ndarray):
        orbit_source = (orbit_source,)
    target = schedule.target
    s_at = np.zeros(cps.size, dtype=np.int64)
    e_at = np.zeros(cps.size, dtype=np.float64)
    hits_acc: list[np.ndarray] = []
    obs = neg_log_dist(target)
    seen = 0
    s_run = 0
    e_run = 0.0
    trunc = 0
    next_cp = 0
    for chunk in orbit_source:
        chunk = np.asarray(chunk)
        k = chunk.shape[0]
        if k == 0:
            continue
        if seen >= n_max:
            break
        if seen + k > n_max:
            chunk = chunk[: n_max - seen]
            k = chunk.shape[0]
        ks = np.arange(seen + 1, seen + k + 1, dtype=np.int64)
        radii, tmask = schedule.radii_at(ks)
        trunc += int(np.count_nonzero(tmask))
        d = distances(obs, chunk)
        hit = d <= radii
        if keep_hit_times:
            ht = ks[hit]
            if ht.size:
                hits_acc.append(ht)
        s_cum = s_run + np.cumsum(hit)
        e_cum = e_run + np.cumsum(schedule.expected_masses(ks))
        hi = seen + k
        while next_cp < cps.size and cps[next_cp] <= hi:
            s_at[next_cp] = s_cum[cps[next_cp] - seen - 1]
            e_at[next_cp] = e_cum[cps[next_cp] - seen - 1]
            next_cp += 1
        s_run = int(s_cum[-1])
        e_run = float(e_cum[-1])
        seen = hi
    if next_cp < cps.size:
        raise StreamTooShort(
            f"orbit ended at {seen}, checkpoint {cps[next_cp]} not reached")
    ht = (np.concatenate(hits_acc) if hits_acc else np.empty(0, dtype=np.int64)) \
        if keep_hit_times else None
    return HitStats(cps, s_at, e_at, ht, trunc)


@dataclass(frozen=True)
class SbcFit:
    """log-log fit of the ensemble-mean |S - E| against E."""

    slope: float
    r_squared: float
    stderr: float
    n_points: int
    e_range: tuple[float, float]


def sbc_error_fit(ensemble: Sequence[HitStats],
                  fit_range: tuple[float, float]) -> SbcFit:
    """Regress log(mean |S-E|) on log E over checkpoints with E inside
    fit_range. Per-orbit deviations are floored at half a count before
    averaging so exact agreement stays loggable."""
    if len(ensemble) < MIN_FIT_ORBITS:
        raise ParameterError(f"need >= {MIN_FIT_ORBITS} orbits, got {len(ensemble)}")
    e_lo, e_hi = float(fit_range[0]), float(fit_range[1])
    if not (e_lo > 0 and e_hi / e_lo >= 100.0):
        raise InsufficientRange("fit range must span at least two decades of E")
    base = ensemble[0]
    for h in ensemble[1:]:
        if not np.array_equal(h.checkpoints, base.checkpoints):
            raise ParameterError("ensemble must share one checkpoint grid")
        if not np.allclose(h.e_values, base.e_values):
            raise ParameterError("ensemble must share one schedule (E differs)")
    devs = np.stack([np.abs(h.deviations) for h in ensemble])
    devs = np.maximum(devs, DEVIATION_FLOOR)
    mean_dev = devs.mean(axis=0)
    e = base.e_values
    keep = (e >= e_lo) & (e <= e_hi)
    if int(keep.sum()) < MIN_FIT_CHECKPOINTS:
        raise InsufficientRange(
            f"only {int(keep.sum())} checkpoints inside fit range, "
            f"need >= {MIN_FIT_CHECKPOINTS}")
    fit = stats.linregress(np.log(e[keep]), np.log(mean_dev[keep]))
    return SbcFit(float(fit.slope), float(fit.rvalue ** 2), float(fit.stderr),
                  int(keep.sum()), (e_lo, e_hi))


@dataclass(frozen=True)
class ShortReturnResult:
    """Empirical short-return diagnostics at one ball."""

    nu_hat: float
    lags: np.ndarray
    raw: np.ndarray           # nu_hat(B intersect f^-k B)
    ratios: np.ndarray        # raw / nu_hat^(1+alpha)
    alpha: float

    @property
    def flagged_lags(self) -> np.ndarray:
        """Lags where the short-return bound (ratio <= 1) fails."""
        return self.lags[self.ratios > 1.0]


def short_return_stat(system: MapSystem, target, r: float, k_max: int,
                      probe_len: int, alpha: float, seed: int = 0,
                      burn_in: int = 1000) -> ShortReturnResult:
    """Estimate nu(B intersect f^-k B) / nu(B)^(1+alpha) for k = 1..k_max.

    Ratios near or above 1 flag short returns (periodic targets); generic
    targets keep every ratio well below 1 for small alpha.
    """
    if not (r > 0 and k_max >= 1 and probe_len >= 1):
        raise ParameterError("need r > 0, k_max >= 1, probe_len >= 1")
    rng = np.random.default_rng(np.random.Philox(key=seed))
    if system.dim == 1:
        x0 = rng.random()
    else:
        x0 = np.array([0.1, 0.1]) + 0.05 * (rng.random(2) - 0.5)
    obs = neg_log_dist(target)
    blocks = [distances(obs, ch) <= r
              for ch in orbit_chunks(system, x0, probe_len + k_max, burn_in, rng)]
    b = np.concatenate(blocks)
    nu = float(np.count_nonzero(b[:probe_len])) / probe_len
    if nu == 0.0:
        raise ZeroMass(f"no orbit visits to the ball of radius {r}")
    lags = np.arange(1, k_max + 1, dtype=np.int64)
    raw = np.array([np.count_nonzero(b[:probe_len] & b[k:probe_len + k]) / probe_len
                    for k in lags])
    return ShortReturnResult(nu, lags, raw, raw / nu ** (1.0 + alpha), alpha)


@dataclass(frozen=True)
class RateParams:
    """Named exponents and constants carried by fits and summaries."""

    d_nu: Optional[float] = None       # local dimension
    zeta: Optional[float] = None       # polynomial decay exponent
    theta0: Optional[float] = None     # exponential decay base
    delta: Optional[float] = None      # annulus regularity exponent
    beta: Optional[float] = None       # schedule exponent
    beta_prime: Optional[float] = None  # SBC error exponent
    alpha: Optional[float] = None      # observable / short-return exponent
    gamma: Optional[float] = None      # Pareto tail index
    sigma: Optional[float] = None      # Gaussian scale
    eta: Optional[float] = None        # upper band multiplier

    def __post_init__(self):
        for name in ("d_nu", "zeta", "theta0", "delta", "beta", "beta_prime",
                     "alpha", "gamma", "sigma", "eta"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ParameterError(f"rate parameter {name} must be finite and > 0")
