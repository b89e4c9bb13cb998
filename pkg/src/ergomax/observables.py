"""Distance observables and running-maximum series.

An observable is psi(dist(x, target)) with psi one of four decreasing
profiles. Distances are clamped below at ``eps_floor`` before applying psi
so that an exact hit of the target cannot produce an infinity; clamp events
are counted and surface in run metadata.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

import math
import numpy as np

from .errors import OutOfRange, ParameterError, StreamTooShort

NEG_LOG_DIST = "neg_log_dist"
POWER_DIST = "power_dist"
CAPPED_POWER = "capped_power"
SQRT_ABS_LOG_DIST = "sqrt_abs_log_dist"

OBSERVABLE_KINDS = (NEG_LOG_DIST, POWER_DIST, CAPPED_POWER, SQRT_ABS_LOG_DIST)

DEFAULT_EPS_FLOOR = 1e-300
CHECKPOINT_RATIO = 1.15


@dataclass(frozen=True)
class Observable:
    kind: str
    target: np.ndarray
    alpha: Optional[float] = None   # power kinds
    cap: Optional[float] = None     # capped kind
    eps_floor: float = DEFAULT_EPS_FLOOR

    def __post_init__(self):
        if self.kind not in OBSERVABLE_KINDS:
            raise ParameterError(f"unknown observable kind {self.kind!r}")
        if not (0.0 < self.eps_floor < 1.0):
            raise ParameterError("eps_floor must lie in (0,1)")
        if self.kind in (POWER_DIST, CAPPED_POWER):
            if self.alpha is None or not (self.alpha > 0):
                raise ParameterError(f"{self.kind} needs alpha > 0")
        if self.kind == CAPPED_POWER and self.cap is None:
            raise ParameterError("capped_power needs a cap C")
        object.__setattr__(self, "target",
                           np.atleast_1d(np.asarray(self.target, dtype=np.float64)))


def neg_log_dist(target, eps_floor: float = DEFAULT_EPS_FLOOR) -> Observable:
    return Observable(NEG_LOG_DIST, target, eps_floor=eps_floor)


def power_dist(alpha: float, target, eps_floor: float = DEFAULT_EPS_FLOOR) -> Observable:
    return Observable(POWER_DIST, target, alpha=alpha, eps_floor=eps_floor)


def capped_power(cap: float, alpha: float, target,
                 eps_floor: float = DEFAULT_EPS_FLOOR) -> Observable:
    return Observable(CAPPED_POWER, target, alpha=alpha, cap=cap, eps_floor=eps_floor)


def sqrt_abs_log_dist(target, eps_floor: float = DEFAULT_EPS_FLOOR) -> Observable:
    """sqrt(|log dist|). Decreasing in distance only below distance 1;
    meant for systems of diameter <= 1 (the additive-law baseline)."""
    return Observable(SQRT_ABS_LOG_DIST, target, eps_floor=eps_floor)


def distances(obs: Observable, chunk: np.ndarray) -> np.ndarray:
    """Euclidean distances from a state chunk (shape (k,) or (k, d)) to target."""
    t = obs.target
    if chunk.ndim == 1:
        if t.shape != (1,):
            raise ParameterError("1-D states but target is not 1-D")
        return np.abs(chunk - t[0])
    if chunk.shape[1] != t.shape[0]:
        raise ParameterError("state dimension does not match target")
    return np.sqrt(((chunk - t) ** 2).sum(axis=1))


def apply_profile(obs: Observable, dists: np.ndarray) -> tuple[np.ndarray, int]:
    """psi over a distance array. Returns (values, clamp_hit_count)."""
    clamped = np.count_nonzero(dists < obs.eps_floor)
    d = np.maximum(dists, obs.eps_floor)
    if obs.kind == NEG_LOG_DIST:
        return -np.log(d), clamped
    if obs.kind == POWER_DIST:
        return d ** -obs.alpha, clamped
    if obs.kind == CAPPED_POWER:
        return obs.cap - d ** obs.alpha, clamped
    return np.sqrt(np.abs(np.log(d))), clamped


def evaluate(obs: Observable, point) -> float:
    """psi(dist(point, target)) for a single state."""
    p = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if obs.target.shape == (1,):
        d = abs(float(p[0]) - float(obs.target[0]))  # no squared underflow
    else:
        d = float(np.sqrt(((p - obs.target) ** 2).sum()))
    vals, _ = apply_profile(obs, np.array([d]))
    return float(vals[0])


def level_radius(obs: Observable, u: float) -> float:
    """The distance at which psi equals u (psi^{-1}), i.e. the radius of the
    exceedance ball {psi > u}. OutOfRange where no preimage exists."""
    if obs.kind == NEG_LOG_DIST:
        return math.exp(-u)
    if obs.kind == POWER_DIST:
        if u <= 0:
            raise OutOfRange(f"power_dist takes values in (0, inf); u={u}")
        return u ** (-1.0 / obs.alpha)
    if obs.kind == CAPPED_POWER:
        if u >= obs.cap:
            raise OutOfRange(f"capped_power takes values below C={obs.cap}; u={u}")
        return (obs.cap - u) ** (1.0 / obs.alpha)
    if u < 0:
        raise OutOfRange(f"sqrt_abs_log_dist takes values >= 0; u={u}")
    return math.exp(-u * u)


class TypeThresholds(NamedTuple):
    t1: float       # level for -log d
    t2: float       # level for d^-alpha
    t3: float       # level for C - d^alpha
    radius: float   # shared exceedance-ball radius e^-u / n


def type_thresholds(u: float, n: int, alpha: float, cap: float) -> TypeThresholds:
    """Equivalent thresholds across the three scaling types.

    All three exceedance events cut the same ball of radius e^-u / n:
    {-log d > t1} = {d^-alpha > t2} = {cap - d^alpha > t3} = {d < e^-u / n}.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if alpha <= 0:
        raise ParameterError("alpha must be > 0")
    rho = math.exp(-u) / n
    t1 = u + math.log(n)
    t2 = rho ** -alpha
    t3 = cap - rho ** alpha
    return TypeThresholds(t1, t2, t3, rho)


def default_checkpoints(n_max: int, ratio: float = CHECKPOINT_RATIO) -> np.ndarray:
    """Geometric grid ceil(ratio^k), deduplicated, capped at and ending in n_max."""
    if n_max < 1:
        raise ParameterError("n_max must be >= 1")
    if ratio <= 1.0:
        raise ParameterError("checkpoint ratio must exceed 1")
    ks = np.arange(int(math.log(n_max) / math.log(ratio)) + 2)
    grid = np.unique(np.ceil(ratio ** ks).astype(np.int64))
    grid = grid[grid <= n_max]
    if grid.size == 0 or grid[-1] != n_max:
        grid = np.append(grid, n_max)
    return grid


@dataclass(frozen=True)
class MaxSeries:
    """Running maxima sampled at checkpoints, plus the record times.

    checkpoints: strictly increasing 1-based times n_k
    values:      M_{n_k}
    record_times: every 1-based time where the running max strictly rose
                  (the first observation is always a record, so [0] == 1)
    """

    checkpoints: np.ndarray
    values: np.ndarray
    record_times: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.checkpoints, dtype=np.int64)
        v = np.asarray(self.values, dtype=np.float64)
        if c.ndim != 1 or v.shape != c.shape:
            raise ParameterError("checkpoints/values shape mismatch")
        if c.size and (c[0] < 1 or np.any(np.diff(c) <= 0)):
            raise ParameterError("checkpoints must be strictly increasing and >= 1")
        if np.any(np.diff(v) < 0):
            raise ParameterError("max series must be nondecreasing")
        object.__setattr__(self, "checkpoints", c)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "record_times",
                           np.asarray(self.record_times, dtype=np.int64))


class MaxAccumulator:
    """Streaming running max with checkpoint capture and record times."""

    def __init__(self, checkpoints: np.ndarray):
        cps = np.asarray(checkpoints, dtype=np.int64)
        if cps.ndim != 1 or cps.size == 0:
            raise ParameterError("need at least one checkpoint")
        if cps[0] < 1 or np.any(np.diff(cps) <= 0):
            raise ParameterError("checkpoints must be strictly increasing and >= 1")
        self.checkpoints = cps
        self._values = np.full(cps.size, np.nan)
        self._records: list[np.ndarray] = []
        self._running = -np.inf
        self._seen = 0
        self._next_cp = 0

    def push(self, chunk: np.ndarray) -> None:
        chunk = np.asarray(chunk, dtype=np.float64)
        if chunk.size == 0:
            return
        run = np.maximum.accumulate(chunk)
        run = np.maximum(run, self._running)
        prev = np.empty_like(run)
        prev[0] = self._running
        prev[1:] = run[:-1]
        rec = np.flatnonzero(chunk > prev) + self._seen + 1
        if rec.size:
            self._records.append(rec)
        hi = self._seen + chunk.size
        while self._next_cp < self.checkpoints.size and self.checkpoints[self._next_cp] <= hi:
            self._values[self._next_cp] = run[self.checkpoints[self._next_cp] - self._seen - 1]
            self._next_cp += 1
        self._running = run[-1]
        self._seen = hi

    def finalize(self) -> MaxSeries:
        if self._next_cp < self.checkpoints.size:
            raise StreamTooShort(
                f"stream ended at {self._seen}, checkpoint "
                f"{self.checkpoints[self._next_cp]} not reached")
        records = (np.concatenate(self._records) if self._records
                   else np.empty(0, dtype=np.int64))
        return MaxSeries(self.checkpoints, self._values.copy(), records)


def max_process(values: Iterable[float] | np.ndarray, checkpoints) -> MaxSeries:
    """Fold a value stream into a MaxSeries. Single pass, O(len(checkpoints))
    memory. StreamTooShort if the stream ends before the last checkpoint."""
    acc = MaxAccumulator(checkpoints)
    if isinstance(values, np.ndarray):
        acc.push(values)
        return acc.finalize()
    buf: list[float] = []
    for v in values:
        buf.append(v)
        if len(buf) >= 65536:
            acc.push(np.array(buf))
            buf.clear()
    if buf:
        acc.push(np.array(buf))
    return acc.finalize()
