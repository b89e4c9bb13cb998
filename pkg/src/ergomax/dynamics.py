"""Map systems and orbit generation.

Five systems: tent, doubling, intermittent (neutral fixed point at 0),
Henon, Lozi. Interval maps act on [0,1] (images clamped against eps-level
round-off); planar maps act on R^2 and raise on escape.

All state is float64. The dyadic interval maps (tent, doubling) are exact in
float64 arithmetic and therefore collapse to 0 after ~52 steps; long
statistical runs enable the per-step jitter (see ``tent``/``doubling``
factories), which adds ``scale * u`` mod 1 per step from the orbit's own
generator. Jitter is OFF by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from . import _kernels
from .errors import NonFiniteState, ParameterError

TENT = "tent"
DOUBLING = "doubling"
INTERMITTENT = "intermittent"
HENON = "henon"
LOZI = "lozi"

MAP_IDS = (TENT, DOUBLING, INTERMITTENT, HENON, LOZI)

DEFAULT_BURN_IN = 1000
DEFAULT_JITTER_SCALE = 2.0 ** -45
_CHUNK = 1 << 16


@dataclass(frozen=True)
class KnownFacts:
    """What is assumed known about a system's natural invariant measure."""

    measure_class: str          # "lebesgue-ac" or "srb"
    decay_kind: str             # "exponential" or "polynomial"
    zeta: Optional[float] = None   # polynomial decay exponent (rate n^-zeta)
    d_nu: Optional[float] = None   # local dimension where known exactly


@dataclass(frozen=True)
class MapSystem:
    id: str
    dim: int
    params: dict
    facts: KnownFacts
    jitter: float = 0.0    # per-step jitter scale; 0 disables

    def __post_init__(self):
        if self.id not in MAP_IDS:
            raise ParameterError(f"unknown map id {self.id!r}")
        if self.jitter < 0 or not math.isfinite(self.jitter):
            raise ParameterError("jitter scale must be finite and >= 0")
        if self.jitter and self.dim != 1:
            raise ParameterError("jitter applies to interval maps only")


def tent(jitter: float = 0.0) -> MapSystem:
    facts = KnownFacts("lebesgue-ac", "exponential", d_nu=1.0)
    return MapSystem(TENT, 1, {}, facts, jitter)


def doubling(jitter: float = 0.0) -> MapSystem:
    facts = KnownFacts("lebesgue-ac", "exponential", d_nu=1.0)
    return MapSystem(DOUBLING, 1, {}, facts, jitter)


def intermittent(alpha: float, jitter: float = 0.0) -> MapSystem:
    """x -> x(1 + 2^alpha x^alpha) on [0, 1/2), 2x - 1 on [1/2, 1].

    Requires alpha in (0,1): the invariant density is then normalisable and
    correlations decay polynomially with exponent 1/alpha - 1.
    """
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"intermittent alpha must lie in (0,1), got {alpha}")
    facts = KnownFacts("lebesgue-ac", "polynomial", zeta=1.0 / alpha - 1.0, d_nu=1.0)
    return MapSystem(INTERMITTENT, 1, {"alpha": float(alpha)}, facts, jitter)


def henon(a: float = 1.4, b: float = 0.3) -> MapSystem:
    facts = KnownFacts("srb", "exponential")
    return MapSystem(HENON, 2, {"a": float(a), "b": float(b)}, facts)


def lozi(a: float = 1.7, b: float = 0.5) -> MapSystem:
    facts = KnownFacts("srb", "exponential")
    return MapSystem(LOZI, 2, {"a": float(a), "b": float(b)}, facts)


def from_id(map_id: str, params: dict | None = None, jitter: float = 0.0) -> MapSystem:
    params = dict(params or {})
    if map_id == TENT:
        return tent(jitter)
    if map_id == DOUBLING:
        return doubling(jitter)
    if map_id == INTERMITTENT:
        return intermittent(params["alpha"], jitter)
    if map_id in (HENON, LOZI):
        if jitter:
            raise ParameterError("jitter applies to interval maps only")
        if map_id == HENON:
            return henon(params.get("a", 1.4), params.get("b", 0.3))
        return lozi(params.get("a", 1.7), params.get("b", 0.5))
    raise ParameterError(f"unknown map id {map_id!r}")


def as_state(system: MapSystem, point) -> np.ndarray:
    """Validate and normalise a point to a float64 array of shape (dim,)."""
    arr = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if arr.shape != (system.dim,):
        raise ParameterError(
            f"point has shape {arr.shape}, map {system.id} needs ({system.dim},)")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("point has non-finite coordinates")
    if system.dim == 1 and not (0.0 <= arr[0] <= 1.0):
        raise ParameterError(f"interval-map point {arr[0]} outside [0,1]")
    return arr


def step(system: MapSystem, point) -> np.ndarray:
    """One application of the pure map (never jittered)."""
    s = as_state(system, point)
    if system.id == TENT:
        x = 1.0 - abs(1.0 - 2.0 * s[0])
        return np.array([min(max(x, 0.0), 1.0)])
    if system.id == DOUBLING:
        x = s[0]
        x = 2.0 * x if x < 0.5 else 2.0 * x - 1.0
        return np.array([min(max(x, 0.0), 1.0)])
    if system.id == INTERMITTENT:
        x = s[0]
        a = system.params["alpha"]
        x = x * (1.0 + 2.0 ** a * x ** a) if x < 0.5 else 2.0 * x - 1.0
        return np.array([min(max(x, 0.0), 1.0)])
    if system.id == HENON:
        a, b = system.params["a"], system.params["b"]
        out = np.array([1.0 - a * s[0] * s[0] + s[1], b * s[0]])
    else:  # LOZI
        a, b = system.params["a"], system.params["b"]
        out = np.array([1.0 + b * s[1] - a * abs(s[0]), s[0]])
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(1, out)
    return out


_EMPTY = np.empty(0)


def _run_chunk(system: MapSystem, state: np.ndarray, out: np.ndarray,
               rng: Optional[np.random.Generator]) -> np.ndarray:
    """Advance len(out) steps from state, filling out. Returns final state."""
    k = len(out)
    if system.dim == 1:
        if system.jitter > 0.0:
            jit = rng.random(k)
        else:
            jit = _EMPTY
        if system.id == TENT:
            x = _kernels.tent_chunk(state[0], out, jit, system.jitter)
        elif system.id == DOUBLING:
            x = _kernels.doubling_chunk(state[0], out, jit, system.jitter)
        else:
            x = _kernels.intermittent_chunk(
                state[0], out, jit, system.jitter, system.params["alpha"])
        return np.array([x])
    a, b = system.params["a"], system.params["b"]
    if system.id == HENON:
        x, y, bad = _kernels.henon_chunk(state[0], state[1], out, a, b)
    else:
        x, y, bad = _kernels.lozi_chunk(state[0], state[1], out, a, b)
    if bad >= 0:
        raise NonFiniteState(bad + 1, out[bad])
    return np.array([x, y])


def orbit_chunks(system: MapSystem, x0, n: int, burn_in: int = 0,
                 rng: Optional[np.random.Generator] = None,
                 chunk_size: int = _CHUNK) -> Iterator[np.ndarray]:
    """Yield the n post-burn-in states in order, in arrays of <= chunk_size.

    The stream is f^{burn_in+1}(x0), ..., f^{burn_in+n}(x0). 1-D maps yield
    float arrays of shape (k,), planar maps (k, 2). Bit-identical for
    identical (system, x0, n, burn_in, rng seed) regardless of chunk size.
    """
    if n < 0 or burn_in < 0:
        raise ParameterError("n and burn_in must be >= 0")
    if system.jitter > 0.0 and rng is None:
        raise ParameterError("jittered maps need an rng for the noise stream")
    state = as_state(system, x0)
    offset = 0  # absolute step count, for NonFiniteState indices
    remaining = burn_in
    while remaining > 0:
        k = min(remaining, chunk_size)
        scratch = np.empty((k, 2)) if system.dim == 2 else np.empty(k)
        try:
            state = _run_chunk(system, state, scratch, rng)
        except NonFiniteState as e:
            raise NonFiniteState(offset + e.step_index, e.state) from None
        offset += k
        remaining -= k
    remaining = n
    while remaining > 0:
        k = min(remaining, chunk_size)
        out = np.empty((k, 2)) if system.dim == 2 else np.empty(k)
        try:
            state = _run_chunk(system, state, out, rng)
        except NonFiniteState as e:
            raise NonFiniteState(offset + e.step_index, e.state) from None
        offset += k
        remaining -= k
        yield out


def orbit(system: MapSystem, x0, n: int, burn_in: int = 0,
          rng: Optional[np.random.Generator] = None) -> Iterator:
    """Lazily yield f^{burn_in+1}(x0), ..., f^{burn_in+n}(x0).

    Interval maps yield floats; planar maps yield arrays of shape (2,).
    """
    for block in orbit_chunks(system, x0, n, burn_in, rng):
        if system.dim == 1:
            yield from block.tolist()
        else:
            yield from block


def orbit_array(system: MapSystem, x0, n: int, burn_in: int = 0,
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Materialise the whole post-burn-in orbit: shape (n,) or (n, 2)."""
    blocks = list(orbit_chunks(system, x0, n, burn_in, rng))
    if not blocks:
        return np.empty((0, 2)) if system.dim == 2 else np.empty(0)
    return np.concatenate(blocks)


# --- low-period periodic points (closed form) -------------------------------
#
# Used to keep auto-picked targets away from periodic orbits (their hit and
# extreme statistics carry short-return corrections) and to place targets ON
# them for the short-return diagnostics.

_PERIODIC: dict[str, dict[int, tuple]] = {
    TENT: {
        1: (Fraction(0), Fraction(2, 3)),
        2: (Fraction(2, 5), Fraction(4, 5)),
        3: (Fraction(2, 9), Fraction(4, 9), Fraction(8, 9),
            Fraction(2, 7), Fraction(4, 7), Fraction(6, 7)),
    },
    DOUBLING: {
        1: (Fraction(0),),
        2: (Fraction(1, 3), Fraction(2, 3)),
        3: (Fraction(1, 7), Fraction(2, 7), Fraction(3, 7),
            Fraction(4, 7), Fraction(5, 7), Fraction(6, 7)),
    },
    INTERMITTENT: {
        1: (Fraction(0), Fraction(1)),
        # periods >= 2 have no closed form (nonlinear branch); not listed
    },
}


def periodic_points(system: MapSystem, max_period: int = 3) -> np.ndarray:
    """Known periodic points of period <= max_period (interval maps only)."""
    table = _PERIODIC.get(system.id, {})
    pts = sorted({float(p) for per, tup in table.items() if per <= max_period
                  for p in tup})
    return np.array(pts)


def pick_target(system: MapSystem, rng: np.random.Generator,
                exclusion_radius: float = 1e-3, settle: int = DEFAULT_BURN_IN) -> np.ndarray:
    """Draw a generic target from the attractor.

    Runs a burn-in orbit from a random start and walks it until the state
    clears every known low-period periodic point by exclusion_radius
    (interval maps; planar maps take the settled state directly).
    """
    if system.dim == 1:
        x0 = rng.random()
        excluded = periodic_points(system)
        state = as_state(system, x0)
        scratch = np.empty(1)
        state = _advance(system, state, settle, rng)
        for _ in range(100000):
            if excluded.size == 0 or np.min(np.abs(state[0] - excluded)) > exclusion_radius:
                return state.copy()
            state = _advance(system, state, 1, rng, scratch)
        raise ParameterError("could not find a target clear of periodic points")
    x0 = np.array([0.1, 0.1]) + 0.05 * (rng.random(2) - 0.5)
    state = as_state(system, x0)
    return _advance(system, state, settle, rng)


def _advance(system: MapSystem, state: np.ndarray, k: int,
             rng: Optional[np.random.Generator], scratch: np.ndarray | None = None):
    if k <= 0:
        return state
    if scratch is None or len(scratch) != k:
        scratch = np.empty((k, 2)) if system.dim == 2 else np.empty(k)
    return _run_chunk(system, state, scratch, rng)
