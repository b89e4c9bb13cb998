"""Compiled per-step orbit recurrences.

Each kernel advances a map by ``len(out)`` steps from a given state, writing
every visited state into ``out`` and returning the final state. Sequential
recurrences cannot be vectorised, so these loops carry the whole simulation
budget; everything around them (observables, hit counting, maxima) is plain
numpy on the emitted chunks.

``fastmath`` stays off: results must be bit-identical across runs and across
worker counts, so IEEE semantics are not negotiable.

Interval-map kernels take a jitter block (uniform [0,1) draws) and a scale.
With ``scale > 0`` every image gets ``+ scale * u`` mod 1. This replenishes
the mantissa bits that the dyadic maps (tent, doubling) shift away; both
collapse to exactly 0 after ~52 float64 steps otherwise. ``scale = 0.0`` with
an empty block runs the pure map.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Interval maps clamp to [0,1]; round-off can only overshoot by a few eps.
# Planar kernels instead report the first non-finite/escaped index.
_ESCAPE = 1e100


@njit(cache=True, nogil=True)
def tent_chunk(x, out, jit, scale):
    n = out.shape[0]
    use_jit = scale > 0.0
    for i in range(n):
        x = 1.0 - abs(1.0 - 2.0 * x)
        if use_jit:
            x = x + scale * jit[i]
            x = x - np.floor(x)
        if x < 0.0:
            x = 0.0
        elif x > 1.0:
            x = 1.0
        out[i] = x
    return x


@njit(cache=True, nogil=True)
def doubling_chunk(x, out, jit, scale):
    n = out.shape[0]
    use_jit = scale > 0.0
    for i in range(n):
        if x < 0.5:
            x = 2.0 * x
        else:
            x = 2.0 * x - 1.0
        if use_jit:
            x = x + scale * jit[i]
            x = x - np.floor(x)
        if x < 0.0:
            x = 0.0
        elif x > 1.0:
            x = 1.0
        out[i] = x
    return x


@njit(cache=True, nogil=True)
def intermittent_chunk(x, out, jit, scale, alpha):
    n = out.shape[0]
    use_jit = scale > 0.0
    c = 2.0 ** alpha
    for i in range(n):
        if x < 0.5:
            x = x * (1.0 + c * x ** alpha)
        else:
            x = 2.0 * x - 1.0
        if use_jit:
            x = x + scale * jit[i]
            x = x - np.floor(x)
        if x < 0.0:
            x = 0.0
        elif x > 1.0:
            x = 1.0
        out[i] = x
    return x


@njit(cache=True, nogil=True)
def henon_chunk(x, y, out, a, b):
    """Returns (x, y, bad_index); bad_index = -1 when the chunk stayed finite."""
    n = out.shape[0]
    for i in range(n):
        xn = 1.0 - a * x * x + y
        yn = b * x
        x, y = xn, yn
        out[i, 0] = x
        out[i, 1] = y
        if not (abs(x) < _ESCAPE and abs(y) < _ESCAPE):
            return x, y, i
    return x, y, -1


@njit(cache=True, nogil=True)
def lozi_chunk(x, y, out, a, b):
    n = out.shape[0]
    for i in range(n):
        xn = 1.0 + b * y - a * abs(x)
        yn = x
        x, y = xn, yn
        out[i, 0] = x
        out[i, 1] = y
        if not (abs(x) < _ESCAPE and abs(y) < _ESCAPE):
            return x, y, i
    return x, y, -1
