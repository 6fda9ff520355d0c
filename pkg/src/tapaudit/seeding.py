"""Deterministic 64-bit seed derivation.

Per-card work (synthetic generation, sampling permutations) and per-cell
work (release noise) must be reproducible regardless of evaluation order
or thread count.  Everything therefore derives its randomness from a
single master seed through ``mix64``, a splitmix64-style avalanche over
the mixed-in integers.  The same constants are used by the scalar and
the vectorised (numpy) paths so both produce identical streams.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INIT = 0x243F6A8885A308D3  # first 64 fractional bits of pi


def _avalanche(x: int) -> int:
    x &= MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def mix64(*values: int) -> int:
    """Fold integers into one well-mixed 64-bit value.

    Order-sensitive: ``mix64(a, b) != mix64(b, a)`` in general.  Negative
    inputs are folded by their two's-complement bit pattern.
    """
    state = _INIT
    for v in values:
        state = _avalanche((state + _GAMMA + (v & MASK64)) & MASK64)
    return state


def mix64_vec(*values: "int | np.ndarray") -> np.ndarray:
    """Vectorised ``mix64``; broadcasts its arguments.

    Bit-compatible with the scalar version: feeding the same integers
    yields the same 64-bit outputs.
    """
    state = None
    arrs = [np.asarray(v).astype(np.uint64, copy=False) for v in values]
    shape = np.broadcast_shapes(*(a.shape for a in arrs))
    state = np.full(shape, _INIT, dtype=np.uint64)
    gamma = np.uint64(_GAMMA)
    m1 = np.uint64(_MIX1)
    m2 = np.uint64(_MIX2)
    with np.errstate(over="ignore"):
        for a in arrs:
            x = state + gamma + a
            x = (x ^ (x >> np.uint64(30))) * m1
            x = (x ^ (x >> np.uint64(27))) * m2
            state = x ^ (x >> np.uint64(31))
    return state


def uniform01_vec(bits: np.ndarray) -> np.ndarray:
    """Map 64-bit words to float64 uniforms in [0, 1)."""
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0**-53)
