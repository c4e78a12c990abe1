"""Deterministic 64-bit seed derivation.

All randomness in the package flows from a master seed through the splitmix64
finalizer.  Per-trial seeds are ``mix64(master_seed, trial_index)``; per-edge
clock streams are keyed by ``mix64(trial_seed, edge_key(x))`` with
``edge_key(x) = x + 2**62`` so negative lattice coordinates map to distinct
nonnegative keys.  The numba kernels implement the same arithmetic bit for
bit; tests compare the two paths.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

#: Offset making edge coordinates nonnegative before keying.
EDGE_KEY_OFFSET = 1 << 62

#: Key for deriving auxiliary per-trial streams (e.g. stationary-partner
#: draws) without touching the clock-stream key space.
AUX_STREAM_KEY = (1 << 63) + 0xC0FFEE


def finalize64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit word."""
    z &= MASK64
    z ^= z >> 30
    z = (z * _MIX1) & MASK64
    z ^= z >> 27
    z = (z * _MIX2) & MASK64
    z ^= z >> 31
    return z


def mix64(a: int, b: int) -> int:
    """Mix two 64-bit words into one; the documented seed-derivation function."""
    return finalize64((a + GOLDEN * ((b & MASK64) + 1)) & MASK64)


def edge_key(x: int) -> int:
    return (x + EDGE_KEY_OFFSET) & MASK64


def splitmix64_next(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (output word, new state)."""
    state = (state + GOLDEN) & MASK64
    return finalize64(state), state
