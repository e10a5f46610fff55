"""Counter-based hashing shared by every sampler and seed-derivation site.

All randomness in this package is derived by mixing integer keys through a
splitmix64-style finalizer, so any value is a pure function of its key tuple.
That is what makes point generation, batch draws and replicate streams
reproducible regardless of evaluation order or process boundaries.
"""

from __future__ import annotations

import numpy as np

U64 = np.uint64

_GOLDEN = U64(0x9E3779B97F4A7C15)
_MULT1 = U64(0xBF58476D1CE4E5B9)
_MULT2 = U64(0x94D049BB133111EB)
_SEED0 = U64(0x243F6A8885A308D3)


def mix64(x):
    """splitmix64 finalizer, vectorized over uint64 arrays (wraps mod 2^64)."""
    x = np.asarray(x, dtype=U64)
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> U64(30))) * _MULT1
        x = (x ^ (x >> U64(27))) * _MULT2
        return x ^ (x >> U64(31))


def hash_fields(*fields):
    """Chain-mix integer fields (scalars or broadcastable arrays) into uint64.

    Negative Python ints are folded into uint64 two's complement first.
    """
    h = mix64(_SEED0)
    for f in fields:
        if isinstance(f, int):
            f = f & 0xFFFFFFFFFFFFFFFF
        h = mix64(h ^ np.asarray(f, dtype=U64))
    return h


def hash_to_int(*fields) -> int:
    """Scalar convenience wrapper: derived 64-bit seed as a Python int."""
    return int(hash_fields(*fields))


def uniforms_from_hash(h):
    """Map uint64 hashes to doubles strictly inside (0,1) on a 2^-53 grid."""
    return (np.asarray(h, dtype=U64) >> U64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54
