"""Counter-based Gaussian streams.

Algorithm ``philox4x64-boxmuller/1``:

* bit generator: Philox4x64-10 (``numpy.random.Philox``) keyed by the
  128-bit key ``(seed mod 2^64, stream mod 2^64)`` with the counter at 0;
* uniforms: ``u = ((raw >> 11) + 0.5) * 2^-53`` from consecutive 64-bit
  outputs, so ``0 < u < 1``;
* normals: Box-Muller on consecutive uniform pairs ``(u1, u2)``, emitting
  ``r cos(2 pi u2)`` then ``r sin(2 pi u2)`` with ``r = sqrt(-2 log u1)``.

Replication ``r`` of an experiment with master seed ``s`` uses stream
``(s, r)``; streams never overlap, so replications can run in any order.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "philox4x64-boxmuller/1"
_MASK = (1 << 64) - 1


def uniforms(seed: int, stream: int, size: int) -> np.ndarray:
    bg = np.random.Philox(key=np.array([seed & _MASK, stream & _MASK], dtype=np.uint64))
    raw = bg.random_raw(size)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def standard_normal(seed: int, stream: int, size: int) -> np.ndarray:
    """First ``size`` standard normals of stream ``(seed, stream)``.

    A shorter request is always a prefix of a longer one.
    """
    if size < 0:
        raise ValueError("size must be non-negative")
    pairs = (size + 1) // 2
    u = uniforms(seed, stream, 2 * pairs).reshape(pairs, 2)
    r = np.sqrt(-2.0 * np.log(u[:, 0]))
    angle = 2.0 * np.pi * u[:, 1]
    out = np.empty((pairs, 2))
    out[:, 0] = r * np.cos(angle)
    out[:, 1] = r * np.sin(angle)
    return out.reshape(-1)[:size]
