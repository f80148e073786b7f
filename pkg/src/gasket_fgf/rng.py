"""Counter-based standard normals.

The ``i``-th normal of a stream is a function of ``(seed, level, stream, i)``
only: it is built by Box-Muller from the Philox4x64 outputs ``2i`` and
``2i + 1`` under a key packing the three identifiers.  The parameter ``s`` is
deliberately not part of the key, so fields at different ``s`` sharing a seed
are driven by the same white noise.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 2.0**-53


def philox_key(seed: int, level: int, stream: int = 0) -> int:
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= level < 256 or not 0 <= stream < (1 << 56):
        raise ValueError("level or stream out of range")
    return seed | (level << 64) | (stream << 72)


def standard_normals(seed: int, level: int, n: int, stream: int = 0) -> np.ndarray:
    """First ``n`` normals of stream ``(seed, level, stream)``."""
    bits = np.random.Philox(key=philox_key(seed, level, stream)).random_raw(2 * n)
    u1 = ((bits[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53  # (0, 1]
    u2 = (bits[1::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def normal_matrix(seed: int, level: int, n: int, streams: range | np.ndarray) -> np.ndarray:
    """Columns ``standard_normals(seed, level, n, k)`` for each ``k`` in ``streams``."""
    streams = np.asarray(streams)
    out = np.empty((n, len(streams)))
    for col, k in enumerate(streams):
        out[:, col] = standard_normals(seed, level, n, int(k))
    return out
