"""Counter-based random numbers (Philox4x32-10) for per-path reproducible streams.

A draw is a pure function of (seed, path, stream, block), so any partition of
paths across workers reproduces the same numbers.  Normals use the Marsaglia
polar method on pairs of 53-bit uniforms.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 2.0**-53

STREAM_NORMAL = 0
STREAM_EVENT = 1


@njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on a 4×32-bit counter with a 2×32-bit key."""
    c0 = np.uint64(c0) & _MASK
    c1 = np.uint64(c1) & _MASK
    c2 = np.uint64(c2) & _MASK
    c3 = np.uint64(c3) & _MASK
    k0 = np.uint64(k0) & _MASK
    k1 = np.uint64(k1) & _MASK
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = ((p1 >> _S32) ^ c1 ^ k0) & _MASK
        n1 = p1 & _MASK
        n2 = ((p0 >> _S32) ^ c3 ^ k1) & _MASK
        n3 = p0 & _MASK
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@njit(cache=True, nogil=True)
def _to_unit(hi, lo):
    x = (hi << _S32) | lo
    return (np.float64(x >> _S11) + 0.5) * _TWO_M53


@njit(cache=True, nogil=True)
def uniform_pair(seed, path, stream, block):
    """Two uniforms in (0, 1) from one Philox block."""
    seed = np.uint64(seed)
    block = np.uint64(block)
    path = np.uint64(path)
    a, b, c, d = philox4x32(block & _MASK, block >> _S32, path & _MASK,
                            ((path >> _S32) << np.uint64(8)) | np.uint64(stream),
                            seed & _MASK, seed >> _S32)
    return _to_unit(a, b), _to_unit(c, d)


@njit(cache=True, nogil=True)
def polar_normals(seed, path, block):
    """Two independent N(0,1) variates; returns (z1, z2, next_block)."""
    while True:
        u, v = uniform_pair(seed, path, STREAM_NORMAL, block)
        block += 1
        u = 2.0 * u - 1.0
        v = 2.0 * v - 1.0
        s = u * u + v * v
        if 0.0 < s < 1.0:
            f = np.sqrt(-2.0 * np.log(s) / s)
            return u * f, v * f, block


def normals(seed: int, path: int, count: int) -> np.ndarray:
    """Convenience: the first ``count`` normals of a path's normal stream."""
    out = np.empty(count)
    block = 0
    i = 0
    while i < count:
        z1, z2, block = polar_normals(np.uint64(seed), np.uint64(path), block)
        out[i] = z1
        if i + 1 < count:
            out[i + 1] = z2
        i += 2
    return out
