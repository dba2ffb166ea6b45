"""Counter-based random numbers: Philox4x64-10, vectorised over counters.

Every output block is a pure function of ``(key, counter)``, so a path's
random stream depends only on ``(seed, path index, stream id)`` and never on
how many paths are generated together or in which order.

Counter layout used by :func:`normals` / :func:`uniforms`::

    counter = (block index, path index, stream id, 0),   key = (seed, 0)

Each block yields four 64-bit words.  Uniforms are ``((w >> 11) + 0.5) 2^-53``
(open interval), normals are obtained by the inverse normal CDF.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

GENERATOR_NAME = "philox4x64-10"
NORMAL_METHOD = "inverse-cdf"

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def _mulhilo(a: np.uint64, b: np.ndarray):
    """High and low 64-bit halves of ``a * b`` (``a`` scalar)."""
    lo = a * b
    a0, a1 = a & _LO32, a >> _S32
    b0, b1 = b & _LO32, b >> _S32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    mid = (p00 >> _S32) + (p01 & _LO32) + (p10 & _LO32)
    hi = p11 + (p01 >> _S32) + (p10 >> _S32) + (mid >> _S32)
    return hi, lo


def philox4x64(counters: np.ndarray, key) -> np.ndarray:
    """Philox4x64 with 10 rounds.

    ``counters`` has shape ``(..., 4)`` (uint64); returns the same shape.
    """
    with np.errstate(over="ignore"):
        c = np.asarray(counters, dtype=np.uint64)
        c0, c1, c2, c3 = (c[..., i].copy() for i in range(4))
        k0 = np.uint64(key[0])
        k1 = np.uint64(key[1])
        for r in range(10):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        return np.stack([c0, c1, c2, c3], axis=-1)


def _key(seed: int):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return (np.uint64(seed), np.uint64(0))


def raw_words(seed: int, path_ids, stream: int, n_words: int) -> np.ndarray:
    """``(len(path_ids), n_words)`` uint64 words for each path's stream."""
    path_ids = np.asarray(path_ids, dtype=np.uint64)
    n_blocks = -(-n_words // 4)
    ctr = np.zeros((path_ids.size, n_blocks, 4), dtype=np.uint64)
    ctr[..., 0] = np.arange(n_blocks, dtype=np.uint64)[None, :]
    ctr[..., 1] = path_ids[:, None]
    ctr[..., 2] = np.uint64(stream)
    out = philox4x64(ctr, _key(seed))
    return out.reshape(path_ids.size, n_blocks * 4)[:, :n_words]


def uniforms(seed: int, path_ids, stream: int, n: int) -> np.ndarray:
    """Uniform variates on the open interval ``(0, 1)``."""
    w = raw_words(seed, path_ids, stream, n)
    return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(seed: int, path_ids, stream: int, n: int) -> np.ndarray:
    """Standard normal variates by inversion of uniforms."""
    return ndtri(uniforms(seed, path_ids, stream, n))
