"""Versioned, platform-independent token streams.

Record ``i`` under seed ``s`` draws raw 64-bit words from
``PCG64(SeedSequence([s, i]))``.  A word ``w`` is accepted when
``w < floor(2**64 / n) * n`` and becomes the token ``w % n``; rejected words
are skipped, so tokens are exactly uniform.  numpy guarantees that
``SeedSequence`` and ``PCG64.random_raw`` are stable across versions and
platforms.
"""

from __future__ import annotations

import numpy as np

STREAM_VERSION = "pcg64-raw64-mod-reject/1"


def token_stream(seed: int, index: int, n_symbols: int, length: int) -> np.ndarray:
    if seed < 0 or index < 0:
        raise ValueError("seed and record index must be nonnegative")
    if n_symbols < 1:
        raise ValueError("alphabet must be nonempty")
    bitgen = np.random.PCG64(np.random.SeedSequence([seed, index]))
    limit = (2**64 // n_symbols) * n_symbols
    out = np.empty(length, dtype=np.int64)
    filled = 0
    while filled < length:
        raw = bitgen.random_raw(length - filled + 8)
        if limit < 2**64:
            raw = raw[raw < np.uint64(limit)]
        take = raw[: length - filled]
        out[filled:filled + len(take)] = (take % np.uint64(n_symbols)).astype(np.int64)
        filled += len(take)
    return out


def token_batch(seed: int, count: int, length: int, n_symbols: int, start: int = 0) -> np.ndarray:
    """Rows ``start .. start + count - 1`` of the stream family as a 2-D array."""
    out = np.empty((count, length), dtype=np.int64)
    for i in range(count):
        out[i] = token_stream(seed, start + i, n_symbols, length)
    return out
