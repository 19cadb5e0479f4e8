"""Map a salted message onto a polynomial of Z_q[x]/(x^n + 1)."""

from __future__ import annotations

import hashlib

import numpy as np

from .params import N, Q

_LIMIT = 5 * Q  # 61445: largest multiple of q below 2^16


def hash_to_point(data: bytes, n: int = N) -> list[int]:
    """Rejection-sample n coefficients from SHAKE256(data), 16 bits at a time."""
    want = 2 * n + 128
    while True:
        words = np.frombuffer(hashlib.shake_256(data).digest(want), dtype=">u2")
        kept = words[words < _LIMIT]
        if len(kept) >= n:
            return (kept[:n].astype(np.int64) % Q).tolist()
        # SHAKE output is prefix-stable, so a longer read just extends it
        want *= 2


def hash_to_point_scalar(data: bytes, n: int = N) -> list[int]:
    """Byte-at-a-time version of :func:`hash_to_point` (reference)."""
    out: list[int] = []
    want = 2 * n + 64
    while True:
        stream = hashlib.shake_256(data).digest(want)
        out.clear()
        for i in range(0, want, 2):
            w = (stream[i] << 8) | stream[i + 1]
            if w < _LIMIT:
                out.append(w % Q)
                if len(out) == n:
                    return out
        want *= 2
