"""Falcon signature verification.

``verify`` is the fast path (hashlib + numpy). ``verify_metered`` walks the
same pipeline with integer NTTs and the pure-Python Keccak so every hash
lane, butterfly, multiply and memory word can be counted.
"""

from __future__ import annotations

import enum
from collections import Counter
from functools import lru_cache

import numpy as np

from ..keccak import Xof
from . import ntt as _ntt
from .codec import DecodeError, decode_public_key, decompress
from .hash_to_point import hash_to_point
from .params import NONCE_LEN, SIG_BOUND, SIG_COMPRESSED_HEADER, SIG_PADDED_LEN, N, Q


class Outcome(enum.Enum):
    OK = "ok"
    INVALID = "invalid"
    MALFORMED = "malformed"

    def __bool__(self) -> bool:
        return self is Outcome.OK


def decode_signature(sig: bytes) -> tuple[bytes, list[int]]:
    """Split a signature into (nonce, s2); padded or unpadded layouts."""
    if not 1 + NONCE_LEN < len(sig) <= SIG_PADDED_LEN:
        raise DecodeError("signature length out of range")
    if sig[0] != SIG_COMPRESSED_HEADER:
        raise DecodeError("bad signature header")
    nonce = bytes(sig[1:1 + NONCE_LEN])
    body = sig[1 + NONCE_LEN:]
    s2, used = decompress(body, N)
    if any(body[used:]):
        raise DecodeError("non-zero padding after signature body")
    return nonce, s2


def _centered_norm(s1, s2) -> int:
    s1 = np.asarray(s1, dtype=np.int64)
    s1 = np.where(s1 > Q // 2, s1 - Q, s1)
    s2 = np.asarray(s2, dtype=np.int64)
    return int(s1 @ s1) + int(s2 @ s2)


@lru_cache(maxsize=512)
def _public_poly(public_key: bytes) -> np.ndarray:
    h = np.asarray(decode_public_key(public_key), dtype=np.int64)
    h.setflags(write=False)
    return h


def verify(message: bytes, sig: bytes, public_key: bytes) -> Outcome:
    try:
        h = _public_poly(bytes(public_key))
        nonce, s2 = decode_signature(sig)
    except DecodeError:
        return Outcome.MALFORMED
    c = np.asarray(hash_to_point(nonce + bytes(message)), dtype=np.int64)
    s1 = (c - _ntt.mul_mod_q(s2, h)) % Q
    return Outcome.OK if _centered_norm(s1, s2) <= SIG_BOUND else Outcome.INVALID


def _metered_hash_to_point(data: bytes, meter) -> list[int]:
    xof = Xof(data, meter=meter)
    out = []
    while len(out) < N:
        b = xof.read(2)
        w = (b[0] << 8) | b[1]
        meter["memory_word"] += 1
        if w < 5 * Q:
            out.append(w % Q)
            meter["field_mul"] += 1
    return out


def verify_metered(message: bytes, sig: bytes, public_key: bytes, meter: Counter | None = None) -> Outcome:
    """Same verdict as :func:`verify`; operation counts land in ``meter``."""
    meter = Counter() if meter is None else meter
    meter["memory_word"] += (len(public_key) + len(sig) + 31) // 32
    try:
        h = decode_public_key(public_key)
        nonce, s2 = decode_signature(sig)
    except DecodeError:
        return Outcome.MALFORMED
    # unpacking writes one word per coefficient of h and of s2
    meter["memory_word"] += 2 * N
    c = _metered_hash_to_point(nonce + bytes(message), meter)
    prod = _ntt.mul_ntt(s2, h, meter)
    s1 = [(ci - pi) % Q for ci, pi in zip(c, prod)]
    meter["memory_word"] += 3 * N
    norm = 0
    for a, b in zip(s1, s2):
        a = a - Q if a > Q // 2 else a
        norm += a * a + b * b
    meter["field_mul"] += 2 * N
    meter["memory_word"] += 2 * N
    return Outcome.OK if norm <= SIG_BOUND else Outcome.INVALID
