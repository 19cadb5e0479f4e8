"""Hash helpers: Keccak-256, SHAKE256 and a streaming SHAKE256 reader."""

from __future__ import annotations

import hashlib

from .keccak import keccak256

__all__ = ["DIGEST_LEN", "ShakeStream", "keccak256", "mac", "shake256"]

DIGEST_LEN = 32


def shake256(data: bytes, out_len: int) -> bytes:
    if out_len < 1:
        raise ValueError("shake256 output length must be at least 1 byte")
    return hashlib.shake_256(bytes(data)).digest(out_len)


class ShakeStream:
    """SHAKE256 in absorb-then-squeeze mode with incremental output.

    hashlib only offers one-shot ``digest(n)``; output is buffered in chunks
    and re-squeezed at double the length when exhausted (prefix property).
    """

    _CHUNK = 1088  # 8 blocks of rate 136

    def __init__(self, data: bytes = b""):
        self._h = hashlib.shake_256()
        self._h.update(data)
        self._buf = b""
        self._pos = 0
        self._flipped = False

    def absorb(self, data: bytes) -> None:
        if self._flipped:
            raise RuntimeError("cannot absorb after squeezing started")
        self._h.update(data)

    def squeeze(self, n: int) -> bytes:
        self._flipped = True
        end = self._pos + n
        if end > len(self._buf):
            size = max(end, 2 * len(self._buf), self._CHUNK)
            size += -size % self._CHUNK
            self._buf = self._h.digest(size)
        out = self._buf[self._pos:end]
        self._pos = end
        return out


def mac(key: bytes, *parts: bytes) -> bytes:
    """Keyed SHAKE256 tag over length-prefixed parts (32 bytes)."""
    h = hashlib.shake_256()
    h.update(len(key).to_bytes(4, "big") + key)
    for p in parts:
        h.update(len(p).to_bytes(4, "big") + p)
    return h.digest(32)
