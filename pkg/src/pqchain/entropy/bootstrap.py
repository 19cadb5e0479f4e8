"""All-or-nothing XOR split of the first (bootstrap) key."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import reduce

from .errors import Expired, MissingShare, MixedSession, ReusedKey

SESSION_ID_LEN = 16


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


@dataclass(frozen=True)
class BootstrapShare:
    session_id: bytes
    index: int
    total: int
    share: bytes
    expires_at: int

    def __post_init__(self):
        if len(self.session_id) != SESSION_ID_LEN:
            raise ValueError("session id must be 16 bytes")
        if not 1 <= self.index <= self.total or self.total > 255:
            raise ValueError("share index out of range")

    def encode(self) -> bytes:
        """session_id(16) || index(u8) || total(u8) || expires_at(u64) || share."""
        return self.session_id + struct.pack(">BBQ", self.index, self.total, self.expires_at) + self.share

    @classmethod
    def decode(cls, payload: bytes) -> BootstrapShare:
        if len(payload) < SESSION_ID_LEN + 10 + 1:
            raise ValueError("share payload too short")
        index, total, expires_at = struct.unpack(">BBQ", payload[16:26])
        return cls(payload[:16], index, total, payload[26:], expires_at)

    def __repr__(self) -> str:
        return f"BootstrapShare({self.session_id.hex()[:8]}, {self.index}/{self.total})"


def split_bootstrap_key(key: bytes, n_shares: int, source, session_id: bytes, expires_at: int) -> list[BootstrapShare]:
    """Shares 1..N-1 are fresh randomness from ``source.random_bytes``;
    share N is the key XOR all of them."""
    if n_shares < 2:
        raise ValueError("need at least two shares")
    if len(key) < 1:
        raise ValueError("empty key")
    shares = [source.random_bytes(len(key)) for _ in range(n_shares - 1)]
    shares.append(reduce(_xor, shares, bytes(key)))
    return [BootstrapShare(session_id, i + 1, n_shares, s, expires_at) for i, s in enumerate(shares)]


def recompose_bootstrap_key(shares: list[BootstrapShare], now: int, spent: set[bytes]) -> bytearray:
    """XOR of the full share set; ``spent`` records sessions already used.

    The result is a bytearray so the holder can zero it after one use.
    """
    if not shares:
        raise MissingShare("no shares received")
    sid, total = shares[0].session_id, shares[0].total
    if any(s.session_id != sid or s.total != total for s in shares):
        raise MixedSession("shares belong to different sessions")
    if len({len(s.share) for s in shares}) != 1:
        raise MixedSession("share lengths differ")
    by_index = {s.index: s for s in shares}
    if len(by_index) != total:
        raise MissingShare(f"{len(by_index)} of {total} shares")
    if any(now >= s.expires_at for s in shares):
        raise Expired("share received after the deadline")
    if sid in spent:
        raise ReusedKey("bootstrap key for this session was already recomposed")
    spent.add(sid)
    key = bytearray(len(shares[0].share))
    for s in by_index.values():
        for i, b in enumerate(s.share):
            key[i] ^= b
    return key
