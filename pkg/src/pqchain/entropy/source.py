"""Mock certified-entropy source.

Test mode expands a seed with SHAKE256 (replayable, ``certified`` false);
live mode reads the OS generator and takes its certification flag from
configuration.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from ..crypto.hashing import shake256


@dataclass(frozen=True)
class EntropyBlock:
    data: bytes
    source_id: str
    certified: bool
    sequence: int

    def __repr__(self) -> str:
        # never print the bytes themselves
        return f"EntropyBlock(source={self.source_id!r}, seq={self.sequence}, len={len(self.data)})"


class EntropySource:
    def __init__(self, seed: bytes | None = None, source_id: str = "qrng-sim", certified: bool = False):
        self.source_id = source_id
        self._seed = None if seed is None else bytes(seed)
        self.certified = bool(certified) and seed is None
        self.sequence = 0
        self._issued: set[bytes] = set()

    @property
    def live(self) -> bool:
        return self._seed is None

    def _draw(self, n: int) -> bytes:
        if self._seed is None:
            return os.urandom(n)
        label = self.sequence.to_bytes(8, "big") + n.to_bytes(4, "big")
        return shake256(b"entropy-block" + label + self._seed, n)

    def generate(self, n: int) -> EntropyBlock:
        if n < 1:
            raise ValueError("entropy request must be at least 1 byte")
        while True:
            self.sequence += 1
            data = self._draw(n)
            fp = hashlib.sha256(data).digest()
            # a repeated block is never handed out; for n of a few bytes a
            # repeat is plausible, so just move on to the next sequence
            if fp not in self._issued:
                self._issued.add(fp)
                return EntropyBlock(data, self.source_id, self.certified, self.sequence)

    def random_bytes(self, n: int) -> bytes:
        return self.generate(n).data

    @property
    def issued_count(self) -> int:
        return len(self._issued)
