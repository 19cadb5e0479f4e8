"""Keccak-f[1600] sponge.

The in-house permutation exists for gas metering: every absorbed lane and
every permutation call can be counted. It is parameterised by the
domain-separation byte so it can be cross-checked against hashlib's SHA3 and
SHAKE. Plain Keccak-256 hashing (hot path) goes through pycryptodome, since
hashlib lacks the original Keccak padding.
"""

from __future__ import annotations

from Crypto.Hash import keccak as _ckeccak

_MASK = (1 << 64) - 1

_RC = [
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
]

# Rotation offsets indexed by x + 5*y.
_ROT = [
    0, 1, 62, 28, 27,
    36, 44, 6, 55, 20,
    3, 10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2, 61, 56, 14,
]

# pi step: lane (x, y) moves to (y, 2x + 3y).
_PI = [0] * 25
for _x in range(5):
    for _y in range(5):
        _PI[_x + 5 * _y] = _y + 5 * ((2 * _x + 3 * _y) % 5)


def _rotl(v: int, n: int) -> int:
    return ((v << n) | (v >> (64 - n))) & _MASK if n else v


def keccak_f1600(lanes: list[int]) -> None:
    """Apply the 24-round permutation in place to 25 little-endian lanes."""
    a = lanes
    for rc in _RC:
        c = [a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20] for x in range(5)]
        d = [c[(x - 1) % 5] ^ _rotl(c[(x + 1) % 5], 1) for x in range(5)]
        for i in range(25):
            a[i] ^= d[i % 5]
        b = [0] * 25
        for i in range(25):
            b[_PI[i]] = _rotl(a[i], _ROT[i])
        for y in range(0, 25, 5):
            row = b[y:y + 5]
            for x in range(5):
                a[y + x] = row[x] ^ ((~row[(x + 1) % 5]) & row[(x + 2) % 5])
        a[0] ^= rc


def _absorb(data: bytes, rate: int, suffix: int, meter) -> list[int]:
    lanes = [0] * 25
    padded = bytearray(data)
    padded.append(suffix)
    while len(padded) % rate:
        padded.append(0)
    padded[-1] |= 0x80
    for off in range(0, len(padded), rate):
        for i in range(rate // 8):
            lanes[i] ^= int.from_bytes(padded[off + 8 * i:off + 8 * i + 8], "little")
        keccak_f1600(lanes)
        if meter is not None:
            meter["hash_word"] += rate // 8
            meter["keccak_f"] += 1
    return lanes


def _rate_bytes(lanes: list[int], rate: int) -> bytes:
    return b"".join(lanes[i].to_bytes(8, "little") for i in range(rate // 8))


class Xof:
    """Incremental sponge reader.

    ``meter`` (a Counter) receives ``hash_word`` per 64-bit lane absorbed or
    squeezed and ``keccak_f`` per permutation call, which is what the gas
    model charges for hashing.
    """

    def __init__(self, data: bytes, rate: int = 136, suffix: int = 0x1F, meter=None):
        self._rate = rate
        self._meter = meter
        self._lanes = _absorb(bytes(data), rate, suffix, meter)
        self._buf = b""
        self._pos = 0
        self._fresh = True

    def _next_block(self) -> None:
        if not self._fresh:
            keccak_f1600(self._lanes)
            if self._meter is not None:
                self._meter["keccak_f"] += 1
        self._fresh = False
        self._buf = _rate_bytes(self._lanes, self._rate)
        self._pos = 0
        if self._meter is not None:
            self._meter["hash_word"] += self._rate // 8

    def read(self, n: int) -> bytes:
        out = bytearray()
        while n:
            if self._pos == len(self._buf):
                self._next_block()
            take = min(n, len(self._buf) - self._pos)
            out += self._buf[self._pos:self._pos + take]
            self._pos += take
            n -= take
        return bytes(out)


def sponge(data: bytes, rate: int, suffix: int, out_len: int, meter=None) -> bytes:
    """Absorb ``data`` and squeeze ``out_len`` bytes.

    ``suffix`` is the domain byte OR-ed in before the final 0x80 pad bit:
    0x01 for original Keccak, 0x06 for SHA3, 0x1F for SHAKE.
    """
    return Xof(data, rate, suffix, meter).read(out_len)


def keccak256_reference(data: bytes) -> bytes:
    """Ethereum Keccak-256 (pre-FIPS padding) through the sponge above."""
    return sponge(bytes(data), 136, 0x01, 32)


def keccak256(data: bytes) -> bytes:
    """Ethereum Keccak-256; the C implementation, same output as the reference."""
    return _ckeccak.new(digest_bits=256, data=bytes(data)).digest()
