"""ChaCha20-based PRNG and the discrete Gaussian sampler used when signing.

Byte layout and constants follow the Falcon reference implementation so that
signatures are reproducible from a given SHAKE256 randomness stream.
"""

from __future__ import annotations

import math
import struct

from cryptography.hazmat.primitives.ciphers import Cipher
from cryptography.hazmat.primitives.ciphers.algorithms import ChaCha20

from .params import INV_2SQRSIGMA0, INV_LN2, LN2

_M32 = 0xFFFFFFFF
_M64 = (1 << 64) - 1
_CW = (0x61707865, 0x3320646E, 0x79622D32, 0x6B206574)


def _chacha_block(words: list[int], cc: int) -> list[int]:
    s = list(_CW) + words[:12]
    s[14] ^= cc & _M32
    s[15] ^= cc >> 32
    x = list(s)

    def qr(a, b, c, d):
        x[a] = (x[a] + x[b]) & _M32
        t = x[d] ^ x[a]
        x[d] = ((t << 16) | (t >> 16)) & _M32
        x[c] = (x[c] + x[d]) & _M32
        t = x[b] ^ x[c]
        x[b] = ((t << 12) | (t >> 20)) & _M32
        x[a] = (x[a] + x[b]) & _M32
        t = x[d] ^ x[a]
        x[d] = ((t << 8) | (t >> 24)) & _M32
        x[c] = (x[c] + x[d]) & _M32
        t = x[b] ^ x[c]
        x[b] = ((t << 7) | (t >> 25)) & _M32

    for _ in range(10):
        qr(0, 4, 8, 12)
        qr(1, 5, 9, 13)
        qr(2, 6, 10, 14)
        qr(3, 7, 11, 15)
        qr(0, 5, 10, 15)
        qr(1, 6, 11, 12)
        qr(2, 7, 8, 13)
        qr(3, 4, 9, 14)
    return [(x[i] + s[i]) & _M32 for i in range(16)]


class ChaChaPrng:
    """Eight interleaved ChaCha20 blocks per 512-byte refill.

    Seeded with 56 bytes: 48 bytes of key/IV state and a 64-bit
    little-endian block counter.
    """

    BUF_LEN = 512

    def __init__(self, seed: bytes):
        if len(seed) != 56:
            raise ValueError("PRNG seed must be 56 bytes")
        self._words = list(struct.unpack("<12I", seed[:48]))
        self._key = seed[:32]
        self._cc = int.from_bytes(seed[48:56], "little")
        self._buf = b""
        self._ptr = 0
        self._refill()

    def _refill(self) -> None:
        # Each block is plain ChaCha20 whose last four state words are
        # (w8, w9, w10 ^ cc_lo, w11 ^ cc_hi); the 16-byte "nonce" of the
        # library cipher is exactly those four words.
        buf = bytearray(self.BUF_LEN)
        w = self._words
        for u in range(8):
            cc = self._cc
            iv = struct.pack("<4I", w[8], w[9], w[10] ^ (cc & _M32), w[11] ^ (cc >> 32))
            ks = Cipher(ChaCha20(self._key, iv), None).encryptor().update(bytes(64))
            self._cc = (cc + 1) & _M64
            for v in range(16):
                off = (u << 2) + (v << 5)
                buf[off:off + 4] = ks[4 * v:4 * v + 4]
        self._buf = bytes(buf)
        self._ptr = 0

    def _refill_reference(self) -> bytes:
        """Pure-Python refill; kept to cross-check the library-backed path."""
        buf = bytearray(self.BUF_LEN)
        cc = self._cc
        for u in range(8):
            block = _chacha_block(self._words, cc)
            cc = (cc + 1) & _M64
            for v, w in enumerate(block):
                off = (u << 2) + (v << 5)
                buf[off:off + 4] = w.to_bytes(4, "little")
        return bytes(buf)

    def get_u64(self) -> int:
        # leftover bytes are dropped rather than split across a refill
        if self._ptr >= self.BUF_LEN - 9:
            self._refill()
        u = self._ptr
        self._ptr = u + 8
        return int.from_bytes(self._buf[u:u + 8], "little")

    def get_u8(self) -> int:
        v = self._buf[self._ptr]
        self._ptr += 1
        if self._ptr == self.BUF_LEN:
            self._refill()
        return v


# Reverse cumulative distribution of the base half-Gaussian (sigma_max),
# scaled to 2^72.
RCDT = [
    3024686241123004913666, 1564742784480091954050, 636254429462080897535,
    199560484645026482916, 47667343854657281903, 8595902006365044063,
    1163297957344668388, 117656387352093658, 8867391802663976,
    496969357462633, 20680885154299, 638331848991, 14602316184,
    247426747, 3104126, 28824, 198, 1,
]

# Polynomial approximation of 2^63 * exp(-x), evaluated in fixed point.
EXP_COEFFS = [
    0x00000004741183A3, 0x00000036548CFC06, 0x0000024FDCBF140A,
    0x0000171D939DE045, 0x0000D00CF58F6F84, 0x000680681CF796E3,
    0x002D82D8305B0FEA, 0x011111110E066FD0, 0x0555555555070F00,
    0x155555555581FF00, 0x400000000002B400, 0x7FFFFFFFFFFF4800,
    0x8000000000000000,
]

_TWO63 = float(1 << 63)


def base_sample(rng) -> int:
    """Half-Gaussian sample in [0, 18] from 72 random bits."""
    lo = rng.get_u64()
    hi = rng.get_u8()
    v = lo | (hi << 64)
    return sum(1 for t in RCDT if v < t)


def approx_exp(x: float, ccs: float) -> int:
    """2^63 * ccs * exp(-x) for 0 <= x < ln 2, 0 < ccs <= 1 (64-bit result)."""
    y = EXP_COEFFS[0]
    z = int(x * _TWO63) << 1
    for c in EXP_COEFFS[1:]:
        y = (c - ((z * y) >> 64)) & _M64
    z = (int(ccs * _TWO63) << 1) & _M64
    return (z * y) >> 64


def ber_exp(rng, x: float, ccs: float) -> bool:
    """Bernoulli trial with probability ccs * exp(-x)."""
    s = int(x * INV_LN2)
    r = x - s * LN2
    s = min(s, 63)
    z = (((approx_exp(r, ccs) << 1) - 1) & _M64) >> s
    i = 64
    while True:
        i -= 8
        w = rng.get_u8() - ((z >> i) & 0xFF)
        if w != 0 or i <= 0:
            return w < 0


def sample_z(rng, mu: float, isigma: float, sigma_min: float) -> int:
    """Integer sample from D_{Z, mu, 1/isigma}."""
    s = math.floor(mu)
    r = mu - s
    dss = 0.5 * isigma * isigma
    ccs = isigma * sigma_min
    while True:
        z0 = base_sample(rng)
        b = rng.get_u8() & 1
        z = b + ((b << 1) - 1) * z0
        x = (z - r) ** 2 * dss - z0 * z0 * INV_2SQRSIGMA0
        if ber_exp(rng, x, ccs):
            return s + z
