"""Byte encodings for Falcon keys and signatures."""

from __future__ import annotations

import numpy as np

from .params import (
    BIG_F_BITS,
    FG_BITS,
    PK_HEADER,
    PUBLIC_KEY_LEN,
    SECRET_KEY_LEN,
    SK_HEADER,
    N,
    Q,
)


class DecodeError(ValueError):
    """Raised for any byte string that is not a canonical encoding."""


def _pack(values, bits: int) -> bytes:
    acc = 0
    for v in values:
        acc = (acc << bits) | v
    total = bits * len(values)
    pad = -total % 8
    return (acc << pad).to_bytes((total + pad) // 8, "big")


def _unpack(data: bytes, bits: int, count: int) -> list[int]:
    total = bits * count
    if len(data) * 8 < total:
        raise DecodeError("truncated field")
    acc = int.from_bytes(data, "big")
    spare = len(data) * 8 - total
    if acc & ((1 << spare) - 1):
        raise DecodeError("non-zero padding bits")
    acc >>= spare
    mask = (1 << bits) - 1
    return [(acc >> (bits * (count - 1 - i))) & mask for i in range(count)]


def encode_public_key(h: list[int]) -> bytes:
    if len(h) != N or any(not 0 <= x < Q for x in h):
        raise ValueError("public polynomial out of range")
    return bytes([PK_HEADER]) + _pack(h, 14)


def decode_public_key(data: bytes) -> list[int]:
    if len(data) != PUBLIC_KEY_LEN:
        raise DecodeError(f"public key must be {PUBLIC_KEY_LEN} bytes")
    if data[0] != PK_HEADER:
        raise DecodeError("bad public key header")
    h = _unpack(data[1:], 14, N)
    if any(x >= Q for x in h):
        raise DecodeError("public key coefficient >= q")
    return h


def _signed_pack(values, bits: int) -> bytes:
    lim = (1 << (bits - 1)) - 1
    if any(not -lim <= v <= lim for v in values):
        raise ValueError(f"coefficient does not fit in {bits} bits")
    return _pack([v & ((1 << bits) - 1) for v in values], bits)


def _signed_unpack(data: bytes, bits: int) -> list[int]:
    raw = _unpack(data, bits, N)
    top = 1 << (bits - 1)
    out = []
    for r in raw:
        if r == top:
            raise DecodeError("reserved minimum value in secret key")
        out.append(r - (1 << bits) if r & top else r)
    return out


def encode_secret_key(f, g, F) -> bytes:
    return (
        bytes([SK_HEADER])
        + _signed_pack(f, FG_BITS)
        + _signed_pack(g, FG_BITS)
        + _signed_pack(F, BIG_F_BITS)
    )


def decode_secret_key(data: bytes) -> tuple[list[int], list[int], list[int]]:
    if len(data) != SECRET_KEY_LEN:
        raise DecodeError(f"secret key must be {SECRET_KEY_LEN} bytes")
    if data[0] != SK_HEADER:
        raise DecodeError("bad secret key header")
    fg_len = FG_BITS * N // 8
    f = _signed_unpack(data[1:1 + fg_len], FG_BITS)
    g = _signed_unpack(data[1 + fg_len:1 + 2 * fg_len], FG_BITS)
    F = _signed_unpack(data[1 + 2 * fg_len:], BIG_F_BITS)
    return f, g, F


def compress(s: list[int], max_len: int) -> bytes | None:
    """Sign bit, 7 low bits, then the high bits in unary.

    Returns None when a coefficient is out of range or the output would
    exceed ``max_len`` bytes.
    """
    parts = []
    for v in s:
        if not -2047 <= v <= 2047:
            return None
        m = abs(v)
        parts.append("1" if v < 0 else "0")
        parts.append(format(m & 127, "07b"))
        parts.append("0" * (m >> 7) + "1")
    bits = "".join(parts)
    bits += "0" * (-len(bits) % 8)
    if len(bits) // 8 > max_len:
        return None
    return int(bits, 2).to_bytes(len(bits) // 8, "big")


def decompress(data: bytes, n: int = N) -> tuple[list[int], int]:
    """Decode n coefficients; returns (coefficients, bytes consumed).

    Rejects negative zero, magnitudes above 2047, truncated input and
    non-zero trailing bits in the last consumed byte.
    """
    arr = np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))
    nbits = len(arr)
    # low7[i]: the 7 bits starting at i as an integer; nxt[i]: first set bit >= i
    padded = np.concatenate([arr, np.zeros(7, dtype=np.uint8)]).astype(np.int64)
    low7 = np.zeros(nbits, dtype=np.int64)
    for j in range(7):
        low7 += padded[j:j + nbits] << (6 - j)
    idx = np.where(arr == 1, np.arange(nbits), nbits)
    nxt = np.minimum.accumulate(idx[::-1])[::-1]
    bits, low7, nxt = arr.tolist(), low7.tolist(), nxt.tolist() + [nbits]
    pos = 0
    out = []
    for _ in range(n):
        if pos + 8 > nbits:
            raise DecodeError("truncated signature")
        neg = bits[pos]
        m = low7[pos + 1]
        pos += 8
        stop = nxt[pos]
        if stop == nbits:
            raise DecodeError("truncated signature")
        m += 128 * (stop - pos)
        if m > 2047:
            raise DecodeError("coefficient magnitude too large")
        pos = stop + 1
        if neg and m == 0:
            raise DecodeError("negative zero")
        out.append(-m if neg else m)
    used = (pos + 7) // 8
    if any(bits[pos:used * 8]):
        raise DecodeError("non-zero trailing bits")
    return out, used


def decompress_reference(data: bytes, n: int = N) -> tuple[list[int], int]:
    """String-based decoder with the same contract as :func:`decompress`."""
    bits = "".join(format(b, "08b") for b in data)
    pos = 0
    out = []
    for _ in range(n):
        if pos + 8 > len(bits):
            raise DecodeError("truncated signature")
        neg = bits[pos] == "1"
        m = int(bits[pos + 1:pos + 8], 2)
        pos += 8
        stop = bits.find("1", pos)
        if stop < 0:
            raise DecodeError("truncated signature")
        m += 128 * (stop - pos)
        if m > 2047:
            raise DecodeError("coefficient magnitude too large")
        pos = stop + 1
        if neg and m == 0:
            raise DecodeError("negative zero")
        out.append(-m if neg else m)
    used = (pos + 7) // 8
    if "1" in bits[pos:used * 8]:
        raise DecodeError("non-zero trailing bits")
    return out, used
