"""Recursive Length Prefix encoding (Ethereum yellow paper, appendix B)."""

from __future__ import annotations

from typing import Union

Item = Union[bytes, list]


class RlpError(ValueError):
    pass


def _length_prefix(n: int, short: int) -> bytes:
    if n < 56:
        return bytes([short + n])
    ln = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return bytes([short + 55 + len(ln)]) + ln


def encode(item) -> bytes:
    if isinstance(item, (bytes, bytearray)):
        item = bytes(item)
        if len(item) == 1 and item[0] < 0x80:
            return item
        return _length_prefix(len(item), 0x80) + item
    if isinstance(item, (list, tuple)):
        body = b"".join(encode(x) for x in item)
        return _length_prefix(len(body), 0xC0) + body
    if isinstance(item, int) and not isinstance(item, bool):
        return encode(int_to_bytes(item))
    raise TypeError(f"cannot RLP-encode {type(item).__name__}")


def int_to_bytes(x: int) -> bytes:
    """Minimal big-endian; zero is the empty string."""
    if x < 0:
        raise ValueError("RLP integers are non-negative")
    return x.to_bytes((x.bit_length() + 7) // 8, "big")


def bytes_to_int(b: bytes) -> int:
    if b[:1] == b"\x00":
        raise RlpError("integer has leading zero bytes")
    return int.from_bytes(b, "big")


def _decode_at(data: bytes, pos: int) -> tuple[Item, int]:
    if pos >= len(data):
        raise RlpError("unexpected end of input")
    b0 = data[pos]
    if b0 < 0x80:
        return data[pos:pos + 1], pos + 1
    if b0 < 0xB8:
        n = b0 - 0x80
        end = pos + 1 + n
        if end > len(data):
            raise RlpError("string exceeds input")
        s = data[pos + 1:end]
        if n == 1 and s[0] < 0x80:
            raise RlpError("single byte below 0x80 must not be prefixed")
        return s, end
    if b0 < 0xC0:
        ll = b0 - 0xB7
        n = _long_len(data, pos, ll)
        start = pos + 1 + ll
        if start + n > len(data):
            raise RlpError("string exceeds input")
        return data[start:start + n], start + n
    if b0 < 0xF8:
        n = b0 - 0xC0
        start = pos + 1
    else:
        ll = b0 - 0xF7
        n = _long_len(data, pos, ll)
        start = pos + 1 + ll
    end = start + n
    if end > len(data):
        raise RlpError("list exceeds input")
    out = []
    p = start
    while p < end:
        item, p = _decode_at(data, p)
        out.append(item)
    if p != end:
        raise RlpError("list payload overrun")
    return out, end


def _long_len(data: bytes, pos: int, ll: int) -> int:
    raw = data[pos + 1:pos + 1 + ll]
    if len(raw) != ll:
        raise RlpError("truncated length")
    if raw[0] == 0:
        raise RlpError("length has leading zeros")
    n = int.from_bytes(raw, "big")
    if n < 56:
        raise RlpError("long form used for short payload")
    return n


def decode(data: bytes) -> Item:
    """Strict decoder: rejects non-canonical forms and trailing bytes."""
    data = bytes(data)
    item, end = _decode_at(data, 0)
    if end != len(data):
        raise RlpError("trailing bytes")
    return item
