"""Canonical tag-length-value encoding used by certificates, CSRs and
meta-transaction payloads.

Layout: magic(4) || version(u8) || fields, each u8 tag || u32 length || value,
in a fixed order. Decoding insists on that exact order and no trailing
bytes, so every value has exactly one encoding.
"""

from __future__ import annotations

import binascii
import struct
import textwrap


class TlvError(ValueError):
    pass


def encode(magic: bytes, version: int, fields: list[bytes]) -> bytes:
    out = bytearray(magic)
    out.append(version)
    for tag, value in enumerate(fields, start=1):
        out += struct.pack(">BI", tag, len(value)) + value
    return bytes(out)


def decode(data: bytes, magic: bytes, version: int, count: int) -> list[bytes]:
    data = bytes(data)
    if data[:4] != magic:
        raise TlvError(f"bad magic, expected {magic!r}")
    if len(data) < 5 or data[4] != version:
        raise TlvError("unknown version")
    pos = 5
    out = []
    for tag in range(1, count + 1):
        if pos + 5 > len(data):
            raise TlvError("truncated field header")
        t, n = struct.unpack(">BI", data[pos:pos + 5])
        if t != tag:
            raise TlvError(f"expected tag {tag}, found {t}")
        pos += 5
        if pos + n > len(data):
            raise TlvError("field length exceeds input")
        out.append(data[pos:pos + n])
        pos += n
    if pos != len(data):
        raise TlvError("trailing bytes")
    return out


def u64(x: int) -> bytes:
    return x.to_bytes(8, "big")


def read_u64(b: bytes) -> int:
    if len(b) != 8:
        raise TlvError("u64 field must be 8 bytes")
    return int.from_bytes(b, "big")


def text(s: str) -> bytes:
    return s.encode("utf-8")


def read_text(b: bytes) -> str:
    try:
        return b.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TlvError("invalid utf-8") from exc


def armor(data: bytes, label: str) -> str:
    body = "\n".join(textwrap.wrap(data.hex(), 64))
    return f"-----BEGIN {label}-----\n{body}\n-----END {label}-----\n"


def dearmor(s: str, label: str) -> bytes:
    lines = [ln.strip() for ln in s.strip().splitlines()]
    if len(lines) < 2 or lines[0] != f"-----BEGIN {label}-----" or lines[-1] != f"-----END {label}-----":
        raise TlvError(f"missing {label} armor markers")
    try:
        return binascii.unhexlify("".join(lines[1:-1]))
    except binascii.Error as exc:
        raise TlvError("armored body is not hex") from exc
