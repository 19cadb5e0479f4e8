"""Length-prefixed binary frames: u32 length (big-endian) || u8 type || payload.

The length counts the type byte plus the payload.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field


class FrameType(enum.IntEnum):
    SHARE = 1
    AUTH = 2
    KEM_PUB = 3
    KEM_CT = 4
    CONFIRM = 5
    ENTROPY_REQ = 6
    ENTROPY_RESP = 7
    # tunnel handshake and records
    HELLO = 16
    HELLO_REPLY = 17
    KEY_EXCHANGE = 18
    FINISHED = 19
    RECORD = 20
    ERROR = 255


class FrameError(ValueError):
    pass


MAX_FRAME = 1 << 24


def encode_frame(kind: FrameType, payload: bytes) -> bytes:
    if len(payload) + 1 > MAX_FRAME:
        raise FrameError("frame too large")
    return struct.pack(">IB", len(payload) + 1, int(kind)) + payload


def decode_frame(data: bytes) -> tuple[FrameType, bytes]:
    """Decode exactly one frame; trailing bytes are an error."""
    kind, payload, rest = read_frame(data)
    if rest:
        raise FrameError("trailing bytes after frame")
    return kind, payload


def read_frame(data: bytes) -> tuple[FrameType, bytes, bytes]:
    if len(data) < 5:
        raise FrameError("truncated frame header")
    length, kind = struct.unpack(">IB", data[:5])
    if length < 1 or length > MAX_FRAME or len(data) < 4 + length:
        raise FrameError("bad frame length")
    try:
        kind = FrameType(kind)
    except ValueError as exc:
        raise FrameError(f"unknown frame type {kind}") from exc
    return kind, bytes(data[5:4 + length]), bytes(data[4 + length:])


def pack_fields(*parts: bytes) -> bytes:
    """u16-length-prefixed concatenation."""
    out = bytearray()
    for p in parts:
        if len(p) > 0xFFFF:
            raise FrameError("field too long")
        out += struct.pack(">H", len(p)) + p
    return bytes(out)


def unpack_fields(data: bytes, count: int) -> list[bytes]:
    out, pos = [], 0
    for _ in range(count):
        if pos + 2 > len(data):
            raise FrameError("truncated field")
        (n,) = struct.unpack(">H", data[pos:pos + 2])
        pos += 2
        if pos + n > len(data):
            raise FrameError("truncated field")
        out.append(data[pos:pos + n])
        pos += n
    if pos != len(data):
        raise FrameError("trailing bytes in payload")
    return out


@dataclass
class WireLog:
    """Every frame that crossed a simulated channel, in order."""

    entries: list[tuple[str, str, bytes]] = field(default_factory=list)

    def record(self, channel: str, direction: str, frame: bytes) -> None:
        self.entries.append((channel, direction, frame))

    def contains(self, needle: bytes) -> bool:
        return any(needle in frame for _, _, frame in self.entries)

    def frames(self, kind: FrameType | None = None) -> list[bytes]:
        out = []
        for _, _, frame in self.entries:
            if kind is None or frame[4] == kind:
                out.append(frame)
        return out

    def __len__(self) -> int:
        return len(self.entries)
