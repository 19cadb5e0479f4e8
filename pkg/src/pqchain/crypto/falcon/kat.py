"""Reader for the signing known-answer file used by tests and ``bench``.

One vector per line: f g F G (int8 hex) nonce prng_seeds s2 signature.
Every vector signs the same message.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codec import encode_public_key
from .ntt import inverse_mod_q, mul_mod_q

KAT_MESSAGE = b"data1"


def _int8s(h: str) -> list[int]:
    return [b - 256 if b > 127 else b for b in bytes.fromhex(h)]


def _int16s(h: str) -> list[int]:
    raw = bytes.fromhex(h)
    return [int.from_bytes(raw[i:i + 2], "big", signed=True) for i in range(0, len(raw), 2)]


@dataclass(frozen=True)
class SignVector:
    index: int
    f: list[int]
    g: list[int]
    F: list[int]
    G: list[int]
    nonce: bytes
    seeds: list[bytes]
    s2: list[int]
    signature: bytes
    message: bytes = KAT_MESSAGE

    def public_key(self) -> bytes:
        h = mul_mod_q(self.g, inverse_mod_q(self.f))
        return encode_public_key([int(x) for x in h])


def parse_sign_kat(text: str) -> list[SignVector]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ValueError(f"KAT line {len(out) + 1}: expected 8 fields, got {len(parts)}")
        f, g, F, G, nonce, seeds, s2, sig = parts
        out.append(SignVector(
            len(out), _int8s(f), _int8s(g), _int8s(F), _int8s(G), bytes.fromhex(nonce),
            [bytes.fromhex(s) for s in seeds.split(",")], _int16s(s2), bytes.fromhex(sig),
        ))
    return out


def load_sign_kat(path) -> list[SignVector]:
    with open(path) as fh:
        return parse_sign_kat(fh.read())
