"""Falcon-512: key generation, signing and verification."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

from ..hashing import ShakeStream
from .codec import DecodeError, decode_secret_key, encode_public_key, encode_secret_key
from .keygen import keygen as _keygen
from .keygen import recover_G
from .params import (
    PUBLIC_KEY_LEN,
    SECRET_KEY_LEN,
    SIG_COMPRESSED_HEADER,
    SIG_PADDED_LEN,
)
from .sign import ExpandedKey, expand_key, sign
from .verify import Outcome, verify, verify_metered

__all__ = [
    "DecodeError",
    "FalconKeyPair",
    "FalconSignature",
    "Outcome",
    "falcon_keygen",
    "falcon_sign",
    "falcon_verify",
    "falcon_verify_metered",
]


@dataclass(frozen=True)
class FalconKeyPair:
    secret: bytes
    public: bytes

    def __post_init__(self):
        if len(self.secret) != SECRET_KEY_LEN:
            raise ValueError(f"Falcon secret key must be {SECRET_KEY_LEN} bytes")
        if len(self.public) != PUBLIC_KEY_LEN:
            raise ValueError(f"Falcon public key must be {PUBLIC_KEY_LEN} bytes")

    def __repr__(self) -> str:
        return f"FalconKeyPair(public={self.public[:8].hex()}...)"


@dataclass(frozen=True)
class FalconSignature:
    data: bytes

    def __post_init__(self):
        if not 41 < len(self.data) <= SIG_PADDED_LEN or self.data[0] != SIG_COMPRESSED_HEADER:
            raise ValueError("not a Falcon-512 signature encoding")

    def __bytes__(self) -> bytes:
        return self.data

    def __len__(self) -> int:
        return len(self.data)


def falcon_keygen(entropy: bytes) -> FalconKeyPair:
    if len(entropy) < 32:
        raise ValueError("key generation needs at least 32 bytes of entropy")
    f, g, F, _G, h = _keygen(entropy)
    return FalconKeyPair(encode_secret_key(f, g, F), encode_public_key(h))


@lru_cache(maxsize=64)
def _expanded(secret: bytes) -> ExpandedKey:
    f, g, F = decode_secret_key(secret)
    return expand_key(f, g, F, recover_G(f, g, F))


def falcon_sign(msg: bytes, key, randomness: bytes = b"") -> FalconSignature:
    """Sign ``msg`` with a key pair (or raw secret key bytes).

    Without ``randomness`` signing is deterministic: the nonce and sampler
    seeds are derived from the secret key and the message.
    """
    secret = key.secret if isinstance(key, FalconKeyPair) else bytes(key)
    rng = ShakeStream(b"falcon-512 sign" + secret + len(msg).to_bytes(8, "big") + bytes(msg) + bytes(randomness))
    return FalconSignature(sign(_expanded(secret), bytes(msg), rng))


def _raw(sig) -> bytes:
    return sig.data if isinstance(sig, FalconSignature) else bytes(sig)


def falcon_verify(msg: bytes, sig, public: bytes) -> Outcome:
    return verify(bytes(msg), _raw(sig), bytes(public))


def falcon_verify_metered(msg: bytes, sig, public: bytes, meter: Counter | None = None) -> Outcome:
    return verify_metered(bytes(msg), _raw(sig), bytes(public), meter)
