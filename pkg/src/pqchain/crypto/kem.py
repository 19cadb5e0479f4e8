"""KEM interface keyed by an algorithm identifier string."""

from __future__ import annotations

from dataclasses import dataclass

from . import mlkem
from .hashing import shake256

DEFAULT_KEM = "ML-KEM-768"


class KemError(ValueError):
    pass


_SIZES = {DEFAULT_KEM: (mlkem.EK_LEN, mlkem.DK_LEN, mlkem.CT_LEN)}


def _require(algorithm: str) -> None:
    if algorithm not in _SIZES:
        raise KemError(f"unsupported KEM algorithm {algorithm!r}")


@dataclass(frozen=True)
class KemKeyPair:
    algorithm: str
    public: bytes
    secret: bytes

    def __post_init__(self):
        _require(self.algorithm)
        ek, dk, _ = _SIZES[self.algorithm]
        if len(self.public) != ek or len(self.secret) != dk:
            raise KemError("KEM key length does not match algorithm")

    def __repr__(self) -> str:
        return f"KemKeyPair({self.algorithm}, public={self.public[:8].hex()}...)"


@dataclass(frozen=True)
class KemCiphertext:
    algorithm: str
    data: bytes

    def __post_init__(self):
        _require(self.algorithm)
        if len(self.data) != _SIZES[self.algorithm][2]:
            raise KemError("KEM ciphertext length does not match algorithm")


def kem_keygen(entropy: bytes, algorithm: str = DEFAULT_KEM) -> KemKeyPair:
    _require(algorithm)
    if len(entropy) < 32:
        raise KemError("KEM key generation needs at least 32 bytes of entropy")
    seed = entropy if len(entropy) == 64 else shake256(b"kem-keygen" + entropy, 64)
    ek, dk = mlkem.keygen(seed)
    return KemKeyPair(algorithm, ek, dk)


def kem_encap(public: bytes, entropy: bytes, algorithm: str = DEFAULT_KEM) -> tuple[KemCiphertext, bytes]:
    """(ciphertext, 32-byte shared secret)."""
    _require(algorithm)
    m = entropy if len(entropy) == 32 else shake256(b"kem-encap" + entropy, 32)
    try:
        secret, ct = mlkem.encaps(public, m)
    except ValueError as exc:
        raise KemError(str(exc)) from exc
    return KemCiphertext(algorithm, ct), secret


def kem_decap(ciphertext: KemCiphertext | bytes, key: KemKeyPair) -> bytes:
    data = ciphertext.data if isinstance(ciphertext, KemCiphertext) else bytes(ciphertext)
    if isinstance(ciphertext, KemCiphertext) and ciphertext.algorithm != key.algorithm:
        raise KemError("ciphertext and key use different KEM algorithms")
    try:
        return mlkem.decaps(key.secret, data)
    except ValueError as exc:
        raise KemError(str(exc)) from exc
