"""AES-256-GCM record protection with 16-byte structured nonces.

Nonces are an 8-byte direction label followed by an 8-byte big-endian
counter, so the two directions of a channel can never collide.
"""

from __future__ import annotations

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

KEY_LEN = 32
NONCE_LEN = 16
TAG_LEN = 16


class TagInvalid(ValueError):
    """Authentication failed: wrong key, nonce, associated data or ciphertext."""


def seal(key: bytes, nonce: bytes, plaintext: bytes, aad: bytes = b"") -> bytes:
    """Ciphertext with the 16-byte tag appended."""
    return AESGCM(key).encrypt(nonce, plaintext, aad)


def open_(key: bytes, nonce: bytes, ciphertext: bytes, aad: bytes = b"") -> bytes:
    if len(ciphertext) < TAG_LEN:
        raise TagInvalid("record shorter than the tag")
    try:
        return AESGCM(key).decrypt(nonce, ciphertext, aad)
    except InvalidTag as exc:
        raise TagInvalid("AEAD tag mismatch") from exc


def counter_nonce(direction: bytes, counter: int) -> bytes:
    if len(direction) > 8:
        raise ValueError("direction label is at most 8 bytes")
    return direction.ljust(8, b"\0") + counter.to_bytes(8, "big")
