"""Falcon signing: LDL tree, fast-Fourier sampling, signature assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fft as F_
from .codec import compress
from .hash_to_point import hash_to_point
from .params import (
    INV_SIGMA,
    NONCE_LEN,
    SIG_BOUND,
    SIG_COMPRESSED_HEADER,
    SIG_PADDED_LEN,
    SIGMA_MIN,
    N,
    Q,
)
from .sampler import ChaChaPrng, sample_z


def _ldl_tree(g00, g01, g11, n: int):
    if n == 1:
        return float(np.sqrt(g00[0].real)) * INV_SIGMA
    mu = g01 / g00
    d11 = g11 - mu * np.conj(g01)
    l10 = np.conj(mu)
    a0, a1 = F_.split(g00, n)
    b0, b1 = F_.split(d11, n)
    left = _ldl_tree(a0, a1, a0, n // 2)
    right = _ldl_tree(b0, b1, b0, n // 2)
    return (l10, left, right)


def _ff_sampling(t0, t1, tree, n: int, prng):
    if n == 1:
        z0 = sample_z(prng, float(t0[0].real), tree, SIGMA_MIN)
        z1 = sample_z(prng, float(t1[0].real), tree, SIGMA_MIN)
        return np.array([float(z0)]), np.array([float(z1)])
    l10, left, right = tree
    h = n // 2
    a, b = F_.split(t1, n)
    za, zb = _ff_sampling(a, b, right, h, prng)
    z1 = F_.merge(za, zb, n)
    t0b = t0 + (t1 - z1) * l10
    a, b = F_.split(t0b, n)
    za, zb = _ff_sampling(a, b, left, h, prng)
    z0 = F_.merge(za, zb, n)
    return z0, z1


@dataclass(frozen=True)
class ExpandedKey:
    """Secret basis [[g, -f], [G, -F]] in FFT form plus its LDL tree."""

    b00: np.ndarray
    b01: np.ndarray
    b10: np.ndarray
    b11: np.ndarray
    tree: tuple


def expand_key(f, g, F, G) -> ExpandedKey:
    b00 = F_.fft(g)
    b01 = F_.fft([-x for x in f])
    b10 = F_.fft(G)
    b11 = F_.fft([-x for x in F])
    g00 = b00 * np.conj(b00) + b01 * np.conj(b01)
    g01 = b00 * np.conj(b10) + b01 * np.conj(b11)
    g11 = b10 * np.conj(b10) + b11 * np.conj(b11)
    return ExpandedKey(b00, b01, b10, b11, _ldl_tree(g00, g01, g11, N))


def sample_short(key: ExpandedKey, hm: list[int], seed: bytes) -> list[int] | None:
    """One signing attempt; returns s2, or None when (s1, s2) is too long."""
    prng = ChaChaPrng(seed)
    c = F_.fft(hm)
    t0 = (c * key.b11) * (1.0 / Q)
    t1 = (c * key.b01) * (-1.0 / Q)
    z0, z1 = _ff_sampling(t0, t1, key.tree, N, prng)
    v0 = F_.ifft(z0 * key.b00 + z1 * key.b10)
    v1 = F_.ifft(z0 * key.b01 + z1 * key.b11)
    s1 = np.asarray(hm, dtype=np.int64) - np.rint(v0).astype(np.int64)
    s2 = -np.rint(v1).astype(np.int64)
    if int(s1 @ s1) + int(s2 @ s2) > SIG_BOUND:
        return None
    return [int(x) for x in s2]


def sign(key: ExpandedKey, message: bytes, rng, max_attempts: int = 1000) -> bytes:
    """Padded-format signature.

    ``rng`` exposes ``squeeze(n)``; it supplies the 40-byte nonce and then
    one 56-byte sampler seed per attempt.
    """
    nonce = rng.squeeze(NONCE_LEN)
    hm = hash_to_point(nonce + message)
    body_len = SIG_PADDED_LEN - 1 - NONCE_LEN
    for _ in range(max_attempts):
        s2 = sample_short(key, hm, rng.squeeze(56))
        if s2 is None:
            continue
        body = compress(s2, body_len)
        if body is None:
            continue
        return bytes([SIG_COMPRESSED_HEADER]) + nonce + body + bytes(body_len - len(body))
    raise RuntimeError("signing did not converge")
