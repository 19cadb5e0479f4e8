"""ECDSA over secp256k1 with public-key recovery (Ethereum flavour).

Nonces are deterministic (RFC 6979, HMAC-SHA256) and s is normalised to the
lower half of the group order; the recovery id is flipped accordingly.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec, utils

from .keccak import keccak256

P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8


class RecoveryError(ValueError):
    pass


# Jacobian coordinates (X, Y, Z); Z == 0 is the point at infinity.
_INF = (0, 1, 0)


def _double(p):
    x, y, z = p
    if z == 0 or y == 0:
        return _INF
    ysq = y * y % P
    s = 4 * x * ysq % P
    m = 3 * x * x % P
    nx = (m * m - 2 * s) % P
    ny = (m * (s - nx) - 8 * ysq * ysq) % P
    return nx, ny, 2 * y * z % P


def _add(p, q):
    if p[2] == 0:
        return q
    if q[2] == 0:
        return p
    x1, y1, z1 = p
    x2, y2, z2 = q
    z1s, z2s = z1 * z1 % P, z2 * z2 % P
    u1, u2 = x1 * z2s % P, x2 * z1s % P
    s1, s2 = y1 * z2s * z2 % P, y2 * z1s * z1 % P
    if u1 == u2:
        return _double(p) if s1 == s2 else _INF
    h, r = (u2 - u1) % P, (s2 - s1) % P
    h2 = h * h % P
    h3 = h * h2 % P
    u1h2 = u1 * h2 % P
    nx = (r * r - h3 - 2 * u1h2) % P
    ny = (r * (u1h2 - nx) - s1 * h3) % P
    return nx, ny, h * z1 * z2 % P


def _add_affine(p, q):
    """p (Jacobian) + q (affine, as a Jacobian triple with z = 1)."""
    if p[2] == 0:
        return q
    x1, y1, z1 = p
    x2, y2, _ = q
    z1s = z1 * z1 % P
    u2 = x2 * z1s % P
    s2 = y2 * z1s * z1 % P
    if x1 == u2:
        return _double(p) if y1 == s2 else _INF
    h, r = (u2 - x1) % P, (s2 - y1) % P
    h2 = h * h % P
    h3 = h * h2 % P
    u1h2 = x1 * h2 % P
    nx = (r * r - h3 - 2 * u1h2) % P
    ny = (r * (u1h2 - nx) - y1 * h3) % P
    return nx, ny, h * z1 % P


def _mul_naive(k: int, p):
    """Plain double-and-add; kept as the reference for the faster paths."""
    acc = _INF
    for bit in bin(k)[2:]:
        acc = _double(acc)
        if bit == "1":
            acc = _add(acc, p)
    return acc


# GLV endomorphism: phi(x, y) = (BETA * x, y) equals LAMBDA * (x, y)
_BETA = 0x7AE96A2B657C07106E64479EAC3434E99CF0497512F58995C1396C28719501EE
_LAMBDA = 0x5363AD4CC05C30E0A5261C028812645A122E22EA20816678DF02967C1B23BD72
_A1, _B1 = 0x3086D221A7D46BCDE86C90E49284EB15, -0xE4437ED6010E88286F547FA90ABFE4C3
_A2, _B2 = 0x114CA50F7A8E2F3F657C1108D9D44CFD8, 0x3086D221A7D46BCDE86C90E49284EB15


def _split_scalar(k: int) -> tuple[int, int]:
    """k = k1 + k2 * LAMBDA (mod N) with |k1|, |k2| around 2^128."""
    c1 = (_B2 * k + N // 2) // N
    c2 = (-_B1 * k + N // 2) // N
    return k - c1 * _A1 - c2 * _A2, -c1 * _B1 - c2 * _B2


def _window_table(p):
    table = [_INF, p]
    for _ in range(14):
        table.append(_add(table[-1], p))
    return table


def _neg(p):
    return (p[0], (-p[1]) % P, p[2])


def _mul(k: int, p):
    """Variable-base multiply: GLV split, then a joint 4-bit window."""
    k %= N
    if k == 0 or p[2] == 0:
        return _INF
    k1, k2 = _split_scalar(k)
    p1 = p
    p2 = ((_BETA * p[0]) % P, p[1], p[2])
    if k1 < 0:
        k1, p1 = -k1, _neg(p1)
    if k2 < 0:
        k2, p2 = -k2, _neg(p2)
    t1, t2 = _window_table(p1), _window_table(p2)
    top = max(k1.bit_length(), k2.bit_length())
    acc = _INF
    for shift in range((top + 3) // 4 * 4 - 4, -1, -4):
        if acc[2]:
            acc = _double(_double(_double(_double(acc))))
        d1 = (k1 >> shift) & 15
        d2 = (k2 >> shift) & 15
        if d1:
            acc = _add(acc, t1[d1])
        if d2:
            acc = _add(acc, t2[d2])
    return acc


_COMB = None


def _comb_table():
    # _COMB[i][d] = d * 16^i * G in affine form (z = 1), d in 1..15
    global _COMB
    if _COMB is None:
        rows = []
        base = (GX, GY, 1)
        for _ in range(64):
            row = [None, base]
            for _ in range(14):
                row.append(_add(row[-1], base))
            row = [None] + [(*_affine(q), 1) for q in row[1:]]
            rows.append(row)
            base = (*_affine(_double(_double(_double(_double(base))))), 1)
        _COMB = rows
    return _COMB


def _mul_g(k: int):
    """k * G with the precomputed comb: one mixed addition per nonzero nibble."""
    table = _comb_table()
    acc = _INF
    i = 0
    while k:
        d = k & 15
        if d:
            acc = _add_affine(acc, table[i][d])
        k >>= 4
        i += 1
    return acc


def _affine(p) -> tuple[int, int] | None:
    x, y, z = p
    if z == 0:
        return None
    zi = pow(z, -1, P)
    zi2 = zi * zi % P
    return x * zi2 % P, y * zi2 * zi % P


_G = (GX, GY, 1)


def point_mul(k: int, point: tuple[int, int] | None = None) -> tuple[int, int] | None:
    if point is None:
        return _affine(_mul_g(k % N))
    return _affine(_mul(k % N, (point[0], point[1], 1)))


def _on_curve(x: int, y: int) -> bool:
    return (y * y - x * x * x - 7) % P == 0


@dataclass(frozen=True)
class EcdsaKeyPair:
    secret: bytes
    public: bytes

    def __post_init__(self):
        if len(self.secret) != 32 or len(self.public) != 64:
            raise ValueError("secp256k1 keys are 32-byte secrets and 64-byte public points")
        d = int.from_bytes(self.secret, "big")
        if not 0 < d < N:
            raise ValueError("secret scalar out of range")

    @classmethod
    def from_secret(cls, secret: bytes | int) -> EcdsaKeyPair:
        d = secret if isinstance(secret, int) else int.from_bytes(secret, "big")
        if not 0 < d < N:
            raise ValueError("secret scalar out of range")
        x, y = point_mul(d)
        return cls(d.to_bytes(32, "big"), x.to_bytes(32, "big") + y.to_bytes(32, "big"))

    @classmethod
    def from_entropy(cls, data: bytes) -> EcdsaKeyPair:
        """Map at least 32 uniform bytes onto a scalar in [1, n-1]."""
        if len(data) < 32:
            raise ValueError("need at least 32 bytes of entropy")
        return cls.from_secret(int.from_bytes(data, "big") % (N - 1) + 1)

    @property
    def address(self) -> bytes:
        return derive_address(self.public)

    def __repr__(self) -> str:
        return f"EcdsaKeyPair(address=0x{self.address.hex()})"


@dataclass(frozen=True)
class EcdsaSignature:
    r: int
    s: int
    recovery_id: int

    def __post_init__(self):
        if not (0 < self.r < N and 0 < self.s < N):
            raise ValueError("r and s must lie in [1, n-1]")
        if self.recovery_id not in (0, 1):
            raise ValueError("recovery id must be 0 or 1")

    def to_bytes(self) -> bytes:
        return self.r.to_bytes(32, "big") + self.s.to_bytes(32, "big") + bytes([self.recovery_id])

    @classmethod
    def from_bytes(cls, data: bytes) -> EcdsaSignature:
        if len(data) != 65:
            raise ValueError("ECDSA signature must be 65 bytes")
        return cls(int.from_bytes(data[:32], "big"), int.from_bytes(data[32:64], "big"), data[64])


def _rfc6979_nonce(d: int, digest: bytes):
    x = d.to_bytes(32, "big")
    h1 = (int.from_bytes(digest, "big") % N).to_bytes(32, "big")
    v, k = b"\x01" * 32, b"\x00" * 32
    k = hmac.new(k, v + b"\x00" + x + h1, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    k = hmac.new(k, v + b"\x01" + x + h1, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    while True:
        v = hmac.new(k, v, hashlib.sha256).digest()
        cand = int.from_bytes(v, "big")
        if 0 < cand < N:
            yield cand
        k = hmac.new(k, v + b"\x00", hashlib.sha256).digest()
        v = hmac.new(k, v, hashlib.sha256).digest()


def ecdsa_sign(digest: bytes, key: EcdsaKeyPair) -> EcdsaSignature:
    if len(digest) != 32:
        raise ValueError("digest must be 32 bytes")
    d = int.from_bytes(key.secret, "big")
    z = int.from_bytes(digest, "big")
    for k in _rfc6979_nonce(d, digest):
        rx, ry = point_mul(k)
        r = rx % N
        if r == 0:
            continue
        s = pow(k, -1, N) * (z + r * d) % N
        if s == 0:
            continue
        rec = ry & 1
        if rx >= N:
            # x overflowed the group order; not representable with ids 0/1
            continue
        if s > N // 2:
            s, rec = N - s, rec ^ 1
        return EcdsaSignature(r, s, rec)
    raise AssertionError("unreachable")


def ecdsa_recover(digest: bytes, sig: EcdsaSignature) -> bytes:
    """Public key (64 bytes) whose signature over ``digest`` is ``sig``."""
    return _recover(bytes(digest), sig)


# every node recovers the same sender from the same transaction
@lru_cache(maxsize=4096)
def _recover(digest: bytes, sig: EcdsaSignature) -> bytes:
    if len(digest) != 32:
        raise RecoveryError("digest must be 32 bytes")
    r, s = sig.r, sig.s
    if not (0 < r < N and 0 < s < N) or sig.recovery_id not in (0, 1):
        raise RecoveryError("signature out of range")
    x = r
    alpha = (x * x * x + 7) % P
    y = pow(alpha, (P + 1) // 4, P)
    if y * y % P != alpha:
        raise RecoveryError("r is not the x-coordinate of a curve point")
    if y & 1 != sig.recovery_id:
        y = P - y
    z = int.from_bytes(digest, "big")
    rinv = pow(r, -1, N)
    R = (x, y, 1)
    q = _add(_mul(s * rinv % N, R), _mul_g((-z * rinv) % N))
    pt = _affine(q)
    if pt is None:
        raise RecoveryError("recovered point at infinity")
    return pt[0].to_bytes(32, "big") + pt[1].to_bytes(32, "big")


def ecdsa_verify(digest: bytes, sig: EcdsaSignature, public: bytes) -> bool:
    if len(public) != 64 or len(digest) != 32 or not (0 < sig.r < N and 0 < sig.s < N):
        return False
    qx, qy = int.from_bytes(public[:32], "big"), int.from_bytes(public[32:], "big")
    if not _on_curve(qx, qy):
        return False
    w = pow(sig.s, -1, N)
    z = int.from_bytes(digest, "big")
    pt = _affine(_add(_mul_g(z * w % N), _mul(sig.r * w % N, (qx, qy, 1))))
    return pt is not None and pt[0] % N == sig.r


@lru_cache(maxsize=1024)
def _openssl_key(public: bytes):
    return ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256K1(), b"\x04" + public)


def ecdsa_verify_fast(digest: bytes, sig: EcdsaSignature, public: bytes) -> bool:
    """Same predicate as :func:`ecdsa_verify`, delegated to OpenSSL."""
    if len(public) != 64 or len(digest) != 32 or not (0 < sig.r < N and 0 < sig.s < N):
        return False
    try:
        pk = _openssl_key(bytes(public))
        pk.verify(utils.encode_dss_signature(sig.r, sig.s), digest, ec.ECDSA(utils.Prehashed(hashes.SHA256())))
    except (InvalidSignature, ValueError):
        return False
    return True


def derive_address(public: bytes) -> bytes:
    if len(public) != 64:
        raise ValueError("expected a 64-byte uncompressed public key without prefix")
    return keccak256(public)[12:]
