"""ML-KEM-768 (FIPS 203) with caller-supplied randomness.

Deterministic entry points (keygen from a 64-byte seed, encapsulation from a
32-byte message) are what the simulator needs for replayable runs; the
byte formats are the standard ones, so keys interoperate with other
ML-KEM-768 implementations.
"""

from __future__ import annotations

import hashlib

Q = 3329
K = 3
ETA1 = 2
ETA2 = 2
DU = 10
DV = 4

EK_LEN = 384 * K + 32  # 1184
DK_LEN = 768 * K + 96  # 2400
CT_LEN = 32 * (DU * K + DV)  # 1088


def _bitrev7(x: int) -> int:
    return int(format(x, "07b")[::-1], 2)


_ZETAS = [pow(17, _bitrev7(i), Q) for i in range(128)]
_GAMMAS = [pow(17, 2 * _bitrev7(i) + 1, Q) for i in range(128)]


def _G(data: bytes) -> tuple[bytes, bytes]:
    d = hashlib.sha3_512(data).digest()
    return d[:32], d[32:]


def _H(data: bytes) -> bytes:
    return hashlib.sha3_256(data).digest()


def _J(data: bytes) -> bytes:
    return hashlib.shake_256(data).digest(32)


def _prf(eta: int, s: bytes, b: int) -> bytes:
    return hashlib.shake_256(s + bytes([b])).digest(64 * eta)


def ntt(f: list[int]) -> list[int]:
    f = list(f)
    i, length = 1, 128
    while length >= 2:
        for start in range(0, 256, 2 * length):
            z = _ZETAS[i]
            i += 1
            for j in range(start, start + length):
                t = z * f[j + length] % Q
                f[j + length] = (f[j] - t) % Q
                f[j] = (f[j] + t) % Q
        length //= 2
    return f


def intt(f: list[int]) -> list[int]:
    f = list(f)
    i, length = 127, 2
    while length <= 128:
        for start in range(0, 256, 2 * length):
            z = _ZETAS[i]
            i -= 1
            for j in range(start, start + length):
                t = f[j]
                f[j] = (t + f[j + length]) % Q
                f[j + length] = z * (f[j + length] - t) % Q
        length *= 2
    return [x * 3303 % Q for x in f]


def _mul(a: list[int], b: list[int]) -> list[int]:
    out = [0] * 256
    for i in range(128):
        a0, a1 = a[2 * i], a[2 * i + 1]
        b0, b1 = b[2 * i], b[2 * i + 1]
        out[2 * i] = (a0 * b0 + a1 * b1 * _GAMMAS[i]) % Q
        out[2 * i + 1] = (a0 * b1 + a1 * b0) % Q
    return out


def _add(a, b):
    return [(x + y) % Q for x, y in zip(a, b)]


def _sample_ntt(seed: bytes) -> list[int]:
    # 840 bytes of SHAKE128 exhaust the rejection loop with overwhelming
    # probability; extend if not.
    want = 840
    while True:
        buf = hashlib.shake_128(seed).digest(want)
        out = []
        for i in range(0, want - 2, 3):
            d1 = buf[i] | ((buf[i + 1] & 15) << 8)
            d2 = (buf[i + 1] >> 4) | (buf[i + 2] << 4)
            for d in (d1, d2):
                if d < Q and len(out) < 256:
                    out.append(d)
            if len(out) == 256:
                return out
        want *= 2


def _cbd(eta: int, data: bytes) -> list[int]:
    bits = int.from_bytes(data, "little")
    out = []
    for i in range(256):
        x = sum((bits >> (2 * i * eta + j)) & 1 for j in range(eta))
        y = sum((bits >> (2 * i * eta + eta + j)) & 1 for j in range(eta))
        out.append((x - y) % Q)
    return out


def byte_encode(f: list[int], d: int) -> bytes:
    acc = 0
    for i, x in enumerate(f):
        acc |= x << (d * i)
    return acc.to_bytes(32 * d, "little")


def byte_decode(data: bytes, d: int) -> list[int]:
    acc = int.from_bytes(data, "little")
    mask = (1 << d) - 1
    out = [(acc >> (d * i)) & mask for i in range(256)]
    if d == 12:
        out = [x % Q for x in out]
    return out


def _compress(x: int, d: int) -> int:
    return (((x << d) + Q // 2) // Q) & ((1 << d) - 1)


def _decompress(y: int, d: int) -> int:
    return (y * Q + (1 << (d - 1))) >> d


def _matrix(rho: bytes) -> list[list[list[int]]]:
    return [[_sample_ntt(rho + bytes([j, i])) for j in range(K)] for i in range(K)]


def _pke_keygen(d: bytes) -> tuple[bytes, bytes]:
    rho, sigma = _G(d + bytes([K]))
    A = _matrix(rho)
    s = [ntt(_cbd(ETA1, _prf(ETA1, sigma, i))) for i in range(K)]
    e = [ntt(_cbd(ETA1, _prf(ETA1, sigma, K + i))) for i in range(K)]
    t = []
    for i in range(K):
        acc = e[i]
        for j in range(K):
            acc = _add(acc, _mul(A[i][j], s[j]))
        t.append(acc)
    ek = b"".join(byte_encode(x, 12) for x in t) + rho
    dk = b"".join(byte_encode(x, 12) for x in s)
    return ek, dk


def _pke_encrypt(ek: bytes, m: bytes, r: bytes) -> bytes:
    t = [byte_decode(ek[384 * i:384 * (i + 1)], 12) for i in range(K)]
    A = _matrix(ek[384 * K:])
    n = 0
    y = []
    for _ in range(K):
        y.append(ntt(_cbd(ETA1, _prf(ETA1, r, n))))
        n += 1
    e1 = []
    for _ in range(K):
        e1.append(_cbd(ETA2, _prf(ETA2, r, n)))
        n += 1
    e2 = _cbd(ETA2, _prf(ETA2, r, n))
    u = []
    for i in range(K):
        acc = [0] * 256
        for j in range(K):
            acc = _add(acc, _mul(A[j][i], y[j]))
        u.append(_add(intt(acc), e1[i]))
    mu = [_decompress(b, 1) for b in byte_decode(m, 1)]
    acc = [0] * 256
    for j in range(K):
        acc = _add(acc, _mul(t[j], y[j]))
    v = _add(_add(intt(acc), e2), mu)
    c1 = b"".join(byte_encode([_compress(x, DU) for x in ui], DU) for ui in u)
    c2 = byte_encode([_compress(x, DV) for x in v], DV)
    return c1 + c2


def _pke_decrypt(dk: bytes, c: bytes) -> bytes:
    step = 32 * DU
    u = [[_decompress(x, DU) for x in byte_decode(c[step * i:step * (i + 1)], DU)] for i in range(K)]
    v = [_decompress(x, DV) for x in byte_decode(c[step * K:], DV)]
    s = [byte_decode(dk[384 * i:384 * (i + 1)], 12) for i in range(K)]
    acc = [0] * 256
    for j in range(K):
        acc = _add(acc, _mul(s[j], ntt(u[j])))
    w = [(a - b) % Q for a, b in zip(v, intt(acc))]
    return byte_encode([_compress(x, 1) for x in w], 1)


def keygen(seed: bytes) -> tuple[bytes, bytes]:
    """(encapsulation key, decapsulation key) from a 64-byte seed d || z."""
    if len(seed) != 64:
        raise ValueError("ML-KEM key generation takes a 64-byte seed")
    d, z = seed[:32], seed[32:]
    ek, dk_pke = _pke_keygen(d)
    return ek, dk_pke + ek + _H(ek) + z


def _check_ek(ek: bytes) -> None:
    if len(ek) != EK_LEN:
        raise ValueError(f"encapsulation key must be {EK_LEN} bytes")
    for i in range(K):
        chunk = ek[384 * i:384 * (i + 1)]
        if byte_encode(byte_decode(chunk, 12), 12) != chunk:
            raise ValueError("encapsulation key is not canonical")


def encaps(ek: bytes, m: bytes) -> tuple[bytes, bytes]:
    """(shared secret, ciphertext) for the 32-byte randomness ``m``."""
    _check_ek(ek)
    if len(m) != 32:
        raise ValueError("encapsulation randomness must be 32 bytes")
    key, r = _G(m + _H(ek))
    return key, _pke_encrypt(ek, m, r)


def decaps(dk: bytes, c: bytes) -> bytes:
    """Shared secret; a tampered ciphertext yields an unrelated pseudorandom key."""
    if len(dk) != DK_LEN or len(c) != CT_LEN:
        raise ValueError("wrong ML-KEM-768 key or ciphertext length")
    dk_pke = dk[:384 * K]
    ek = dk[384 * K:768 * K + 32]
    h = dk[768 * K + 32:768 * K + 64]
    z = dk[768 * K + 64:]
    m = _pke_decrypt(dk_pke, c)
    key, r = _G(m + h)
    reject = _J(z + c)
    return key if _pke_encrypt(ek, m, r) == c else reject
