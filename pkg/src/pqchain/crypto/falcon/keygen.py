"""Falcon key generation: Gaussian (f, g) and the NTRU equation solver.

Randomness comes exclusively from the caller-supplied entropy buffer, which
is expanded with SHAKE256; equal entropy gives equal keys.
"""

from __future__ import annotations

import math

import numpy as np

from ..hashing import ShakeStream
from . import fft as F_
from .ntt import inverse_mod_q, mul_mod_q
from .params import N, Q

SIGMA_FG = 1.17 * math.sqrt(Q / (2 * N))
_NORM_BOUND = 1.17 ** 2 * Q  # 16822.41...
_TAIL = 30


def _cdt(sigma: float) -> list[int]:
    """Cumulative table for |z| <= _TAIL scaled to 2^63."""
    w = [math.exp(-(z * z) / (2 * sigma * sigma)) for z in range(-_TAIL, _TAIL + 1)]
    total = sum(w)
    acc, out = 0.0, []
    for x in w:
        acc += x
        out.append(min(int(acc / total * 2.0 ** 63), 1 << 63))
    out[-1] = 1 << 63
    return out


_CDT_FG = _cdt(SIGMA_FG)


def _sample_poly(rng: ShakeStream) -> list[int]:
    raw = rng.squeeze(8 * N)
    out = []
    for i in range(N):
        u = int.from_bytes(raw[8 * i:8 * i + 8], "little") >> 1
        k = 0
        while u >= _CDT_FG[k]:
            k += 1
        out.append(k - _TAIL)
    return out


def _bits(a: list[int]) -> int:
    return max((abs(x).bit_length() for x in a), default=0)


def kmul(a: list[int], b: list[int]) -> list[int]:
    """Exact negacyclic product of integer polynomials (Kronecker substitution)."""
    n = len(a)
    if n == 1:
        return [a[0] * b[0]]
    width = _bits(a) + _bits(b) + n.bit_length() + 2
    A = sum(x << (width * i) for i, x in enumerate(a))
    B = sum(x << (width * i) for i, x in enumerate(b))
    P = A * B
    half = 1 << (width - 1)
    mask = (1 << width) - 1
    full = []
    for _ in range(2 * n - 1):
        d = P & mask
        if d >= half:
            d -= 1 << width
        full.append(d)
        P = (P - d) >> width
    return [full[i] - (full[i + n] if i + n < 2 * n - 1 else 0) for i in range(n)]


def _field_norm(f: list[int]) -> list[int]:
    """N(f) = f0^2 - x f1^2 in Z[x]/(x^(n/2) + 1)."""
    f0, f1 = f[0::2], f[1::2]
    a = kmul(f0, f0)
    b = kmul(f1, f1)
    # multiply b by x: negacyclic shift
    xb = [-b[-1]] + b[:-1]
    return [x - y for x, y in zip(a, xb)]


def _galois_conj(f: list[int]) -> list[int]:
    return [x if i % 2 == 0 else -x for i, x in enumerate(f)]


def _lift(f: list[int]) -> list[int]:
    out = [0] * (2 * len(f))
    out[0::2] = f
    return out


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        k, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - k * x1
        y0, y1 = y1, y0 - k * y1
    return a, x0, y0


def _reduce(f, g, F, G):
    """Babai size reduction of (F, G) against (f, g)."""
    size = max(53, _bits(f), _bits(g))
    fa = F_.fft([x >> (size - 53) for x in f])
    ga = F_.fft([x >> (size - 53) for x in g])
    den = fa * np.conj(fa) + ga * np.conj(ga)
    while True:
        Size = max(53, _bits(F), _bits(G))
        if Size < size:
            break
        Fa = F_.fft([x >> (Size - 53) for x in F])
        Ga = F_.fft([x >> (Size - 53) for x in G])
        k = F_.ifft((Fa * np.conj(fa) + Ga * np.conj(ga)) / den)
        k = [int(round(x)) for x in k]
        if not any(k):
            break
        fk, gk = kmul(f, k), kmul(g, k)
        sh = Size - size
        F = [x - (y << sh) for x, y in zip(F, fk)]
        G = [x - (y << sh) for x, y in zip(G, gk)]
    return F, G


class NtruSolveError(ArithmeticError):
    pass


def ntru_solve(f: list[int], g: list[int]) -> tuple[list[int], list[int]]:
    """(F, G) with f G - g F = q, size-reduced."""
    if len(f) == 1:
        d, u, v = _xgcd(f[0], g[0])
        if d != 1:
            raise NtruSolveError("resultants are not coprime")
        return [-Q * v], [Q * u]
    Fp, Gp = ntru_solve(_field_norm(f), _field_norm(g))
    F = kmul(_lift(Fp), _galois_conj(g))
    G = kmul(_lift(Gp), _galois_conj(f))
    return _reduce(f, g, F, G)


def _gs_norm_ok(f, g) -> bool:
    if sum(x * x for x in f) + sum(x * x for x in g) >= _NORM_BOUND:
        return False
    fa, ga = F_.fft(f), F_.fft(g)
    ffgg = fa * np.conj(fa) + ga * np.conj(ga)
    ft = F_.ifft(Q * np.conj(fa) / ffgg)
    gt = F_.ifft(Q * np.conj(ga) / ffgg)
    return float(ft @ ft + gt @ gt) <= _NORM_BOUND


def public_from_fg(f, g) -> list[int] | None:
    finv = inverse_mod_q(f)
    if finv is None:
        return None
    return [int(x) for x in mul_mod_q(g, finv)]


def recover_G(f, g, F) -> list[int]:
    """G = g F / f mod q, centered; exact when |G| < q/2."""
    finv = inverse_mod_q(f)
    if finv is None:
        raise ValueError("f is not invertible mod q")
    G = mul_mod_q(mul_mod_q(g, F), finv)
    return [int(x) - Q if x > Q // 2 else int(x) for x in G]


def keygen(entropy: bytes, max_tries: int = 1000):
    """Returns (f, g, F, G, h)."""
    rng = ShakeStream(b"falcon-512 keygen" + bytes(entropy))
    for _ in range(max_tries):
        f = _sample_poly(rng)
        g = _sample_poly(rng)
        if max(map(abs, f + g)) > 31:
            continue
        if not _gs_norm_ok(f, g):
            continue
        h = public_from_fg(f, g)
        if h is None:
            continue
        try:
            F, G = ntru_solve(f, g)
        except NtruSolveError:
            continue
        if max(map(abs, F + G)) > 127:
            continue
        return f, g, F, G, h
    raise RuntimeError("key generation did not converge")
