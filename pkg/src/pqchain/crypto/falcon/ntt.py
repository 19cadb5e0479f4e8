"""Arithmetic in Z_q[x]/(x^n + 1).

Two independent routes are kept on purpose: a numpy convolution used by the
fast verifier, and an explicit negacyclic NTT that reports every butterfly,
multiply and memory access to an optional counter (used for gas metering).
"""

from __future__ import annotations

import numpy as np

from .params import N, Q

_GENERATOR = 11


def _bitrev(x: int, bits: int) -> int:
    return int(format(x, f"0{bits}b")[::-1], 2)


def _tables(n: int):
    bits = n.bit_length() - 1
    psi = pow(_GENERATOR, (Q - 1) // (2 * n), Q)
    zetas = [pow(psi, _bitrev(i, bits), Q) for i in range(n)]
    izetas = [pow(z, Q - 2, Q) for z in zetas]
    return zetas, izetas, pow(n, Q - 2, Q)


_ZETAS, _IZETAS, _NINV = _tables(N)


def _tick(meter, kind: str, k: int = 1) -> None:
    if meter is not None:
        meter[kind] += k


def ntt(a: list[int], meter=None) -> list[int]:
    """Forward negacyclic NTT (Cooley-Tukey, bit-reversed twiddles)."""
    a = [x % Q for x in a]
    n = len(a)
    t, m = n, 1
    while m < n:
        t //= 2
        for i in range(m):
            s = _ZETAS[m + i]
            j1 = 2 * i * t
            for j in range(j1, j1 + t):
                u = a[j]
                v = a[j + t] * s % Q
                a[j] = (u + v) % Q
                a[j + t] = (u - v) % Q
            if meter is not None:
                meter["butterfly"] += t
                meter["field_mul"] += t
                # two reads, two writes, one twiddle load per butterfly
                meter["memory_word"] += 5 * t
        m *= 2
    return a


def intt(a: list[int], meter=None) -> list[int]:
    """Inverse of :func:`ntt` (Gentleman-Sande), including the 1/n scaling."""
    a = [x % Q for x in a]
    n = len(a)
    t, m = 1, n
    while m > 1:
        h = m // 2
        j1 = 0
        for i in range(h):
            s = _IZETAS[h + i]
            for j in range(j1, j1 + t):
                u = a[j]
                v = a[j + t]
                a[j] = (u + v) % Q
                a[j + t] = (u - v) * s % Q
            j1 += 2 * t
            if meter is not None:
                meter["butterfly"] += t
                meter["field_mul"] += t
                meter["memory_word"] += 5 * t
        t *= 2
        m = h
    out = [x * _NINV % Q for x in a]
    _tick(meter, "field_mul", n)
    _tick(meter, "memory_word", 2 * n)
    return out


def pointwise(a: list[int], b: list[int], meter=None) -> list[int]:
    _tick(meter, "field_mul", len(a))
    _tick(meter, "memory_word", 3 * len(a))
    return [x * y % Q for x, y in zip(a, b)]


def mul_ntt(a: list[int], b: list[int], meter=None) -> list[int]:
    return intt(pointwise(ntt(a, meter), ntt(b, meter), meter), meter)


def mul_mod_q(a, b) -> np.ndarray:
    """Negacyclic product mod q via a plain integer convolution."""
    a = np.asarray(a, dtype=np.int64) % Q
    b = np.asarray(b, dtype=np.int64) % Q
    n = len(a)
    full = np.convolve(a, b)
    res = full[:n].copy()
    res[: n - 1] -= full[n:]
    return res % Q


def inverse_mod_q(f) -> list[int] | None:
    """Inverse of f in Z_q[x]/(x^n+1), or None when f is not invertible."""
    fh = ntt(list(f))
    if any(v == 0 for v in fh):
        return None
    return intt([pow(v, Q - 2, Q) for v in fh])
