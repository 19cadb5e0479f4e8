"""Complex FFT representation of real polynomials modulo x^n + 1.

A real polynomial of degree < n (n >= 2) is stored as its values at the n/2
roots w_j = exp(i*pi*(2j+1)/n), j < n/2, i.e. the roots in the upper
half-plane; the remaining values are their conjugates. A polynomial with
n = 1 is a real scalar, stored as a length-1 array.

Because the length of the array is ambiguous between n = 1 and n = 2,
split/merge take the polynomial size ``n`` explicitly.
"""

from __future__ import annotations

from functools import cache

import numpy as np


@cache
def _twist(n: int) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(n) / n)


@cache
def _roots(n: int) -> np.ndarray:
    return np.exp(1j * np.pi * (2 * np.arange(n // 4) + 1) / n)


def fft(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    n = len(a)
    full = np.fft.ifft(a * _twist(n)) * n
    return full[: n // 2]


def ifft(fa: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft`; returns the real coefficient vector."""
    n = 2 * len(fa)
    full = np.concatenate([fa, np.conj(fa[::-1])])
    return (np.fft.fft(full) * np.conj(_twist(n)) / n).real


def split(fa: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """FFT values of f0, f1 with f(x) = f0(x^2) + x f1(x^2); f has size n."""
    if n == 2:
        c = fa[0]
        return np.array([c.real]), np.array([c.imag])
    q = n // 4
    a = fa[:q]
    b = np.conj(fa[::-1][:q])
    return (a + b) * 0.5, (a - b) * 0.5 / _roots(n)


def merge(f0: np.ndarray, f1: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`split`; the result has polynomial size n."""
    if n == 2:
        return np.array([complex(f0[0].real, f1[0].real)])
    q = n // 4
    y = _roots(n) * f1
    out = np.empty(2 * q, dtype=np.complex128)
    out[:q] = f0 + y
    out[q:] = np.conj((f0 - y)[::-1])
    return out


def adj(fa: np.ndarray) -> np.ndarray:
    """FFT of the Hermitian adjoint f(1/x)."""
    return np.conj(fa)
