"""Spherical Bessel functions j_l and associated Legendre functions P_l^n.

Both are vectorized over their real argument and restricted to l <= 8.

Legendre convention: no Condon-Shortley phase, so every P_l^n with
n >= 0 is non-negative near u = 1::

    P_1^1(u) = sqrt(1 - u^2)
    P_2^1(u) = 3 u sqrt(1 - u^2)

and negative orders are defined by
P_l^{-n} = (l - n)! / (l + n)! * P_l^n.
"""
from __future__ import annotations

import math

import numpy as np

L_MAX = 8

# terms kept in the power series; enough for |x| < L_MAX + 4
_SERIES_TERMS = 40


def _check_order(l: int) -> None:
    if int(l) != l or not 0 <= l <= L_MAX:
        raise ValueError(f"order l must be an integer in [0, {L_MAX}], got {l!r}")


def _series(l: int, x: np.ndarray) -> np.ndarray:
    # j_l(x) = x^l / (2l+1)!! * sum_k (-x^2/2)^k / (k! (2l+3)(2l+5)...(2l+2k+1))
    q = -0.5 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (2 * l + 2 * k + 1))
        total = total + term
    return x**l / math.prod(range(1, 2 * l + 2, 2)) * total


def _upward(l: int, x: np.ndarray) -> np.ndarray:
    s, c = np.sin(x), np.cos(x)
    j_prev = s / x
    if l == 0:
        return j_prev
    j = s / (x * x) - c / x
    for m in range(1, l):
        j_prev, j = j, (2 * m + 1) / x * j - j_prev
    return j


def spherical_bessel(l: int, x):
    """Spherical Bessel function of the first kind, j_l(x).

    Uses the power series for |x| < l + 2 and upward recurrence from the
    closed forms of j_0, j_1 elsewhere.
    """
    _check_order(l)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("argument must be finite")
    # j_l(-x) = (-1)^l j_l(x)
    ax = np.abs(x)
    small = ax < l + 2
    out = np.empty_like(ax)
    if small.any():
        out[small] = _series(l, ax[small])
    if (~small).any():
        out[~small] = _upward(l, ax[~small])
    if l % 2:
        out = np.where(x < 0, -out, out)
    return out[()] if out.ndim == 0 else out


def assoc_legendre(l: int, n: int, u):
    """Associated Legendre function P_l^n(u) without the Condon-Shortley phase."""
    _check_order(l)
    if int(n) != n or abs(n) > l:
        raise ValueError(f"need |n| <= l, got l={l}, n={n}")
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1) or not np.all(np.isfinite(u)):
        raise ValueError("argument must lie in [-1, 1]")
    m = abs(n)
    # P_m^m = (2m-1)!! (1-u^2)^{m/2}
    p_mm = math.prod(range(1, 2 * m, 2)) * (1.0 - u * u) ** (0.5 * m)
    if l == m:
        p = p_mm
    else:
        p_prev, p = p_mm, (2 * m + 1) * u * p_mm
        for k in range(m + 1, l):
            p_prev, p = p, ((2 * k + 1) * u * p - (k + m) * p_prev) / (k - m + 1)
    if n < 0:
        p = p * math.factorial(l - m) / math.factorial(l + m)
    p = np.asarray(p, dtype=float)
    return p[()] if p.ndim == 0 else p
