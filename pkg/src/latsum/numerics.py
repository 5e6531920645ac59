"""Compensated floating-point kernels used across the package.

The quantities x_j = k + m*theta_j that appear in every lattice sum here
cancel almost completely (x_j can be ~2^-30 while m*theta_j is ~2^25), so
plain double arithmetic loses most significant digits exactly where the
small denominators live.  This module provides error-free transformations
(two_sum / two_prod) and a double-double representation of each theta
component so that residuals k + m*theta are computed with absolute error
around 1e-22 for |m| up to 2^52.  Everything is vectorized over numpy
arrays and branch-free, which also keeps results bit-reproducible.
"""

from __future__ import annotations

import math
import os

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1, Dekker splitting constant


def two_sum(a, b):
    """Error-free sum: returns (s, e) with s = fl(a+b) and s + e = a + b exactly."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def two_prod(a, b):
    """Error-free product: returns (p, e) with p = fl(a*b) and p + e = a*b exactly."""
    p = a * b
    a_c = _SPLITTER * a
    a_hi = a_c - (a_c - a)
    a_lo = a - a_hi
    b_c = _SPLITTER * b
    b_hi = b_c - (b_c - b)
    b_lo = b - b_hi
    e = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, e


class DoubleDouble:
    """A real number held as an unevaluated sum hi + lo of two doubles.

    Built from a high-precision decimal string; hi is the correctly
    rounded double, lo the correctly rounded residue, so the pair carries
    ~106 bits of the original value.
    """

    __slots__ = ("hi", "lo")

    def __init__(self, hi: float, lo: float = 0.0):
        self.hi = float(hi)
        self.lo = float(lo)

    @classmethod
    def from_decimal(cls, text: str) -> "DoubleDouble":
        from fractions import Fraction

        exact = Fraction(text)
        hi = float(exact)
        lo = float(exact - Fraction(hi))
        return cls(hi, lo)

    def __float__(self) -> float:
        return self.hi + self.lo

    def __repr__(self) -> str:
        return f"DoubleDouble({self.hi!r}, {self.lo!r})"


def residual_to_nearest(theta: DoubleDouble, m):
    """Signed residual r = theta*m - round(theta*m), compensated.

    `m` may be a scalar or integer-valued float64 array with |m| <= 2^52.
    Returns (r, n) with n the nearest-integer array.  Absolute error is
    ~|r|*2^-52 + |theta*m|*2^-104, i.e. the residual keeps close to full
    double relative accuracy even when it is ~1e-9.
    """
    m = np.asarray(m, dtype=np.float64)
    p, e = two_prod(theta.hi, m)
    n = np.round(p)
    r0 = p - n  # exact: |p - n| <= 1/2 and both are representable
    t, te = two_sum(r0, e)
    r = t + (te + theta.lo * m)
    # a carry can push |r| just past 1/2; fold it back once
    adjust = np.round(r)
    return r - adjust, n + adjust


def dist_to_integers(theta: DoubleDouble, m):
    """<theta*m>: distance from theta*m to the nearest integer, vectorized."""
    r, _ = residual_to_nearest(theta, m)
    return np.abs(r)


def residual_given_integer(theta: DoubleDouble, m, k):
    """Compensated k + m*theta for explicit integer offsets k (arrays ok)."""
    m = np.asarray(m, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    p, e = two_prod(theta.hi, m)
    t, te = two_sum(k, p)
    return t + (te + (e + theta.lo * m))


def fsum_complex(values) -> complex:
    """Exactly rounded sum of a sequence of complex numbers.

    Used as the cross-chunk reduction: chunk-internal sums are plain
    numpy pairwise sums in a fixed order, and the chunk partials are
    combined here with math.fsum so the result is independent of chunk
    count and bit-reproducible.
    """
    arr = np.asarray(values, dtype=np.complex128).ravel()
    return complex(math.fsum(arr.real), math.fsum(arr.imag))


def kahan_sum(values) -> float:
    """Kahan-compensated sum over a 1-D array, fixed left-to-right order."""
    total = 0.0
    comp = 0.0
    for term in np.asarray(values, dtype=np.float64).ravel():
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def worker_count() -> int:
    """Worker pool size: LATSUM_THREADS if set and positive, else 1."""
    raw = os.environ.get("LATSUM_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
