"""Smooth bump, smoothed indicator steps, and the log-scale partition atoms.

Everything here derives from a single primitive: the cumulative integral
W(t) = integral of the bump omega up to t, where omega(x) =
C*exp(-1/(1-4x^2)) on (-1/2, 1/2), normalized to unit mass.  Then

    chi_inf * omega (x) = W(x)           (smoothed step up at 0)
    chi_0   * omega (x) = W(x+1) - W(x)  (smoothed indicator of [-1, 0))
    xi_0(x)   = (chi_0*omega)(log2(2|x|))
    xi_inf(x) = W(log2(2|x|))

and the one-dimensional partition  sum_{l>=0} xi_0(2^(l+1) x) + xi_inf(2x)
telescopes to W(log2(2|x|) + L_max) - 0 + ... = 1 exactly, with at most
three nonzero terms at any x != 0.

W is tabulated once on a dense grid by composite Gauss-Legendre panels
and interpolated with a cubic spline (interpolation error well under the
1e-10 budget); a slow quadrature path is kept for verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

_GRID_N = 8192  # intervals in the W table over [-1/2, 1/2]

# Supports on the log2 scale: (chi_0*omega) lives on (-3/2, 1/2) and W
# rises on (-1/2, 1/2).  Back on the x axis that puts xi_0 inside
# [2^-2.5, 2^-0.5] and the rise of xi_inf inside [2^-1.5, 2^-0.5].
XI0_SUPPORT = (2.0 ** -2.5, 2.0 ** -0.5)
XI_INF_RISE = (2.0 ** -1.5, 2.0 ** -0.5)


def _gauss_legendre_panels(breaks: np.ndarray, order: int = 16):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    a = breaks[:-1]
    b = breaks[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    y = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return y, w


def _bump_unnormalized(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    inside = np.abs(x) < 0.5
    t = x[inside]
    out[inside] = np.exp(-1.0 / (1.0 - 4.0 * t * t))
    return out


class _SmoothedStep:
    """Singleton holding the normalization constant and the W spline."""

    def __init__(self) -> None:
        grid = np.linspace(-0.5, 0.5, _GRID_N + 1)
        y, w = _gauss_legendre_panels(grid)
        vals = _bump_unnormalized(y) * w
        per_panel = vals.reshape(_GRID_N, -1).sum(axis=1)
        total = math.fsum(per_panel)
        self.normalization = 1.0 / total
        cumulative = np.concatenate(([0.0], np.cumsum(per_panel))) / total
        cumulative[-1] = 1.0
        self._spline = CubicSpline(grid, cumulative, bc_type="clamped")

    def W(self, t):
        t = np.asarray(t, dtype=np.float64)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.where(t >= 0.5, 1.0, 0.0)
        inside = (t > -0.5) & (t < 0.5)
        if np.any(inside):
            out = np.where(inside, self._spline(np.clip(t, -0.5, 0.5)), out)
        return float(out[0]) if scalar else out


_step: _SmoothedStep | None = None


def _get_step() -> _SmoothedStep:
    global _step
    if _step is None:
        _step = _SmoothedStep()
    return _step


@dataclass(frozen=True)
class BumpFunction:
    """The concrete unit-mass bump on [-1/2, 1/2]."""

    support: tuple[float, float] = (-0.5, 0.5)
    normalization: float = field(default=0.0)

    def __post_init__(self):
        if self.normalization == 0.0:
            object.__setattr__(self, "normalization", _get_step().normalization)

    def __call__(self, x):
        return self.normalization * _bump_unnormalized(x)


def omega(x):
    """The bump C*exp(-1/(1-4x^2)) on |x| < 1/2, zero outside; unit mass."""
    return _get_step().normalization * _bump_unnormalized(x)


def chi_inf_conv_omega(x):
    """Smoothed step: 0 for x <= -1/2, 1 for x >= 1/2, smooth in between."""
    return _get_step().W(x)


def chi0_conv_omega(x):
    """Smoothed indicator of [-1, 0): supported on [-3/2, 1/2]."""
    step = _get_step()
    x = np.asarray(x, dtype=np.float64)
    return step.W(x + 1.0) - step.W(x)


def chi_inf_conv_omega_exact(x: float) -> float:
    """Slow quadrature path for chi_inf * omega, used for validation."""
    if x <= -0.5:
        return 0.0
    if x >= 0.5:
        return 1.0
    c = _get_step().normalization
    val, _ = quad(lambda t: c * math.exp(-1.0 / (1.0 - 4.0 * t * t)),
                  -0.5, x, epsabs=1e-14, epsrel=1e-13)
    return val


def chi0_conv_omega_exact(x: float) -> float:
    """Slow quadrature path for chi_0 * omega."""
    return chi_inf_conv_omega_exact(x + 1.0) - chi_inf_conv_omega_exact(x)


def _log_scale(x):
    """log2(2|x|) with the x=0 fiber mapped far below every support."""
    x = np.asarray(x, dtype=np.float64)
    safe = np.where(x == 0.0, 1.0, np.abs(x))
    t = np.log2(2.0 * safe)
    return np.where(x == 0.0, -np.inf, t)


def xi0(x):
    """Inner log-scale atom: even, supported in [2^-2.5, 2^-0.5] on |x|."""
    return chi0_conv_omega(_log_scale(x))


def xi_inf(x):
    """Outer log-scale atom: even, 0 for |x| <= 2^-1.5, 1 for |x| >= 2^-0.5."""
    return _get_step().W(_log_scale(x))


def xi0_exact(x: float) -> float:
    if x == 0.0:
        return 0.0
    return chi0_conv_omega_exact(math.log2(2.0 * abs(x)))


def xi_inf_exact(x: float) -> float:
    if x == 0.0:
        return 0.0
    return chi_inf_conv_omega_exact(math.log2(2.0 * abs(x)))


@dataclass(frozen=True)
class PartitionAtom:
    """One of the two log-scale atoms with its support description."""

    kind: str  # "xi0" | "xi_inf"
    evaluate: Callable = field(repr=False, default=None)
    support: tuple = ()

    @staticmethod
    def xi0_atom() -> "PartitionAtom":
        return PartitionAtom(kind="xi0", evaluate=xi0,
                             support=((-1.0, -(2.0 ** -3)), (2.0 ** -3, 1.0)))

    @staticmethod
    def xi_inf_atom() -> "PartitionAtom":
        return PartitionAtom(kind="xi_inf", evaluate=xi_inf,
                             support=((-math.inf, -(2.0 ** -2)), (2.0 ** -2, math.inf)))


def active_scales_1d(x: float) -> list[int]:
    """The l >= 0 with xi0(2^(l+1) x) possibly nonzero (at most two)."""
    if x == 0.0:
        return []
    t = math.log2(2.0 * abs(x))
    # need t + l + 1 in (-3/2, 1/2), i.e. l in (-t - 5/2, -t - 1/2)
    lo = max(0, math.ceil(-t - 2.5))
    hi = math.floor(-t - 0.5 + 1e-12)
    return list(range(lo, hi + 1))


def partition_terms_1d(x: float) -> list[tuple[object, float]]:
    """Nonzero terms of the 1-D partition at x: [(l, xi0(2^(l+1)x)), ..., ('inf', xi_inf(2x))]."""
    terms: list[tuple[object, float]] = []
    for l in active_scales_1d(x):
        v = float(xi0(2.0 ** (l + 1) * x))
        if v != 0.0:
            terms.append((l, v))
    v = float(xi_inf(2.0 * x))
    if v != 0.0:
        terms.append(("inf", v))
    return terms


def partition_sum_1d(x: float) -> tuple[float, int]:
    """(sum of active terms, number of nonzero terms) at x != 0."""
    terms = partition_terms_1d(x)
    return math.fsum(v for _, v in terms), len(terms)


def xi_J(index, X) -> float:
    """Anisotropic product atom: prod_{j in J} xi0(2^(l_j+1) x_j) * prod_{j not in J} xi_inf(2 x_j).

    `index` is a dyadic.DyadicIndex (or anything with .J and .L); X has
    d-1 coordinates.
    """
    X = np.asarray(X, dtype=np.float64)
    J = set(index.J)
    out = 1.0
    for j in range(len(X)):
        if j in J:
            out *= float(xi0(2.0 ** (index.L[j] + 1) * X[j]))
        else:
            out *= float(xi_inf(2.0 * X[j]))
        if out == 0.0:
            return 0.0
    return out


def partition_terms_multi(X) -> list[tuple[tuple[int, ...], tuple[int, ...], float]]:
    """Nonzero terms (J, L, value) of the multidimensional partition at X.

    Every combination of one active 1-D term per coordinate contributes;
    choosing the xi0 branch at scale l_j puts j into J (l_j = 0 allowed),
    choosing xi_inf leaves j outside J with l_j = 0.
    """
    per_coord = []
    for xj in np.asarray(X, dtype=np.float64):
        terms = partition_terms_1d(float(xj))
        if not terms:
            return []
        per_coord.append(terms)
    out: list[tuple[tuple[int, ...], tuple[int, ...], float]] = []
    n = len(per_coord)

    def rec(j: int, J: list[int], L: list[int], val: float) -> None:
        if j == n:
            out.append((tuple(J), tuple(L), val))
            return
        for tag, v in per_coord[j]:
            if tag == "inf":
                rec(j + 1, J, L + [0], val * v)
            else:
                rec(j + 1, J + [j], L + [int(tag)], val * v)

    rec(0, [], [], 1.0)
    return out


def partition_sum_multi(X) -> tuple[float, int]:
    """(sum over all (J, L) atoms, nonzero term count) at X with no zero coordinate."""
    terms = partition_terms_multi(X)
    return math.fsum(v for _, _, v in terms), len(terms)
