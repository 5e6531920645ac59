"""Distance to integers, multiplicative approximation quality, certificates.

The central scalar is <x>, the distance from x to the nearest integer.
For a tuple theta = (theta_1, ..., theta_{d-1}) the quality of the integer
m is  m^(1+kappa) * prod_j <theta_j m>;  a positive lower bound over all m
is what "kappa-multiplicatively approximable" means.  No finite scan can
prove such a bound, so this module produces finite-range certificates:
the exact minimum of the quality over 1 <= m <= M together with its argmin.

Theta tuples are built from >=30-digit decimal strings and carried as
double-double pairs, so <theta*m> keeps full relative accuracy out to the
default search caps (see numerics.py).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import mpmath
import numpy as np

from .errors import DomainError, PrecisionError
from .numerics import DoubleDouble, dist_to_integers

_PRESET_DIGITS = 40
_SCAN_CHUNK = 1 << 20

# Partial quotients beyond this mean "rational at working precision".
_MAX_PARTIAL_QUOTIENT = 10**12

# Small-denominator rationality guard used by the constructors.
_RATIONAL_GUARD_DENOM = 64
_RATIONAL_GUARD_TOL = 1e-9


def _preset_values(name: str) -> list[mpmath.mpf]:
    with mpmath.workdps(_PRESET_DIGITS + 10):
        sqrt2 = mpmath.sqrt(2)
        sqrt3 = mpmath.sqrt(3)
        sqrt5 = mpmath.sqrt(5)
        golden = (1 + sqrt5) / 2
        cbrt2 = mpmath.cbrt(2)
        cbrt4 = mpmath.cbrt(4)
        # Liouville-flavoured series, truncated at k=6: effectively very
        # well approximable at every scale reachable by a desk scan.
        liou = mpmath.mpf(0)
        for k in range(1, 7):
            liou += mpmath.mpf(2) ** (-math.factorial(k))
        table = {
            "golden": [golden],
            "sqrt2": [sqrt2],
            "sqrt3": [sqrt3],
            "cbrt2": [cbrt2],
            "liouville6": [liou],
            "sqrt2_sqrt3": [sqrt2, sqrt3],
            "cbrt2_cbrt4": [cbrt2, cbrt4],
            "sqrt2_sqrt3_sqrt5": [sqrt2, sqrt3, sqrt5],
        }
        if name not in table:
            raise DomainError(
                f"unknown theta preset {name!r}; available: {', '.join(sorted(table))}"
            )
        return table[name]


def preset_names() -> list[str]:
    return sorted(
        ["golden", "sqrt2", "sqrt3", "cbrt2", "liouville6",
         "sqrt2_sqrt3", "cbrt2_cbrt4", "sqrt2_sqrt3_sqrt5"]
    )


class ThetaVector:
    """Tuple of irrational components theta_1..theta_{d-1} plus metadata.

    Components are stored three ways: decimal strings (the source of
    truth), exact Fractions of those strings (for continued fractions and
    exact threshold comparisons), and double-double pairs (for fast
    vectorized residuals).  d is one more than the component count.
    """

    def __init__(self, components: Sequence[str], preset_name: str | None = None):
        if len(components) < 1:
            raise DomainError("need at least one component (d >= 2)")
        self.decimal_strings = tuple(str(c) for c in components)
        for text in self.decimal_strings:
            digits = sum(ch.isdigit() for ch in text)
            if digits < 30:
                raise DomainError(
                    f"component {text!r} has fewer than 30 significant digits; "
                    "pass decimal strings, not floats"
                )
        self.fractions = tuple(Fraction(text) for text in self.decimal_strings)
        self.dd = tuple(DoubleDouble.from_decimal(text) for text in self.decimal_strings)
        self.components = tuple(float(x) for x in self.dd)
        self.preset_name = preset_name
        self.d = len(self.components) + 1
        self._guard_rational()
        self._record_cache: dict[tuple[int, int], tuple[np.ndarray, list[Fraction]]] = {}
        self._certificate_cache: dict[tuple[float, int], ApproximabilityCertificate] = {}

    def _guard_rational(self) -> None:
        for j, frac in enumerate(self.fractions):
            for q in range(1, _RATIONAL_GUARD_DENOM + 1):
                prod = frac * q
                dist = abs(prod - round(prod))
                if dist < _RATIONAL_GUARD_TOL:
                    raise DomainError(
                        f"component {j} is within {_RATIONAL_GUARD_TOL:g} of a rational "
                        f"with denominator {q}; rejected as rational at working precision"
                    )

    @classmethod
    def from_preset(cls, name: str) -> "ThetaVector":
        with mpmath.workdps(_PRESET_DIGITS + 10):
            strings = [mpmath.nstr(v, _PRESET_DIGITS, strip_zeros=False)
                       for v in _preset_values(name)]
        return cls(strings, preset_name=name)

    @classmethod
    def from_json(cls, source) -> "ThetaVector":
        """Load from {"name": str, "components": [decimal strings]}."""
        if isinstance(source, (str, bytes)):
            data = json.loads(source)
        else:
            data = source
        return cls(data["components"], preset_name=data.get("name"))

    def to_json(self) -> str:
        return json.dumps(
            {"name": self.preset_name, "components": list(self.decimal_strings)}
        )

    @property
    def label(self) -> str:
        return self.preset_name or ",".join(f"{c:.6f}" for c in self.components)

    def distances(self, j: int, m) -> np.ndarray:
        """<theta_j * m> vectorized over integer arrays m."""
        return dist_to_integers(self.dd[j], m)

    # -- continued-fraction records ------------------------------------

    def component_records(self, j: int, limit: int) -> tuple[np.ndarray, list[Fraction]]:
        """Best-approximation records of <theta_j * m> for m <= limit.

        Returns (denominators, exact distances), both in increasing-m /
        strictly-decreasing-distance order.  The denominators are exactly
        the m at which min_{m'<=m} <theta_j m'> improves, computed from
        the continued fraction of the exact stored rational.
        """
        key = (j, limit)
        if key in self._record_cache:
            return self._record_cache[key]
        x = self.fractions[j]
        denoms: list[int] = []
        dists: list[Fraction] = []
        best: Fraction | None = None
        for p, q in _convergents(x):
            if q > limit:
                break
            dist = abs(x * q - p)
            if best is None or dist < best:
                denoms.append(q)
                dists.append(dist)
                best = dist
            if dist == 0:
                break
        result = (np.asarray(denoms, dtype=np.int64), dists)
        self._record_cache[key] = result
        return result

    def component_min_quality(self, j: int, limit: int) -> float:
        """min over 1 <= m <= limit of m * <theta_j m> (kappa=0, single coordinate).

        Record positions are the only candidates for new minima of the
        distance, but m*<theta_j m> can dip between records only at the
        records themselves (the distance is constant-best between them
        while m grows), so the minimum over all m is attained at a record.
        """
        denoms, dists = self.component_records(j, limit)
        vals = [int(q) * d for q, d in zip(denoms, dists)]
        return float(min(vals))


def _convergents(x: Fraction) -> Iterator[tuple[int, int]]:
    """Regular continued-fraction convergents p/q of an exact rational."""
    num, den = x.numerator, x.denominator
    p_prev, q_prev = 1, 0
    p, q = math.floor(num / den), 1
    num, den = num - p * den, den
    yield p, q
    while den != 0 and num != 0:
        a, rem = divmod(den, num)
        num, den = rem, num
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        yield p, q


@dataclass(frozen=True)
class ApproximabilityCertificate:
    """Finite-range analogue of the lower constant in the quality bound.

    c_hat = min_{1<=m<=M} m^(1+kappa) prod_j <theta_j m>, attained at
    argmin_m (smallest m on ties).  Only certifies the range it scanned.
    """

    theta: ThetaVector
    kappa: float
    scan_limit: int
    c_hat: float
    argmin_m: int


def distance_to_integers(x: float) -> float:
    """<x>: distance from x to the nearest integer, in [0, 1/2]."""
    if not math.isfinite(x):
        raise DomainError(f"distance_to_integers needs a finite input, got {x!r}")
    return abs(x - round(x))


def mult_quality(theta: ThetaVector, m: int, kappa: float = 0.0) -> float:
    """m^(1+kappa) * prod_j <theta_j m> for a single positive integer m."""
    if m < 1:
        raise DomainError(f"m must be a positive integer, got {m}")
    if kappa < 0:
        raise DomainError(f"kappa must be >= 0, got {kappa}")
    prod = 1.0
    for j in range(theta.d - 1):
        prod *= float(theta.distances(j, m))
    return float(m) ** (1.0 + kappa) * prod


def certify_kappa(theta: ThetaVector, kappa: float, M: int) -> ApproximabilityCertificate:
    """Scan m = 1..M for the minimum quality; exact argmin, smallest-m ties.

    The scan is chunked; each chunk is reduced independently and the
    chunk winners are reduced in index order, so the result does not
    depend on chunk size and is reproducible.
    """
    if M < 1:
        raise DomainError(f"scan limit M must be >= 1, got {M}")
    if kappa < 0:
        raise DomainError(f"kappa must be >= 0, got {kappa}")
    key = (float(kappa), int(M))
    cached = theta._certificate_cache.get(key)
    if cached is not None:
        return cached
    best_val = math.inf
    best_m = 0
    start = 1
    while start <= M:
        stop = min(start + _SCAN_CHUNK, M + 1)
        m = np.arange(start, stop, dtype=np.float64)
        qual = m ** (1.0 + kappa)
        for j in range(theta.d - 1):
            qual *= theta.distances(j, m)
        idx = int(np.argmin(qual))
        if qual[idx] < best_val:
            best_val = float(qual[idx])
            best_m = start + idx
        start = stop
    cert = ApproximabilityCertificate(
        theta=theta, kappa=float(kappa), scan_limit=int(M),
        c_hat=best_val, argmin_m=best_m,
    )
    theta._certificate_cache[key] = cert
    return cert


def continued_fraction_convergents(x, count: int) -> list[tuple[int, int]]:
    """First `count` convergents (p, q) of the regular continued fraction of x.

    Accepts a float, a decimal string, or a Fraction; strings keep full
    precision and are preferred.  Raises PrecisionError if the expansion
    terminates or produces an absurd partial quotient before `count`
    convergents are found, which means x is rational to working precision.
    """
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    if isinstance(x, Fraction):
        frac = x
    elif isinstance(x, str):
        frac = Fraction(x)
    else:
        if not math.isfinite(float(x)):
            raise DomainError(f"x must be finite, got {x!r}")
        frac = Fraction(float(x))
    out: list[tuple[int, int]] = []
    prev_q = 0
    for p, q in _convergents(frac):
        if prev_q and q // prev_q > _MAX_PARTIAL_QUOTIENT:
            raise PrecisionError(
                f"partial quotient beyond {_MAX_PARTIAL_QUOTIENT:g} after {len(out)} "
                "convergents; input is rational at working precision"
            )
        out.append((p, q))
        prev_q = q
        if len(out) == count:
            return out
    raise PrecisionError(
        f"continued fraction terminated after {len(out)} convergents; "
        "input is rational at working precision"
    )
