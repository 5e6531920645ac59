"""Lattices, point enumeration, successive minima, elementary sums.

Basis vectors are matrix *columns* throughout.  All enumeration funnels
through one path: LLL-reduce the basis (tracking the integer unimodular
transform exactly), bound the integer coordinates of the target box
through the inverse of the reduced basis, and filter a vectorized
candidate grid.  Lattices that come from a theta vector carry an exact
recomputation callback, so points are produced by compensated residual
arithmetic rather than by the accumulated float basis; this is what keeps
coordinates of equalized lattices (diagonal scales up to 2^25) accurate
to ~1e-15 absolute.

The sup-norm cube convention is closed: K_t = {x : |x|_inf <= t}, and the
membership test allows a 1e-12 relative slack so exactly-on-boundary
points of clean integer examples are kept.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, PrecisionError, ResourceError
from .diophantine import ThetaVector
from .numerics import two_prod, two_sum, residual_given_integer

_DEFAULT_POINT_CAP = 10**8
_LLL_DELTA = 0.99
_LLL_MAX_SWEEPS = 20000


# ---------------------------------------------------------------------------
# reduction
# ---------------------------------------------------------------------------

def lll_reduce(basis: np.ndarray, delta: float = _LLL_DELTA):
    """LLL reduction of a column basis.

    Returns (reduced, transform) with reduced = basis @ transform and
    transform integer unimodular (int64).  Gram-Schmidt data is recomputed
    from scratch on every sweep; at d <= 5 this costs nothing and avoids
    the usual incremental-update instabilities.
    """
    B = np.array(basis, dtype=np.float64)
    d = B.shape[1]
    U = np.eye(d, dtype=np.int64)

    def gram_schmidt():
        Bs = np.zeros_like(B)
        mu = np.zeros((d, d))
        for i in range(d):
            v = B[:, i].copy()
            for j in range(i):
                denom = Bs[:, j] @ Bs[:, j]
                mu[i, j] = (Bs[:, j] @ B[:, i]) / denom
                v -= mu[i, j] * Bs[:, j]
            Bs[:, i] = v
        return Bs, mu

    k = 1
    for _ in range(_LLL_MAX_SWEEPS):
        if k >= d:
            break
        Bs, mu = gram_schmidt()
        changed = False
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q != 0:
                B[:, k] -= q * B[:, j]
                U[:, k] -= q * U[:, j]
                changed = True
        if changed:
            Bs, mu = gram_schmidt()
        lhs = Bs[:, k] @ Bs[:, k]
        rhs = (delta - mu[k, k - 1] ** 2) * (Bs[:, k - 1] @ Bs[:, k - 1])
        if lhs >= rhs:
            k += 1
        else:
            B[:, [k - 1, k]] = B[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            k = max(k - 1, 1)
    else:
        raise PrecisionError("LLL did not converge; basis too ill-conditioned")
    if np.abs(U).max() > 2**62:
        raise PrecisionError("LLL transform coefficients overflow int64")
    return B, U


# ---------------------------------------------------------------------------
# lattice types
# ---------------------------------------------------------------------------

class GenericLattice:
    """Full-rank lattice given by a column basis, with optional exact points.

    `exact_point(C)` maps an (n, d) int array of coordinates in the
    *original* generators to the (n, d) float array of lattice points,
    using compensated arithmetic.  When absent, points are basis @ c.
    """

    def __init__(self, basis, exact_point: Callable | None = None):
        self.basis = np.array(basis, dtype=np.float64)
        if self.basis.ndim != 2 or self.basis.shape[0] != self.basis.shape[1]:
            raise DomainError("basis must be a square matrix")
        self._exact_point = exact_point
        self._reduced: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.basis))

    def dual(self) -> "GenericLattice":
        return GenericLattice(np.linalg.inv(self.basis).T)

    def points(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords)
        if self._exact_point is not None:
            return self._exact_point(coords)
        return coords.astype(np.float64) @ self.basis.T

    def reduced(self):
        if self._reduced is None:
            R, U = lll_reduce(self.basis)
            if self._exact_point is not None:
                R = self.points(U.T)  # recompute columns exactly: column i has coords U[:, i]
                R = R.T
            self._reduced = (R, U)
        return self._reduced

    def to_json(self) -> str:
        return json.dumps({"kind": "generic", "basis": self.basis.tolist()})


class ThetaLattice:
    """The lattice attached to a theta vector, primal or dual, optionally scaled.

    Primal points are (K + m*theta, m) for K in Z^{d-1}, m in Z; dual
    points are (N, n_d - theta.N).  `scale` multiplies coordinates by a
    positive diagonal (used for equalized lattices); both roles stay
    unimodular when prod(scale) == 1.
    """

    def __init__(self, theta: ThetaVector, role: str = "primal", scale=None):
        if role not in ("primal", "dual"):
            raise DomainError(f"role must be 'primal' or 'dual', got {role!r}")
        self.theta = theta
        self.role = role
        d = theta.d
        self.scale = np.ones(d) if scale is None else np.asarray(scale, dtype=np.float64)
        if self.scale.shape != (d,) or np.any(self.scale <= 0):
            raise DomainError("scale must be a positive d-vector")

    @property
    def d(self) -> int:
        return self.theta.d

    def basis(self) -> np.ndarray:
        d = self.d
        th = np.array(self.theta.components)
        B = np.eye(d)
        if self.role == "primal":
            B[:d - 1, d - 1] = th
        else:
            B[d - 1, :d - 1] = -th
        return self.scale[:, None] * B

    def exact_point(self, coords: np.ndarray) -> np.ndarray:
        C = np.asarray(coords, dtype=np.float64)
        single = C.ndim == 1
        C = np.atleast_2d(C)
        d = self.d
        out = np.empty_like(C, dtype=np.float64)
        if self.role == "primal":
            m = C[:, d - 1]
            for j in range(d - 1):
                out[:, j] = self.scale[j] * residual_given_integer(
                    self.theta.dd[j], m, C[:, j])
            out[:, d - 1] = self.scale[d - 1] * m
        else:
            for j in range(d - 1):
                out[:, j] = self.scale[j] * C[:, j]
            # x_d = n_d - theta . N, accumulated with error compensation
            t = C[:, d - 1].copy()
            err = np.zeros_like(t)
            for j in range(d - 1):
                dd = self.theta.dd[j]
                p, e = two_prod(dd.hi, C[:, j])
                t, te = two_sum(t, -p)
                err += te - e - dd.lo * C[:, j]
            out[:, d - 1] = self.scale[d - 1] * (t + err)
        return out[0] if single else out

    def as_generic(self) -> GenericLattice:
        return GenericLattice(self.basis(), exact_point=self.exact_point)

    def dual(self) -> "ThetaLattice":
        other = "dual" if self.role == "primal" else "primal"
        return ThetaLattice(self.theta, other, scale=1.0 / self.scale)

    def to_json(self) -> str:
        return json.dumps({
            "kind": "theta",
            "role": self.role,
            "theta": list(self.theta.decimal_strings),
            "scale": self.scale.tolist(),
        })


def lattice_from_json(text: str):
    data = json.loads(text)
    if data["kind"] == "generic":
        return GenericLattice(np.array(data["basis"], dtype=np.float64))
    if data["kind"] == "theta":
        theta = ThetaVector(data["theta"])
        return ThetaLattice(theta, data.get("role", "primal"),
                            scale=data.get("scale"))
    raise DomainError(f"unknown lattice kind {data['kind']!r}")


def _as_generic(lattice) -> GenericLattice:
    if isinstance(lattice, ThetaLattice):
        return lattice.as_generic()
    if isinstance(lattice, GenericLattice):
        return lattice
    raise DomainError(f"not a lattice: {lattice!r}")


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def enumerate_with_coords(lattice, radius: float, center=None,
                          cap: int = _DEFAULT_POINT_CAP):
    """All lattice points x with |x - center|_inf <= radius.

    Returns (points, coords): float (n, d) points and the matching int64
    coordinates in the original generators, sorted lexicographically by
    those integer coordinates.  Raises ResourceError when the candidate
    box would exceed `cap`.
    """
    if radius < 0:
        raise DomainError(f"radius must be >= 0, got {radius}")
    lat = _as_generic(lattice)
    d = lat.d
    u = np.zeros(d) if center is None else np.asarray(center, dtype=np.float64)
    R, U = lat.reduced()
    Rinv = np.linalg.inv(R)
    c_center = Rinv @ u
    spread = np.abs(Rinv) @ np.full(d, radius) + 1e-9
    los = np.ceil(c_center - spread - 1e-9).astype(np.int64)
    his = np.floor(c_center + spread + 1e-9).astype(np.int64)
    counts = his - los + 1
    estimate = int(np.prod(counts.astype(np.float64)))
    if estimate > cap:
        raise ResourceError(
            f"candidate box of ~{estimate:g} points exceeds the cap of {cap:g}",
            cap=cap, estimate=estimate)
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in zip(los, his)]
    mesh = np.meshgrid(*axes, indexing="ij")
    C = np.stack([g.ravel() for g in mesh], axis=1)
    C_orig = C @ U.T  # original-generator coordinates
    X = lat.points(C_orig)
    tol = radius + 1e-12 * max(1.0, radius)
    mask = np.max(np.abs(X - u), axis=1) <= tol
    X, C_orig = X[mask], C_orig[mask]
    order = np.lexsort(C_orig[:, ::-1].T)
    return X[order], C_orig[order]


def enumerate_points(lattice, radius: float, center=None,
                     cap: int = _DEFAULT_POINT_CAP) -> np.ndarray:
    """Points of the lattice in the closed sup-norm ball; deterministic order."""
    return enumerate_with_coords(lattice, radius, center, cap)[0]


def count_points(lattice, t: float, u=None, cap: int = _DEFAULT_POINT_CAP) -> int:
    """N(t, lattice, u): number of lattice points in the shifted cube K_t + u."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    return len(enumerate_points(lattice, t, u, cap))


# ---------------------------------------------------------------------------
# successive minima
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuccessiveMinima:
    """Exact sup-norm successive minima with witness vectors (columns)."""

    values: tuple[float, ...]
    witnesses: np.ndarray

    def product(self) -> float:
        return float(np.prod(self.values))


def successive_minima(lattice, cap: int = _DEFAULT_POINT_CAP) -> SuccessiveMinima:
    """Minima by growing-radius enumeration; d <= 5.

    Vectors are scanned in increasing sup-norm and kept when linearly
    independent of those already kept; the kept norms are the successive
    minima.  The search radius doubles until d independent vectors fit.
    """
    lat = _as_generic(lattice)
    d = lat.d
    if d > 5:
        raise ResourceError(f"successive minima capped at d <= 5, got d = {d}", cap=5)
    R, _ = lat.reduced()
    t = float(np.max(np.abs(R)))  # ball containing all reduced basis vectors
    for _ in range(60):
        X, C = enumerate_with_coords(lat, t, cap=cap)
        nonzero = ~np.all(C == 0, axis=1)
        X = X[nonzero]
        if len(X) >= d:
            norms = np.max(np.abs(X), axis=1)
            order = np.argsort(norms, kind="stable")
            chosen: list[np.ndarray] = []
            values: list[float] = []
            basis_so_far = np.zeros((d, 0))
            for idx in order:
                v = X[idx]
                if len(chosen) == 0:
                    independent = norms[idx] > 0
                else:
                    resid = v - basis_so_far @ np.linalg.lstsq(
                        basis_so_far, v, rcond=None)[0]
                    independent = np.linalg.norm(resid) > 1e-9 * max(
                        1.0, np.linalg.norm(v))
                if independent:
                    chosen.append(v)
                    values.append(float(norms[idx]))
                    basis_so_far = np.stack(chosen, axis=1)
                    if len(chosen) == d:
                        return SuccessiveMinima(tuple(values), basis_so_far)
        t *= 2.0
    raise PrecisionError("successive minima search did not terminate")


def first_minimum(lattice, cap: int = _DEFAULT_POINT_CAP) -> float:
    """lambda_1: shortest nonzero sup-norm, by growing-radius enumeration."""
    lat = _as_generic(lattice)
    R, _ = lat.reduced()
    t = float(np.min(np.max(np.abs(R), axis=0)))  # shortest reduced column norm
    for _ in range(60):
        X, C = enumerate_with_coords(lat, t, cap=cap)
        nonzero = ~np.all(C == 0, axis=1)
        if np.any(nonzero):
            return float(np.min(np.max(np.abs(X[nonzero]), axis=1)))
        t *= 2.0
    raise PrecisionError("first minimum search did not terminate")


@dataclass(frozen=True)
class MahlerReport:
    """The d products lambda_j(L) * lambda_{d-j+1}(L dual) and their sandwich."""

    products: tuple[float, ...]
    lower: float
    upper: float
    ok: bool
    primal: SuccessiveMinima
    dual: SuccessiveMinima


def mahler_check(lattice, cap: int = _DEFAULT_POINT_CAP) -> MahlerReport:
    """Products of dual successive minima against the d^-1 .. (d!)^2 sandwich."""
    lat = _as_generic(lattice)
    d = lat.d
    primal = successive_minima(lat, cap=cap)
    dual = successive_minima(lat.dual(), cap=cap)
    products = tuple(
        primal.values[j] * dual.values[d - 1 - j] for j in range(d))
    lower = 1.0 / d
    upper = float(math.factorial(d)) ** 2
    ok = all(lower - 1e-9 <= p <= upper + 1e-9 for p in products)
    return MahlerReport(products, lower, upper, ok, primal, dual)


# ---------------------------------------------------------------------------
# elementary sums
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ElementarySumResult:
    value: float
    radius: float
    tail_bound: float
    n_points: int


def elementary_sum(lattice, A: float, nu: float, u=None,
                   eps_trunc: float = 1e-10,
                   cap: int = _DEFAULT_POINT_CAP) -> ElementarySumResult:
    """sum over lattice points of (1 + nu*|x-u|_inf)^(-A), truncated with a bound.

    The tail beyond radius R is bounded through the packing estimate
    N(t) <= ((2t + lambda_1)/lambda_1)^d (disjoint lambda_1/2 cubes), so
    tail <= int_R^inf A*nu*(1+nu*t)^(-A-1) * N(t) dt, evaluated by
    quadrature.  R grows until the bound drops below eps_trunc.
    """
    lat = _as_generic(lattice)
    d = lat.d
    if A <= d:
        raise DomainError(
            f"divergent elementary sum: need A > d, got A = {A}, d = {d}")
    if nu <= 0:
        raise DomainError(f"nu must be positive, got {nu}")
    lam1 = first_minimum(lat, cap=cap)

    def tail_bound(R: float) -> float:
        # substitute s = 1/(1 + nu*t): finite interval, integrand
        # A * s^(A-1) * pack(t(s)) with a mild s^(A-1-d) endpoint
        def integrand(s):
            t = (1.0 / s - 1.0) / nu
            return A * s ** (A - 1.0) * ((2.0 * t + lam1) / lam1) ** d
        s_R = 1.0 / (1.0 + nu * R)
        val, _ = quad(integrand, 0.0, s_R, epsabs=1e-300, epsrel=1e-10, limit=200)
        return val

    R = max(lam1, (2.0 / eps_trunc) ** (1.0 / (A - d)) / nu)
    for _ in range(200):
        bound = tail_bound(R)
        if bound < eps_trunc:
            break
        R *= 1.5
    else:
        raise ResourceError("could not certify the elementary-sum tail", cap=cap)
    X = enumerate_points(lat, R, u, cap=cap)
    dist = np.max(np.abs(X - (0 if u is None else np.asarray(u))), axis=1)
    terms = np.sort((1.0 + nu * dist) ** (-A))[::-1]
    value = math.fsum(terms)
    return ElementarySumResult(value=value, radius=R, tail_bound=bound,
                               n_points=len(X))


# ---------------------------------------------------------------------------
# random test lattices
# ---------------------------------------------------------------------------

def random_unimodular(rng: np.random.Generator, d: int,
                      skew: float = 1.0) -> GenericLattice:
    """Random determinant-one lattice: normalized Gaussian basis, optional skew."""
    while True:
        A = rng.normal(size=(d, d))
        det = np.linalg.det(A)
        if abs(det) > 1e-3:
            break
    B = A / abs(det) ** (1.0 / d)
    if np.linalg.det(B) < 0:
        B[:, 0] = -B[:, 0]
    if skew != 1.0:
        exponents = rng.uniform(-skew, skew, size=d)
        exponents -= exponents.mean()
        B = np.diag(2.0 ** exponents) @ B
    return GenericLattice(B)
