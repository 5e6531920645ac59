"""Dyadic minima, cylinder indices, hyperbolic norm and equalizer frames.

mu(L) is the least positive integer m whose theta-multiples sit inside
the dyadic cylinder: <theta_j m> <= 2^(-l_j-1) for every coordinate j
(closed inequalities; boundary ties admitted).  For d = 2 the search
walks best-approximation records obtained from the exact continued
fraction of the stored component, so the answer is exact for the stored
value; for d >= 3 it is a vectorized scan with early rejection, capped
and honest about the cap.

An index pair (J, L) names one atom of the anisotropic partition of
unity: l_j == 0 for every j outside J, and l_j >= 0 for j in J.  Note
l_j = 0 *is* allowed inside J: the pair (J, L) with some l_j = 0, j in J,
is a different atom from (J minus {j}, L) - the former uses the inner
atom at unit scale in coordinate j, the latter the outer one.  Dropping
those pairs would leave holes in the partition (the completeness test in
the test suite fails visibly if one tries).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .diophantine import ThetaVector, ApproximabilityCertificate
from .errors import BoundedSearchError, DomainError
from .lattice import ThetaLattice, first_minimum

DEFAULT_SEARCH_CAP = 10**7
_SCAN_CHUNK = 1 << 20


@dataclass(frozen=True)
class DyadicIndex:
    """A partition atom label: subset J of {0..d-2} plus exponents L.

    Invariants: l_j = 0 for j not in J; l_j >= 0 for j in J.
    """

    J: tuple[int, ...]
    L: tuple[int, ...]

    def __post_init__(self):
        J = tuple(sorted(set(self.J)))
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "L", tuple(int(l) for l in self.L))
        if any(j < 0 or j >= len(self.L) for j in J):
            raise DomainError(f"J = {J} out of range for {len(self.L)} coordinates")
        for j, l in enumerate(self.L):
            if l < 0:
                raise DomainError(f"exponents must be >= 0, got l_{j} = {l}")
            if l > 0 and j not in J:
                raise DomainError(f"l_{j} = {l} > 0 but {j} not in J")

    @property
    def weight(self) -> int:
        return sum(self.L)


def dyadic_indices(d: int, l1_cap: int):
    """All index pairs (J, L) with |L|_1 <= l1_cap for dimension d.

    Deterministic order: by weight, then by J, then by L lexicographically.
    """
    n = d - 1
    out: list[DyadicIndex] = []
    for size in range(n + 1):
        for J in combinations(range(n), size):
            for L in _exponents_on(J, n, l1_cap):
                out.append(DyadicIndex(J=J, L=L))
    out.sort(key=lambda ix: (ix.weight, ix.J, ix.L))
    return out


def _exponents_on(J, n, cap):
    if not J:
        yield (0,) * n
        return

    def rec(pos: int, remaining: int, acc: list[int]):
        if pos == len(J):
            L = [0] * n
            for j, l in zip(J, acc):
                L[j] = l
            yield tuple(L)
            return
        for l in range(remaining + 1):
            yield from rec(pos + 1, remaining - l, acc + [l])

    yield from rec(0, cap, [])


# ---------------------------------------------------------------------------
# minima
# ---------------------------------------------------------------------------

def _thresholds(L) -> list[Fraction]:
    return [Fraction(1, 2 ** (int(l) + 1)) for l in L]


def _minimum_via_records(theta: ThetaVector, j: int, threshold: Fraction,
                         search_cap: int) -> int | None:
    """Least m <= cap with <theta_j m> <= threshold, from CF records (exact)."""
    denoms, dists = theta.component_records(j, search_cap)
    for q, dist in zip(denoms, dists):
        if dist <= threshold:
            return int(q)
    return None


def _minimum_via_scan(theta: ThetaVector, constrained: list[int],
                      thresholds: list[float], search_cap: int) -> int | None:
    """Least m <= cap with <theta_j m> <= thr_j for all constrained j."""
    order = np.argsort(thresholds)  # most restrictive coordinate first
    start = 1
    while start <= search_cap:
        stop = min(start + _SCAN_CHUNK, search_cap + 1)
        m = np.arange(start, stop, dtype=np.float64)
        mask = np.ones(len(m), dtype=bool)
        for pos in order:
            j = constrained[pos]
            mask &= theta.distances(j, m) <= thresholds[pos]
            if not mask.any():
                break
        if mask.any():
            return start + int(np.argmax(mask))
        start = stop
    return None


def dyadic_minimum(theta: ThetaVector, L, search_cap: int = DEFAULT_SEARCH_CAP) -> int:
    """mu(L): least m >= 1 with <theta_j m> <= 2^(-l_j-1) for every j."""
    index = DyadicIndex(J=tuple(range(theta.d - 1)), L=tuple(L))
    return dyadic_minimum_J(theta, index, search_cap=search_cap, _all_coords=True)


def dyadic_minimum_J(theta: ThetaVector, index: DyadicIndex,
                     search_cap: int = DEFAULT_SEARCH_CAP,
                     _all_coords: bool = False) -> int:
    """mu_J(L): like mu(L) but only coordinates in J are constrained."""
    if search_cap < 1:
        raise DomainError(f"search_cap must be >= 1, got {search_cap}")
    if len(index.L) != theta.d - 1:
        raise DomainError(
            f"index has {len(index.L)} coordinates, theta has {theta.d - 1}")
    constrained = list(range(theta.d - 1)) if _all_coords else list(index.J)
    if not constrained:
        return 1
    thresholds = _thresholds([index.L[j] for j in constrained])
    if len(constrained) == 1:
        found = _minimum_via_records(theta, constrained[0], thresholds[0], search_cap)
    else:
        found = _minimum_via_scan(theta, constrained,
                                  [float(t) for t in thresholds], search_cap)
    if found is None:
        raise BoundedSearchError(
            f"no m <= {search_cap} satisfies the cylinder constraints for "
            f"L = {tuple(index.L)} (J = {index.J}); raise the cap",
            cap=search_cap)
    return found


# ---------------------------------------------------------------------------
# equalizer frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EqualizedFrame:
    """mu(L), the vector m(L), its hyperbolic norm and equalizer exponents.

    m(L) = (2^(-l_1-1), ..., 2^(-l_{d-1}-1), mu(L)); nu is the geometric
    mean (m_1...m_d)^(1/d); alpha solves nu * 2^(-alpha_j) = m_j with
    sum(alpha) = 0, so diag(2^alpha) maps m(L) to nu*(1,..,1).
    """

    theta: ThetaVector
    L: tuple[int, ...]
    mu: int
    m_vec: np.ndarray
    nu: float
    alpha: np.ndarray

    @property
    def weight(self) -> int:
        return sum(self.L)

    def nu_pow_d_exact(self) -> Fraction:
        """nu^d as the exact rational mu * 2^(1 - d - |L|_1)."""
        return Fraction(self.mu, 2 ** (self.theta.d - 1 + self.weight))

    def equalizer_diag(self) -> np.ndarray:
        """Diagonal entries 2^alpha of the equalizer."""
        return 2.0 ** self.alpha

    def residuals(self) -> dict:
        """Defining identities, evaluated: D m(L) - nu*1 and sum(alpha)."""
        eq = self.equalizer_diag() * self.m_vec - self.nu
        return {
            "equalize": float(np.max(np.abs(eq))),
            "alpha_sum": float(abs(self.alpha.sum())),
            "nu_power": abs(self.nu ** self.theta.d - float(self.nu_pow_d_exact())),
        }


def equalized_frame(theta: ThetaVector, L,
                    search_cap: int = DEFAULT_SEARCH_CAP) -> EqualizedFrame:
    """Build the frame for L; raises BoundedSearchError if mu is out of reach."""
    L = tuple(int(l) for l in L)
    mu = dyadic_minimum(theta, L, search_cap=search_cap)
    d = theta.d
    m_vec = np.array([2.0 ** (-(l + 1)) for l in L] + [float(mu)])
    log2_nu = (math.log2(mu) - (d - 1) - sum(L)) / d
    nu = 2.0 ** log2_nu
    alpha = np.array([log2_nu + l + 1 for l in L] + [log2_nu - math.log2(mu)])
    return EqualizedFrame(theta=theta, L=L, mu=mu, m_vec=m_vec, nu=nu, alpha=alpha)


def equalized_primal(frame: EqualizedFrame) -> ThetaLattice:
    """D_{m(L)} Lambda_theta: the primal lattice scaled by the equalizer."""
    return ThetaLattice(frame.theta, "primal", scale=frame.equalizer_diag())


def equalized_dual(frame: EqualizedFrame) -> ThetaLattice:
    """D_{m(L)}^{-1} Lambda_theta^perp, the summation lattice of one dyadic term."""
    return ThetaLattice(frame.theta, "dual", scale=1.0 / frame.equalizer_diag())


def lambda1_equalized_scan(frame: EqualizedFrame) -> float:
    """lambda_1(D Lambda_theta) by direct layer scan up to m = mu(L).

    Independent of the generic enumeration path: for each 0 < m <= mu the
    shortest vector in layer m has coordinates 2^alpha_j <theta_j m> and
    2^alpha_d m; layers beyond mu and the m = 0 layer are already longer
    than nu.
    """
    theta = frame.theta
    d = theta.d
    diag = frame.equalizer_diag()
    m = np.arange(1, frame.mu + 1, dtype=np.float64)
    norms = diag[d - 1] * m
    for j in range(d - 1):
        norms = np.maximum(norms, diag[j] * theta.distances(j, m))
    layer0 = float(diag[:d - 1].min())  # shortest vector with m = 0
    return min(float(norms.min()), layer0)


@dataclass(frozen=True)
class Prop31Report:
    """Both growth inequalities plus the shortest-vector equality check."""

    L: tuple[int, ...]
    kappa: float
    mu: int
    mu_lower: float        # c1 * 2^(|L|_1 / (kappa+1))
    mu_ok: bool
    nu_pow_d: float
    nu_lower: float        # c2 * 2^(-kappa |L|_1 / (kappa+1))
    nu_ok: bool
    lambda1: float
    equality_residual: float
    equality_ok: bool


def check_prop31(theta: ThetaVector, kappa: float, c_kappa: float, L,
                 search_cap: int = DEFAULT_SEARCH_CAP,
                 equality_tol: float = 1e-9) -> Prop31Report:
    """Check the dyadic-minimum growth bounds and lambda_1 = nu.

    `c_kappa` must be a measured finite-range constant whose scan range
    covers mu(L); with that, mu^(1+kappa) * prod 2^(-l_j-1) >= c_kappa
    follows from the cylinder membership of the minimizer, giving the two
    lower bounds with c1 = (c*2^(d-1))^(1/(1+kappa)) and
    c2 = (c*2^(-(d-1)kappa))^(1/(1+kappa)).
    """
    if c_kappa <= 0:
        raise DomainError(f"c_kappa must be positive, got {c_kappa}")
    frame = equalized_frame(theta, L, search_cap=search_cap)
    d = theta.d
    w = frame.weight
    c1 = (c_kappa * 2.0 ** (d - 1)) ** (1.0 / (1.0 + kappa))
    c2 = (c_kappa * 2.0 ** (-(d - 1) * kappa)) ** (1.0 / (1.0 + kappa))
    mu_lower = c1 * 2.0 ** (w / (1.0 + kappa))
    nu_lower = c2 * 2.0 ** (-kappa * w / (1.0 + kappa))
    nu_pow_d = frame.nu ** d
    lam1 = first_minimum(equalized_primal(frame).as_generic())
    resid = abs(lam1 - frame.nu)
    return Prop31Report(
        L=frame.L, kappa=float(kappa), mu=frame.mu,
        mu_lower=mu_lower, mu_ok=frame.mu >= mu_lower * (1.0 - 1e-12),
        nu_pow_d=nu_pow_d, nu_lower=nu_lower,
        nu_ok=nu_pow_d >= nu_lower * (1.0 - 1e-12),
        lambda1=lam1, equality_residual=resid,
        equality_ok=resid <= equality_tol,
    )


def certificate_covers(cert: ApproximabilityCertificate, mu: int) -> bool:
    """Whether the finite-range certificate's scan reaches the given mu."""
    return cert.scan_limit >= mu
