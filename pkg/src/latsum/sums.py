"""The lattice sums with small denominators, evaluated two independent ways.

Direct route: the sum runs over the theta lattice's nonzero layers,
x = (K + m*theta, m) with m != 0, each term e^(2 i pi u.x) phi(x/T)
divided by the coordinate product x_1...x_d.  For product cutoffs each
layer factorizes into d-1 one-dimensional sums, so the cost is linear in
the truncation radius instead of geometric; truncation radii come with
computable tail bounds built from the actual distances <theta_j m> (no
unproven constants).

Decomposed route: every term of the sum is split across the anisotropic
partition atoms (J, L); Poisson summation turns the (J, L) piece into a
lattice sum of a separable oscillatory integral over the equalized dual
lattice, evaluated by the fourier module.  The two routes share nothing
numerically, which is what makes their agreement a meaningful check.

Supremum scans report a grid-plus-refinement *lower-bound proxy* for
sup_u |S|; proxies at identical resolution are comparable across theta,
which is all the growth experiments need.  Logs are base 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .diophantine import ThetaVector
from .dyadic import (DEFAULT_SEARCH_CAP, DyadicIndex, dyadic_indices,
                     equalized_dual, equalized_frame)
from .errors import BoundedSearchError, DomainError, NearResonanceError
from .fourier import (CutoffFunction, FJSumEvaluator, F_J_lattice_sum,
                      factor_amplitude_bound, require_product_cutoff)
from .lattice import ThetaLattice
from .numerics import fsum_complex, residual_given_integer, worker_count

_RESONANCE_FLOOR = 1e-14


# ---------------------------------------------------------------------------
# result records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TermRecord:
    """One (J, L) piece of the decomposed sum."""

    J: tuple[int, ...]
    L: tuple[int, ...]
    mu: int | None
    nu: float | None
    value: complex
    abs_error: float
    tail_bound: float
    n_points: int
    skipped: bool

    def to_json_dict(self) -> dict:
        return {
            "J": list(self.J), "L": list(self.L), "mu": self.mu,
            "nu": self.nu, "value_re": self.value.real,
            "value_im": self.value.imag, "abs_error": self.abs_error,
            "tail_bound": self.tail_bound, "n_points": self.n_points,
            "skipped": self.skipped,
        }


@dataclass(frozen=True)
class SumEvaluation:
    """A single evaluated sum with its truncation bookkeeping."""

    value: complex
    T: float
    u: tuple[float, ...]
    method: str                      # "direct" | "dyadic" | "direct-m"
    truncation_radius: float
    tail_bound: float
    term_count: int
    abs_error: float = 0.0
    breakdown: tuple[TermRecord, ...] | None = None

    def to_json_dict(self) -> dict:
        out = {
            "method": self.method, "T": self.T, "u": list(self.u),
            "value_re": self.value.real, "value_im": self.value.imag,
            "abs": abs(self.value), "truncation_radius": self.truncation_radius,
            "tail_bound": self.tail_bound, "term_count": self.term_count,
            "abs_error": self.abs_error,
        }
        if self.breakdown is not None:
            out["terms"] = [t.to_json_dict() for t in self.breakdown]
        return out


# ---------------------------------------------------------------------------
# direct evaluation over the theta lattice
# ---------------------------------------------------------------------------

def _gaussian_radius(cutoff: CutoffFunction, T: float, eps: float) -> float:
    sig = max(f.sigma for f in cutoff.factors)
    return T * sig * math.sqrt(2.0 * math.log(1.0 / eps)) + 2.0


def _require_gaussian(cutoff) -> CutoffFunction:
    cutoff = require_product_cutoff(cutoff)
    if not cutoff.is_gaussian():
        raise DomainError(
            "direct sums require Gaussian factors (rapid decay controls the tails)")
    return cutoff


def _tail_series(factor, T: float, x_start: float, den_start: float) -> float:
    """sum_{k>=0} g((x_start + k)/T) / (den_start + k), computed to underflow."""
    hi = int(10.0 * T * factor.sigma + 10)
    k = np.arange(0, max(hi - int(x_start), 0) + 1, dtype=np.float64)
    return float(np.sum(factor((x_start + k) / T) / (den_start + k)))


def _plain_series(factor, T: float, x_start: float) -> float:
    """sum_{k>=0} g((x_start + k)/T), computed to underflow."""
    hi = int(10.0 * T * factor.sigma + 10)
    k = np.arange(0, max(hi - int(x_start), 0) + 1, dtype=np.float64)
    return float(np.sum(factor((x_start + k) / T)))


def _layer_factor_bounds(theta, cutoff, T, m_arr):
    """Upper bounds for the 1-D layer sums sum_k |g(x/T)/x|, per coordinate.

    For layer m the x values sit at distances delta, 1-delta, 1+delta,
    2-delta, ... from 0 with delta = <theta_j m>: the two innermost give
    1/delta + 2, the pair at n -+ delta gives at most
    2 g((n-1/2)/T)/(n-1/2).
    """
    d = theta.d
    bounds = np.ones((d - 1, len(m_arr)))
    for j in range(d - 1):
        base = 2.0 * _tail_series(cutoff.factors[j], T, 0.5, 0.5)
        dist = theta.distances(j, np.abs(m_arr))
        bounds[j] = 1.0 / dist + 2.0 + base
    return bounds


def direct_tail_bound(theta: ThetaVector, cutoff: CutoffFunction, T: float,
                      R: float) -> float:
    """Tail of sum |phi(x/T)/(x_1..x_d)| over layers/offsets beyond radius R.

    Fully computed from the actual distances <theta_j m> (vectorized to
    the point where the Gaussian factors underflow); no fitted constants.
    """
    d = theta.d
    g_d = cutoff.factors[d - 1]
    m_hi = int(10.0 * T * g_d.sigma + 10)
    m_in = np.arange(1, min(int(R), m_hi) + 1, dtype=np.float64)
    bounds_in = _layer_factor_bounds(theta, cutoff, T, m_in)
    total = 0.0
    # within-layer truncation: one coordinate beyond R, others full;
    # excluded offsets have |x| >= R at integer spacing, two per unit
    for j in range(d - 1):
        tail_j = 2.0 * _tail_series(cutoff.factors[j], T, R, R)
        others = np.ones(len(m_in))
        for l in range(d - 1):
            if l != j:
                others *= bounds_in[l]
        total += 2.0 * float(np.sum(g_d(m_in / T) / m_in * others)) * tail_j
    # layers beyond R
    if m_hi > int(R):
        m_out = np.arange(int(R) + 1, m_hi + 1, dtype=np.float64)
        bounds_out = _layer_factor_bounds(theta, cutoff, T, m_out)
        prod = np.ones(len(m_out))
        for l in range(d - 1):
            prod *= bounds_out[l]
        total += 2.0 * float(np.sum(g_d(m_out / T) / m_out * prod))
    return total


def _layer_1d_sum(theta, j, m, k_lo, k_hi, u_j, factor, T):
    """sum over k in [k_lo, k_hi] of e^(2 i pi u_j x) g(x/T) / x, x = k + m theta_j."""
    k = np.arange(k_lo, k_hi + 1, dtype=np.float64)
    x = residual_given_integer(theta.dd[j], m, k)
    small = np.abs(x) < _RESONANCE_FLOOR
    if np.any(small):
        raise NearResonanceError(
            f"denominator {float(np.abs(x).min()):.3e} below {_RESONANCE_FLOOR:g} "
            f"in coordinate {j} at layer m = {m}", coordinate=j, layer=int(m))
    return complex(np.sum(np.exp(2j * np.pi * u_j * x) * factor(x / T) / x))


def direct_sum_S(theta: ThetaVector, cutoff: CutoffFunction, u, T: float,
                 eps_trunc: float = 1e-9) -> SumEvaluation:
    """Direct evaluation of the lattice sum over the nonzero theta layers.

    Layers are processed in the order m = 1, -1, 2, -2, ...; each layer
    factorizes into per-coordinate 1-D sums.  Layer values are combined
    with an exactly rounded final reduction, so the result is
    reproducible bit for bit.
    """
    cutoff = _require_gaussian(cutoff)
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    d = theta.d
    if cutoff.d != d:
        raise DomainError(f"cutoff has {cutoff.d} factors, need {d}")
    u = np.asarray(u, dtype=np.float64)
    R = _gaussian_radius(cutoff, T, eps_trunc)
    tail = direct_tail_bound(theta, cutoff, T, R)
    for _ in range(60):
        if tail < eps_trunc:
            break
        R *= 1.25
        tail = direct_tail_bound(theta, cutoff, T, R)
    g_d = cutoff.factors[d - 1]
    layer_vals = []
    count = 0
    for m_abs in range(1, int(R) + 1):
        for m in (m_abs, -m_abs):
            amp = g_d(m / T) / m
            if abs(amp) < 1e-300:
                continue
            prod = np.exp(2j * np.pi * u[d - 1] * m) * amp
            for j in range(d - 1):
                k_lo = math.ceil(-R - m * theta.components[j])
                k_hi = math.floor(R - m * theta.components[j])
                prod *= _layer_1d_sum(theta, j, m, k_lo, k_hi, u[j],
                                      cutoff.factors[j], T)
                count += k_hi - k_lo + 1
            layer_vals.append(prod)
    return SumEvaluation(
        value=fsum_complex(layer_vals), T=float(T), u=tuple(u),
        method="direct", truncation_radius=R, tail_bound=tail,
        term_count=count)


def direct_sum_script_S(theta: ThetaVector, cutoff_phi, u, T: float,
                        eps_trunc: float = 1e-9) -> SumEvaluation:
    """The same sum organized over integer vectors m (m_d != 0).

    `cutoff_phi` may be a product CutoffFunction (fast separable path) or
    any callable on d-vectors (meshgrid path, used by the change-of-
    variables check).
    """
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    d = theta.d
    u = np.asarray(u, dtype=np.float64)
    if isinstance(cutoff_phi, CutoffFunction):
        cutoff = _require_gaussian(cutoff_phi)
        R = _gaussian_radius(cutoff, T, eps_trunc)
        tail = _script_tail_bound(theta, cutoff, T, R)
        for _ in range(60):
            if tail < eps_trunc:
                break
            R *= 1.25
            tail = _script_tail_bound(theta, cutoff, T, R)
        g_d = cutoff.factors[d - 1]
        layer_vals = []
        count = 0
        for m_abs in range(1, int(R) + 1):
            for m in (m_abs, -m_abs):
                amp = g_d(m / T) / m
                if abs(amp) < 1e-300:
                    continue
                prod = np.exp(2j * np.pi * u[d - 1] * m) * amp
                for j in range(d - 1):
                    ml = np.arange(-int(R), int(R) + 1, dtype=np.float64)
                    den = residual_given_integer(theta.dd[j], m, -ml)
                    small = np.abs(den) < _RESONANCE_FLOOR
                    if np.any(small):
                        raise NearResonanceError(
                            f"denominator below {_RESONANCE_FLOOR:g} in "
                            f"coordinate {j} at layer m_d = {m}",
                            coordinate=j, layer=m)
                    prod *= complex(np.sum(
                        np.exp(2j * np.pi * u[j] * ml)
                        * cutoff.factors[j](ml / T) / den))
                    count += len(ml)
                layer_vals.append(prod)
        return SumEvaluation(
            value=fsum_complex(layer_vals), T=float(T), u=tuple(u),
            method="direct-m", truncation_radius=R, tail_bound=tail,
            term_count=count)
    # generic callable cutoff: explicit meshgrid over the m box
    if not callable(cutoff_phi):
        raise DomainError("cutoff_phi must be a CutoffFunction or a callable")
    R = T * math.sqrt(2.0 * math.log(1.0 / eps_trunc)) + 2.0
    rng = np.arange(-int(R), int(R) + 1, dtype=np.float64)
    axes = [rng] * (d - 1) + [rng[np.abs(rng) >= 1]]
    mesh = np.meshgrid(*axes, indexing="ij")
    M = np.stack([g.ravel() for g in mesh], axis=1)
    m_d = M[:, d - 1]
    den = m_d.copy()
    for j in range(d - 1):
        dj = residual_given_integer(theta.dd[j], m_d, -M[:, j])
        if np.any(np.abs(dj) < _RESONANCE_FLOOR):
            raise NearResonanceError(
                f"denominator below {_RESONANCE_FLOOR:g} in coordinate {j}",
                coordinate=j, layer=0)
        den = den * dj
    phi_vals = np.asarray(cutoff_phi(M / T), dtype=np.float64)
    vals = np.exp(2j * np.pi * (M @ u)) / den * phi_vals
    return SumEvaluation(
        value=fsum_complex(vals), T=float(T), u=tuple(u), method="direct-m",
        truncation_radius=R, tail_bound=math.nan, term_count=len(vals))


def _script_tail_bound(theta, cutoff, T, R) -> float:
    """Tail bound for the integer-vector organization of the sum.

    Here the cutoff decays in the integer offsets m_l rather than in the
    denominators: only the single integer nearest theta_j m_d can give a
    denominator below 1/2, so the full 1-D factor is at most
    1/<theta_j m_d> + 2 (1 + 2 sum_{n>=1} g(n/T)).
    """
    d = theta.d
    g_d = cutoff.factors[d - 1]
    m_hi = int(10.0 * T * g_d.sigma + 10)
    total = 0.0
    m_in = np.arange(1, min(int(R), m_hi) + 1, dtype=np.float64)
    fulls = np.ones((d - 1, len(m_in)))
    for j in range(d - 1):
        dist = theta.distances(j, m_in)
        base = 2.0 * (1.0 + 2.0 * _plain_series(cutoff.factors[j], T, 1.0))
        fulls[j] = 1.0 / dist + base
    for j in range(d - 1):
        gj = cutoff.factors[j]
        dist = theta.distances(j, m_in)
        tail_j = gj(R / T) / dist + 4.0 * _plain_series(gj, T, R)
        others = np.ones(len(m_in))
        for l in range(d - 1):
            if l != j:
                others *= fulls[l]
        total += 2.0 * float(np.sum(g_d(m_in / T) / m_in * others * tail_j))
    if m_hi > int(R):
        m_out = np.arange(int(R) + 1, m_hi + 1, dtype=np.float64)
        prod = np.ones(len(m_out))
        for j in range(d - 1):
            dist = theta.distances(j, m_out)
            base = 2.0 * (1.0 + 2.0 * _plain_series(cutoff.factors[j], T, 1.0))
            prod *= 1.0 / dist + base
        total += 2.0 * float(np.sum(g_d(m_out / T) / m_out * prod))
    return total


def change_of_variables(theta: ThetaVector, u) -> tuple[np.ndarray, Callable]:
    """The (v, phi-composition) pair linking the two sum organizations.

    Returns v with v_l = -u_l, v_d = u_d + sum theta_l u_l, and the map
    phi -> phi(theta_1 x_d - x_1, ..., theta_{d-1} x_d - x_{d-1}, x_d).
    """
    u = np.asarray(u, dtype=np.float64)
    d = theta.d
    th = np.array(theta.components)
    v = np.concatenate([-u[:d - 1], [u[d - 1] + float(th @ u[:d - 1])]])

    def compose(phi):
        def phi_lattice(X):
            X = np.asarray(X, dtype=np.float64)
            Y = X.copy()
            Y[..., :d - 1] = th * X[..., d - 1:d] - X[..., :d - 1]
            return phi(Y)
        return phi_lattice

    return v, compose


def check_S_equals_script_S(theta: ThetaVector, cutoff: CutoffFunction, u,
                            T: float, eps_trunc: float = 1e-10) -> dict:
    """Evaluate both organizations under the change of variables; return the residual.

    The lattice-side cutoff is the composed (non-product) function, so
    the lattice sum runs through the generic direct path with the same
    index truncation as the integer-vector sum; the two evaluations
    share no code path beyond scalar utilities.
    """
    cutoff = _require_gaussian(cutoff)
    u = np.asarray(u, dtype=np.float64)
    v, compose = change_of_variables(theta, u)
    script = direct_sum_script_S(theta, cutoff, u, T, eps_trunc=eps_trunc)
    lattice_side = _direct_sum_S_callable(theta, compose(cutoff), v, T,
                                          script.truncation_radius)
    return {
        "script_value": script.value,
        "lattice_value": lattice_side,
        "residual": abs(script.value - lattice_side),
        "tail_bound": script.tail_bound,
    }


def _direct_sum_S_callable(theta, phi, v, T, R) -> complex:
    """Layer evaluation of the lattice sum for a general callable cutoff."""
    d = theta.d
    v = np.asarray(v, dtype=np.float64)
    layer_vals = []
    for m_abs in range(1, int(R) + 1):
        for m in (m_abs, -m_abs):
            ks = [np.arange(math.ceil(-R - m * theta.components[j]),
                            math.floor(R - m * theta.components[j]) + 1,
                            dtype=np.float64) for j in range(d - 1)]
            mesh = np.meshgrid(*ks, indexing="ij")
            K = np.stack([g.ravel() for g in mesh], axis=1)
            X = np.empty((len(K), d))
            den = np.full(len(K), float(m))
            for j in range(d - 1):
                X[:, j] = residual_given_integer(theta.dd[j], m, K[:, j])
                if np.any(np.abs(X[:, j]) < _RESONANCE_FLOOR):
                    raise NearResonanceError(
                        f"denominator below {_RESONANCE_FLOOR:g} in "
                        f"coordinate {j} at layer m = {m}", coordinate=j, layer=m)
                den = den * X[:, j]
            X[:, d - 1] = m
            vals = np.exp(2j * np.pi * (X @ v)) / den * np.asarray(phi(X / T))
            layer_vals.append(complex(vals.sum()))
    return fsum_complex(layer_vals)


# ---------------------------------------------------------------------------
# dyadic decomposition
# ---------------------------------------------------------------------------

def _estimate_kappa(frames: dict) -> float:
    """Slope fit of log2 mu(L) against |L|_1 across the computed frames."""
    pts = [(sum(L), math.log2(f.mu)) for L, f in frames.items() if f.mu > 1]
    if len(pts) < 3:
        return 0.25
    w = np.array([p[0] for p in pts], dtype=np.float64)
    lm = np.array([p[1] for p in pts], dtype=np.float64)
    slope = float(np.polyfit(w, lm, 1)[0])
    slope = min(max(slope, 1e-2), 1.0)
    return max(1.0 / slope - 1.0, 0.01)


def _cap_tail_estimate(theta, indices, records, frames, T, l1_cap) -> float:
    """Envelope extrapolation of the decomposition beyond the weight cap.

    Shape: 2^(kappa n/(kappa+1)) (log T + n)^{|J'|} log T
           / (1 + 2^(n/(kappa+1))/T)^a, with kappa fitted from the
    computed dyadic minima, a = kappa + 2, and the constant fitted on
    the computed terms of the largest weights.  An estimate, not a bound.
    """
    kappa = _estimate_kappa(frames)
    a_env = kappa + 2.0
    d = theta.d
    logT = max(math.log2(max(T, 2.0)), 1.0)

    def env(n: int, n_outer: int) -> float:
        return (2.0 ** (kappa * n / (kappa + 1.0))
                * (logT + n) ** n_outer * logT
                / (1.0 + 2.0 ** (n / (kappa + 1.0)) / T) ** a_env)

    c_fit = 0.0
    for ix, rec in zip(indices, records):
        n = ix.weight
        if n >= l1_cap / 2 and n >= 1:
            size = max(abs(rec.value), rec.tail_bound)
            c_fit = max(c_fit, size / env(n, d - 1 - len(ix.J)))
    if c_fit == 0.0:
        return 0.0
    total = 0.0
    for n in range(l1_cap + 1, l1_cap + 400):
        level = 0.0
        for size in range(1, d):
            # nonneg exponent vectors of weight n supported inside a size-set
            count = math.comb(n + size - 1, size - 1) * math.comb(d - 1, size)
            level += count * env(n, d - 1 - size)
        total += c_fit * level
        if c_fit * level < 1e-4 * total:
            break
    return total


def dyadic_decomposed_sum(theta: ThetaVector, cutoff: CutoffFunction, u,
                          T: float, L1_cap: int, eps_trunc: float = 1e-8,
                          search_cap: int = DEFAULT_SEARCH_CAP) -> SumEvaluation:
    """The sum assembled from its partition atoms via Poisson summation.

    Every index pair (J, L) with |L|_1 <= L1_cap contributes a lattice
    sum of a separable oscillatory integral over the equalized dual
    lattice at shrunk shift D^-1 u and kernel arguments m(L)/T.  Terms
    whose dyadic minimum exceeds `search_cap` are only admitted when the
    certified bound mu > search_cap makes them negligible; otherwise the
    bounded-search failure propagates (silently dropping a term would
    fake agreement with the direct route).
    """
    cutoff = _require_gaussian(cutoff)
    d = theta.d
    if cutoff.d != d:
        raise DomainError(f"cutoff has {cutoff.d} factors, need {d}")
    if L1_cap < 0:
        raise DomainError(f"L1_cap must be >= 0, got {L1_cap}")
    u = np.asarray(u, dtype=np.float64)
    indices = dyadic_indices(d, L1_cap)
    eps_term = eps_trunc / (4.0 * math.sqrt(len(indices)))
    frames: dict[tuple[int, ...], object] = {}
    records: list[TermRecord] = []
    for ix in indices:
        L = ix.L
        frame = frames.get(L)
        if frame is None and L not in frames:
            try:
                frame = equalized_frame(theta, L, search_cap=search_cap)
            except BoundedSearchError as exc:
                bound = _unreachable_term_bound(theta, cutoff, ix, T, search_cap)
                if bound < eps_term:
                    records.append(TermRecord(
                        J=ix.J, L=L, mu=None, nu=None, value=0.0 + 0.0j,
                        abs_error=0.0, tail_bound=bound, n_points=0,
                        skipped=True))
                    frames[L] = None
                    continue
                raise BoundedSearchError(
                    f"term J={ix.J} L={L}: {exc} (and its envelope bound "
                    f"{bound:.2e} is not negligible at eps={eps_term:.2e})",
                    cap=search_cap) from exc
            frames[L] = frame
        frame = frames[L]
        if frame is None:
            bound = _unreachable_term_bound(theta, cutoff, ix, T, search_cap)
            records.append(TermRecord(
                J=ix.J, L=L, mu=None, nu=None, value=0.0 + 0.0j,
                abs_error=0.0, tail_bound=bound, n_points=0, skipped=True))
            continue
        lattice = equalized_dual(frame).as_generic()
        u_eq = u / frame.equalizer_diag()
        q = frame.m_vec / T
        term = F_J_lattice_sum(frame.nu, lattice, u_eq, q, cutoff,
                               eps_trunc=eps_term, J=ix.J)
        records.append(TermRecord(
            J=ix.J, L=L, mu=frame.mu, nu=frame.nu, value=term.value,
            abs_error=term.abs_error, tail_bound=term.tail_bound,
            n_points=term.n_points, skipped=term.skipped))
    value = fsum_complex([r.value for r in records])
    live_frames = {L: f for L, f in frames.items() if f is not None}
    cap_tail = _cap_tail_estimate(theta, indices, records, live_frames, T, L1_cap)
    tail = math.fsum(r.tail_bound for r in records) + cap_tail
    err = math.fsum(r.abs_error for r in records)
    return SumEvaluation(
        value=value, T=float(T), u=tuple(u), method="dyadic",
        truncation_radius=float(L1_cap), tail_bound=tail,
        term_count=len(records), abs_error=err, breakdown=tuple(records))


def _unreachable_term_bound(theta, cutoff, ix: DyadicIndex, T, search_cap) -> float:
    """Bound for a term whose mu(L) exceeded the search cap.

    The failed search certifies mu > cap, so q_d > cap/T kills the outer
    factor of coordinate d, and nu^d > 2^(1-d) cap 2^(-|L|_1) bounds the
    packing count through the duality sandwich.
    """
    d = theta.d
    n = ix.weight
    amp = 1.0
    for j in range(d - 1):
        kind = "0" if j in ix.J else "inf"
        amp *= factor_amplitude_bound(kind, cutoff.factors[j],
                                      2.0 ** (-(ix.L[j] + 1)) / T)
    amp *= factor_amplitude_bound("inf", cutoff.factors[d - 1], search_cap / T)
    nu_pow_d = 2.0 ** (1 - d - n) * search_cap
    spacing = nu_pow_d / d  # lambda_1 of the summation lattice, scaled by nu
    count = ((2.0 * 768.0 + spacing) / spacing) ** d
    return amp * count * 8.0


# ---------------------------------------------------------------------------
# growth scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthScanResult:
    """Supremum-proxy growth data over a geometric T grid with its slope fit."""

    theta_label: str
    T_grid: tuple[float, ...]
    sup_values: tuple[float, ...]
    slope: float | None
    intercept: float | None
    residuals: tuple[float, ...]
    u_grid_n: int
    method: str
    degenerate: bool = False

    def rows(self):
        for T, s in zip(self.T_grid, self.sup_values):
            yield {"theta_label": self.theta_label, "T": T, "sup_proxy": s}


class _DyadicScanner:
    """Per-T bundle of term evaluators sharing one cell parametrization.

    Each term's shift is D^-1 u; with u = B t (B the dual basis) this is
    exactly (D^-1 B) t, the term lattice's own cell at the same t, so all
    terms consume one t vector.
    """

    def __init__(self, theta, cutoff, T, l1_cap, eps, search_cap):
        d = theta.d
        self.evaluators = []
        self.bases = []
        self.tail = 0.0
        for ix in dyadic_indices(d, l1_cap):
            try:
                frame = equalized_frame(theta, ix.L, search_cap=search_cap)
            except BoundedSearchError:
                bound = _unreachable_term_bound(theta, cutoff, ix, T, search_cap)
                if bound < eps:
                    self.tail += bound
                    continue
                raise
            lattice = equalized_dual(frame).as_generic()
            ev = FJSumEvaluator(frame.nu, lattice, frame.m_vec / T, cutoff,
                                J=ix.J, eps=eps)
            if ev.negligible:
                self.tail += ev.tail
                continue
            self.evaluators.append(ev)
            self.bases.append(lattice.basis)
        self.d = d

    def eval_t(self, t) -> complex:
        t = np.asarray(t, dtype=np.float64)
        return fsum_complex([ev.eval(B @ t)
                             for ev, B in zip(self.evaluators, self.bases)])


def _sup_proxy_over_cell(func, d: int, grid_n: int, refine_rounds: int):
    """Grid + coordinate-wise golden-section maximization of |func(t)|."""
    axes = [np.arange(grid_n) / grid_n for _ in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    T_pts = np.stack([g.ravel() for g in mesh], axis=1)
    best_val, best_t = -1.0, None
    for t in T_pts:
        v = abs(func(t))
        if v > best_val:
            best_val, best_t = v, t.copy()
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    step = 1.0 / grid_n
    for _ in range(refine_rounds):
        for axis in range(d):
            lo, hi = best_t[axis] - step, best_t[axis] + step
            c = hi - phi * (hi - lo)
            dd = lo + phi * (hi - lo)
            tc, td = best_t.copy(), best_t.copy()
            tc[axis], td[axis] = c, dd
            fc, fd = abs(func(tc)), abs(func(td))
            for _i in range(10):
                if fc < fd:
                    lo, c, fc = c, dd, fd
                    dd = lo + phi * (hi - lo)
                    td = best_t.copy(); td[axis] = dd
                    fd = abs(func(td))
                else:
                    hi, dd, fd = dd, c, fc
                    c = hi - phi * (hi - lo)
                    tc = best_t.copy(); tc[axis] = c
                    fc = abs(func(tc))
            mid = 0.5 * (lo + hi)
            tm = best_t.copy(); tm[axis] = mid
            fm = abs(func(tm))
            if fm > best_val:
                best_val, best_t = fm, tm
        step *= phi ** 10
    return best_val, best_t


def default_l1_cap(T: float, kappa_hint: float = 0.5) -> int:
    """Weight cap heuristic: cover scales up to ~T plus decay margin."""
    return int(math.ceil((1.0 + kappa_hint) * math.log2(max(T, 2.0)))) + 12


def growth_scan(theta: ThetaVector, cutoff: CutoffFunction,
                T_grid: Sequence[float], u_grid_n: int = 8,
                method: str = "dyadic", L1_cap: int | None = None,
                eps: float = 1e-6, refine_rounds: int = 2,
                search_cap: int = DEFAULT_SEARCH_CAP) -> GrowthScanResult:
    """Supremum-proxy scan of the sum over a geometric T grid, with slope fit.

    The proxy is the grid-plus-refinement maximum of |S| over the
    fundamental cell of the dual lattice at resolution u_grid_n per
    coordinate; comparisons across theta at equal resolution are
    meaningful even though the true supremum is out of reach.
    """
    T_grid = [float(T) for T in T_grid]
    if any(b <= a for a, b in zip(T_grid, T_grid[1:])) or not T_grid:
        raise DomainError("T grid must be strictly increasing and nonempty")
    if method not in ("dyadic", "direct"):
        raise DomainError(f"method must be 'dyadic' or 'direct', got {method!r}")
    cutoff = _require_gaussian(cutoff)
    d = theta.d
    dual_basis = ThetaLattice(theta, "dual").basis()

    def sup_for_T(T: float) -> float:
        if method == "dyadic":
            cap = L1_cap if L1_cap is not None else default_l1_cap(T)
            scanner = _DyadicScanner(theta, cutoff, T, cap, eps, search_cap)
            val, _ = _sup_proxy_over_cell(scanner.eval_t, d, u_grid_n,
                                          refine_rounds)
            return val
        func = lambda t: direct_sum_S(theta, cutoff, dual_basis @ t, T,
                                      eps_trunc=eps).value
        val, _ = _sup_proxy_over_cell(func, d, u_grid_n, refine_rounds)
        return val

    workers = worker_count()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            sup_vals = list(pool.map(sup_for_T, T_grid))
    else:
        sup_vals = [sup_for_T(T) for T in T_grid]

    floor = 10.0 * eps
    degenerate = all(v < floor for v in sup_vals)
    if degenerate or len(T_grid) < 2:
        return GrowthScanResult(
            theta_label=theta.label, T_grid=tuple(T_grid),
            sup_values=tuple(sup_vals), slope=None, intercept=None,
            residuals=(), u_grid_n=u_grid_n, method=method, degenerate=True)
    lt = np.log2(T_grid)
    lv = np.log2(np.maximum(sup_vals, 1e-300))
    slope, intercept = np.polyfit(lt, lv, 1)
    resid = lv - (slope * lt + intercept)
    return GrowthScanResult(
        theta_label=theta.label, T_grid=tuple(T_grid),
        sup_values=tuple(sup_vals), slope=float(slope),
        intercept=float(intercept), residuals=tuple(float(r) for r in resid),
        u_grid_n=u_grid_n, method=method)
