"""Moment-matched ensembles force nearly equal smooth statistics of linear forms.

Everything here is exact enumeration over finite supports: a family of
independent small ensembles, a linear form l(x) = sum_i <l_i, x_i>, and a
test function Psi with bounded fourth derivative.  If every A_i matches
every B_i up to degree-3 moments, the Psi-expectation gap is at most
K * sum_i ||l_i||_1^4, proved (and tested here) one hybrid swap at a time
with a per-swap budget of (K/12) * ||l_i||_1^4.

For the 0/1 sign statistic the chain runs through a smooth surrogate: a
degree-9 polynomial bridge that climbs from 0 to 1 across [-lam, lam] with
four vanishing derivatives at both ends.  Its certified fourth-derivative
bound C/lam^4 plus the worst window mass c(alpha) of the linear form give
the testable bound gap <= (C/alpha^4) * sum ||l_i||_1^4 + 2 c(alpha).

Two arithmetic paths coexist: a float path that convolves per-ensemble
value distributions with exact-duplicate merging, and a Fraction path used
where tests assert literal equality (a cubic Psi gap is zero, not small).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational as _RationalABC
from typing import Callable, Sequence

import numpy as np

from .core import GuardError
from .moments import (
    ColumnMixture,
    NoisySource,
    marginal_pmf,
    marginal_pmf_rational,
)

ENUM_GUARD_POINTS = 10_000_000
_EXACT_GUARD_POINTS = 200_000

Number = float | Fraction


def _is_exact(value) -> bool:
    return isinstance(value, _RationalABC) and not isinstance(value, float)


@dataclass(frozen=True)
class Ensemble:
    """A finite joint distribution of `vars_count` variables in [-1, 1].

    support holds (probability, value tuple) rows; probabilities sum to 1.
    Rows may carry Fractions throughout, enabling exact expectations.
    """

    vars_count: int
    support: tuple[tuple[Number, tuple[Number, ...]], ...]

    def __post_init__(self):
        if self.vars_count < 0:
            raise ValueError("vars_count must be nonnegative")
        if not self.support:
            raise ValueError("support must be nonempty")
        total = 0
        for prob, values in self.support:
            if len(values) != self.vars_count:
                raise ValueError(
                    f"support row has {len(values)} values, expected {self.vars_count}"
                )
            if prob < 0:
                raise ValueError(f"negative probability {prob}")
            if any(abs(v) > 1 + 1e-12 for v in values):
                raise ValueError("ensemble values must be bounded by 1")
            total = total + prob
        if abs(float(total) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {float(total)!r}, expected 1")

    @property
    def exact(self) -> bool:
        return all(
            _is_exact(p) and all(_is_exact(v) for v in vals)
            for p, vals in self.support
        )

    def moment(self, multiset: Sequence[int]) -> Number:
        """E[prod_{i in multiset} x_i]; indices may repeat."""
        for i in multiset:
            if not 0 <= i < self.vars_count:
                raise ValueError(f"variable index {i} out of range")
        if self.exact:
            acc = Fraction(0)
            for p, vals in self.support:
                term = Fraction(p)
                for i in multiset:
                    term *= Fraction(vals[i])
                acc += term
            return acc
        terms = []
        for p, vals in self.support:
            term = float(p)
            for i in multiset:
                term *= float(vals[i])
            terms.append(term)
        return math.fsum(terms)


def first_moment_mismatch(
    a: Ensemble, b: Ensemble, degree: int, tol: float = 1e-12
) -> tuple[int, ...] | None:
    """The smallest multiset (by size, then lexicographic) where moments differ."""
    if a.vars_count != b.vars_count:
        raise ValueError(
            f"arity mismatch: {a.vars_count} vs {b.vars_count} variables"
        )
    for size in range(1, degree + 1):
        for multiset in itertools.combinations_with_replacement(
            range(a.vars_count), size
        ):
            if abs(float(a.moment(multiset)) - float(b.moment(multiset))) > tol:
                return multiset
    return None


def matching_moments(a: Ensemble, b: Ensemble, degree: int, tol: float = 1e-12) -> bool:
    return first_moment_mismatch(a, b, degree, tol) is None


@dataclass(frozen=True)
class EnsembleFamily:
    """Independent ensembles; the product of support sizes is guarded."""

    ensembles: tuple[Ensemble, ...]

    def __post_init__(self):
        points = math.prod(len(e.support) for e in self.ensembles) if self.ensembles else 1
        if points > ENUM_GUARD_POINTS:
            raise GuardError(
                f"product support has {points} points; guard is {ENUM_GUARD_POINTS}"
            )

    def __len__(self) -> int:
        return len(self.ensembles)

    @property
    def exact(self) -> bool:
        return all(e.exact for e in self.ensembles)


def family(*ensembles: Ensemble) -> EnsembleFamily:
    return EnsembleFamily(ensembles=tuple(ensembles))


# ---------------------------------------------------------------------------
# ensembles from gadget mixtures


def ensemble_from_pmf(pmf: Sequence[Number], m: int) -> Ensemble:
    """Ensemble over m bit variables from a pmf over the 2^m patterns.

    Pattern index bit i (little-endian) is the value of variable i.
    """
    if len(pmf) != 1 << m:
        raise ValueError(f"pmf has {len(pmf)} entries, expected {1 << m}")
    rows = []
    for pattern, prob in enumerate(pmf):
        if not prob:
            continue
        values = tuple((pattern >> i) & 1 for i in range(m))
        rows.append((prob, values))
    return Ensemble(vars_count=m, support=tuple(rows))


def mixture_marginal_ensemble(
    dist: ColumnMixture | NoisySource, m: int, exact: bool = False
) -> Ensemble:
    """First-m-coordinates marginal of a gadget column as an ensemble."""
    if exact:
        pmf = marginal_pmf_rational(dist, m)
        if pmf is None:
            raise ValueError("distribution carries no exact weights")
        return ensemble_from_pmf(pmf, m)
    return ensemble_from_pmf([float(v) for v in marginal_pmf(dist, m)], m)


def conditioned_marginal_ensemble(
    dist: ColumnMixture | NoisySource, m: int, exact: bool = False
) -> Ensemble:
    """Marginal of coordinates 1..m conditioned on coordinate 0 being 1.

    Conditioning spends one moment degree: a degree-4 matched pair yields
    degree-3 matched conditioned ensembles (the conditioning masses agree
    by the degree-1 match).
    """
    if exact:
        pmf = marginal_pmf_rational(dist, m + 1)
        if pmf is None:
            raise ValueError("distribution carries no exact weights")
    else:
        pmf = [float(v) for v in marginal_pmf(dist, m + 1)]
    mass = sum(p for pattern, p in enumerate(pmf) if pattern & 1)
    if float(mass) <= 0.0:
        raise ValueError("conditioning event has zero probability")
    cond = [Fraction(0) if _is_exact(mass) else 0.0] * (1 << m)
    for pattern, p in enumerate(pmf):
        if pattern & 1:
            cond[pattern >> 1] = cond[pattern >> 1] + p / mass
    return ensemble_from_pmf(cond, m)


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class PolyPsi:
    """Polynomial test function with coefficients in ascending degree order."""

    coeffs: tuple[Number, ...]

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            return np.polynomial.polynomial.polyval(
                t, np.asarray([float(c) for c in self.coeffs])
            )
        acc = 0 * t
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc

    @property
    def degree(self) -> int:
        d = len(self.coeffs) - 1
        while d > 0 and float(self.coeffs[d]) == 0.0:
            d -= 1
        return d

    @property
    def k_bound(self) -> float:
        """max |fourth derivative|; finite only through degree 4."""
        if self.degree > 4:
            raise ValueError("fourth-derivative bound unavailable above degree 4")
        if self.degree < 4:
            return 0.0
        return abs(24.0 * float(self.coeffs[4]))


QUARTIC = PolyPsi(coeffs=(0, 0, 0, 0, 1))


# the degree-9 bridge S(u) on [0, 1]: derivatives 1..4 vanish at both ends
_BRIDGE_ASC = (0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0)
# S''''(u) = 15120 * h(u), h(u) = u(1-u)(1-2u)(7u^2-7u+1)
_H_ASC = (0.0, 1.0, -10.0, 30.0, -35.0, 14.0)
_H_PRIME_ASC = (1.0, -20.0, 90.0, -140.0, 70.0)
_H_PRIME2_ASC = (-20.0, 180.0, -420.0, 280.0)


def _polyval_asc(coeffs: Sequence[float], x):
    return np.polynomial.polynomial.polyval(x, np.asarray(coeffs))


def _bridge_fourth_max() -> float:
    """Certified max of |S''''| on [0, 1] via the critical points of h."""
    roots = np.roots(list(reversed(_H_PRIME_ASC)))
    crit = [r.real for r in roots if abs(r.imag) < 1e-9 and -0.01 < r.real < 1.01]
    for _ in range(4):  # Newton polish
        crit = [
            u - _polyval_asc(_H_PRIME_ASC, u) / _polyval_asc(_H_PRIME2_ASC, u)
            for u in crit
        ]
    candidates = [0.0, 1.0] + [min(max(u, 0.0), 1.0) for u in crit]
    peak = max(abs(_polyval_asc(_H_ASC, u)) for u in candidates)
    return 15120.0 * peak * (1.0 + 1e-9)


_BRIDGE_FOURTH_MAX = _bridge_fourth_max()

# max |Phi''''| = C_PHI / lam^4 for every half-width lam
C_PHI = _BRIDGE_FOURTH_MAX / 16.0


@dataclass(frozen=True)
class SmoothSign:
    """0 below -lam, 1 above lam, a degree-9 polynomial bridge between.

    Four derivatives vanish at the seams, so the function has four
    continuous derivatives everywhere; |fourth derivative| <= k_bound.
    """

    lam: float
    bridge: tuple[float, ...]
    k_bound: float

    def __call__(self, t):
        scalar = np.isscalar(t)
        arr = np.asarray(t, dtype=np.float64)
        u = np.clip((arr + self.lam) / (2.0 * self.lam), 0.0, 1.0)
        out = _polyval_asc(self.bridge, u)
        return float(out) if scalar else out

    def fourth_derivative(self, t):
        scalar = np.isscalar(t)
        arr = np.asarray(t, dtype=np.float64)
        u = (arr + self.lam) / (2.0 * self.lam)
        inside = (u > 0.0) & (u < 1.0)
        vals = np.where(
            inside,
            15120.0 * _polyval_asc(_H_ASC, np.clip(u, 0.0, 1.0)),
            0.0,
        ) / (16.0 * self.lam**4)
        return float(vals) if scalar else vals


def smooth_sign(lam: float) -> SmoothSign:
    if not 0.0 < lam < 0.5:
        raise ValueError(f"half-width must be in (0, 1/2), got {lam}")
    return SmoothSign(lam=lam, bridge=_BRIDGE_ASC, k_bound=C_PHI / lam**4)


# ---------------------------------------------------------------------------
# linear-form distributions


def _check_blocks(fam: EnsembleFamily, blocks: Sequence[Sequence[Number]]) -> None:
    if len(blocks) != len(fam):
        raise ValueError(
            f"{len(blocks)} weight blocks for {len(fam)} ensembles"
        )
    for i, (ens, block) in enumerate(zip(fam.ensembles, blocks)):
        if len(block) != ens.vars_count:
            raise ValueError(
                f"block {i} has {len(block)} weights for {ens.vars_count} variables"
            )


def _block_dist_float(ens: Ensemble, block) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray([float(v) for v in block])
    vals = np.asarray(
        [math.fsum(float(x) * wi for x, wi in zip(row, w)) for _, row in ens.support]
    )
    probs = np.asarray([float(p) for p, _ in ens.support])
    return _merge_float(vals, probs)


def _merge_float(vals: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    atoms, inverse = np.unique(vals, return_inverse=True)
    mass = np.bincount(inverse, weights=probs, minlength=atoms.size)
    return atoms, mass


def _convolve_float(
    a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    av, ap = a
    bv, bp = b
    sums = (av[:, None] + bv[None, :]).reshape(-1)
    mass = (ap[:, None] * bp[None, :]).reshape(-1)
    return _merge_float(sums, mass)


def _block_dist_exact(ens: Ensemble, block) -> dict[Fraction, Fraction]:
    w = [Fraction(v) for v in block]
    out: dict[Fraction, Fraction] = {}
    for p, row in ens.support:
        val = sum((Fraction(x) * wi for x, wi in zip(row, w)), Fraction(0))
        out[val] = out.get(val, Fraction(0)) + Fraction(p)
    return out


def _convolve_exact(
    a: dict[Fraction, Fraction], b: dict[Fraction, Fraction]
) -> dict[Fraction, Fraction]:
    out: dict[Fraction, Fraction] = {}
    for va, pa in a.items():
        for vb, pb in b.items():
            key = va + vb
            out[key] = out.get(key, Fraction(0)) + pa * pb
    if len(out) > _EXACT_GUARD_POINTS:
        raise GuardError(
            f"exact convolution grew to {len(out)} atoms; guard is {_EXACT_GUARD_POINTS}"
        )
    return out


def linear_form_distribution(
    fam: EnsembleFamily, blocks: Sequence[Sequence[Number]]
) -> tuple[np.ndarray, np.ndarray]:
    """Atoms and probabilities of l(x) = sum_i <l_i, x_i> (float path)."""
    _check_blocks(fam, blocks)
    acc = (np.zeros(1), np.ones(1))
    for ens, block in zip(fam.ensembles, blocks):
        acc = _convolve_float(acc, _block_dist_float(ens, block))
    return acc


def linear_form_distribution_exact(
    fam: EnsembleFamily, blocks: Sequence[Sequence[Number]]
) -> dict[Fraction, Fraction]:
    _check_blocks(fam, blocks)
    acc: dict[Fraction, Fraction] = {Fraction(0): Fraction(1)}
    for ens, block in zip(fam.ensembles, blocks):
        acc = _convolve_exact(acc, _block_dist_exact(ens, block))
    return acc


def expect_psi(
    fam: EnsembleFamily,
    blocks: Sequence[Sequence[Number]],
    theta: float,
    psi: Callable,
) -> float:
    """Exact E[Psi(l(x) - theta)] by enumeration of the product support."""
    atoms, probs = linear_form_distribution(fam, blocks)
    return float(np.dot(probs, np.asarray(psi(atoms - theta), dtype=np.float64)))


def expect_psi_exact(
    fam: EnsembleFamily,
    blocks: Sequence[Sequence[Number]],
    theta: Number,
    psi: Callable,
) -> Fraction:
    dist = linear_form_distribution_exact(fam, blocks)
    th = Fraction(theta)
    return sum((p * Fraction(psi(v - th)) for v, p in dist.items()), Fraction(0))


def sum_l1_fourth(blocks: Sequence[Sequence[Number]]) -> float:
    return math.fsum(
        math.fsum(abs(float(v)) for v in block) ** 4 for block in blocks
    )


# ---------------------------------------------------------------------------
# gap computations


def _require_matching(
    fam_a: EnsembleFamily, fam_b: EnsembleFamily, degree: int
) -> None:
    if len(fam_a) != len(fam_b):
        raise ValueError(
            f"family sizes differ: {len(fam_a)} vs {len(fam_b)}"
        )
    for i, (a, b) in enumerate(zip(fam_a.ensembles, fam_b.ensembles)):
        bad = first_moment_mismatch(a, b, degree)
        if bad is not None:
            raise ValueError(
                f"ensembles at index {i} disagree on the degree-{len(bad)} "
                f"moment of variables {bad}"
            )


@dataclass(frozen=True)
class GapResult:
    expect_a: float
    expect_b: float
    gap: float
    bound: float
    sum_l1_4: float

    @property
    def passed(self) -> bool:
        return self.gap <= self.bound + 1e-9


def invariance_gap(
    fam_a: EnsembleFamily,
    fam_b: EnsembleFamily,
    blocks: Sequence[Sequence[Number]],
    theta: float,
    psi: Callable,
    k_bound: float,
) -> GapResult:
    """|E_A Psi(l - theta) - E_B Psi(l - theta)| against K * sum ||l_i||_1^4.

    Requires per-index degree-3 moment matching; the violating multiset is
    named on failure.
    """
    _require_matching(fam_a, fam_b, 3)
    ea = expect_psi(fam_a, blocks, theta, psi)
    eb = expect_psi(fam_b, blocks, theta, psi)
    s = sum_l1_fourth(blocks)
    return GapResult(
        expect_a=ea,
        expect_b=eb,
        gap=abs(ea - eb),
        bound=k_bound * s,
        sum_l1_4=s,
    )


def invariance_gap_exact(
    fam_a: EnsembleFamily,
    fam_b: EnsembleFamily,
    blocks: Sequence[Sequence[Number]],
    theta: Number,
    psi: Callable,
) -> Fraction:
    """The signed gap E_A - E_B as an exact rational."""
    _require_matching(fam_a, fam_b, 3)
    return expect_psi_exact(fam_a, blocks, theta, psi) - expect_psi_exact(
        fam_b, blocks, theta, psi
    )


def hybrid_steps(
    fam_a: EnsembleFamily,
    fam_b: EnsembleFamily,
    blocks: Sequence[Sequence[Number]],
    theta: float,
    psi: Callable,
) -> list[float]:
    """Signed per-index swap gaps; they telescope to E_B - E_A.

    Step i swaps ensemble i from A to B while indices below i already use B
    and indices above still use A.  Each step is bounded by
    (K/12) * ||l_i||_1^4 when the pair matches to degree 3.
    """
    _check_blocks(fam_a, blocks)
    _check_blocks(fam_b, blocks)
    r = len(fam_a)
    a_dists = [
        _block_dist_float(e, b) for e, b in zip(fam_a.ensembles, blocks)
    ]
    b_dists = [
        _block_dist_float(e, b) for e, b in zip(fam_b.ensembles, blocks)
    ]
    unit = (np.zeros(1), np.ones(1))
    prefix_b = [unit]
    for i in range(r):
        prefix_b.append(_convolve_float(prefix_b[-1], b_dists[i]))
    suffix_a = [unit]
    for i in reversed(range(r)):
        suffix_a.append(_convolve_float(suffix_a[-1], a_dists[i]))
    suffix_a.reverse()  # suffix_a[i] = conv of a_dists[i:]

    def _expect(dist: tuple[np.ndarray, np.ndarray]) -> float:
        atoms, probs = dist
        return float(np.dot(probs, np.asarray(psi(atoms - theta), dtype=np.float64)))

    steps = []
    for i in range(r):
        rest = _convolve_float(prefix_b[i], suffix_a[i + 1])
        with_a = _expect(_convolve_float(rest, a_dists[i]))
        with_b = _expect(_convolve_float(rest, b_dists[i]))
        steps.append(with_b - with_a)
    return steps


# ---------------------------------------------------------------------------
# sign statistic


def window_mass(
    atoms: np.ndarray, probs: np.ndarray, alpha: float
) -> float:
    """sup over centers of Pr[value in [center - alpha, center + alpha]].

    For a discrete distribution the supremum is attained with a window edge
    at an atom; both edge alignments are scanned.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    order = np.argsort(atoms)
    a = atoms[order]
    p = probs[order]
    cum = np.concatenate([[0.0], np.cumsum(p)])
    width = 2.0 * alpha
    best = 0.0
    for lows in (a, a - width):
        lo = np.searchsorted(a, lows, side="left")
        hi = np.searchsorted(a, lows + width, side="right")
        mass = cum[hi] - cum[lo]
        best = max(best, float(mass.max()))
    return best


def spread_function(
    fam: EnsembleFamily, blocks: Sequence[Sequence[Number]], alpha: float
) -> float:
    atoms, probs = linear_form_distribution(fam, blocks)
    return window_mass(atoms, probs, alpha)


@dataclass(frozen=True)
class SgnGapResult:
    gap: float
    bound: float
    c_alpha: float
    smooth_bound: float
    sum_l1_4: float

    @property
    def passed(self) -> bool:
        return self.gap <= self.bound + 1e-9


def sgn_gap_bound(
    fam_a: EnsembleFamily,
    fam_b: EnsembleFamily,
    blocks: Sequence[Sequence[Number]],
    theta: float,
    alpha: float,
) -> SgnGapResult:
    """0/1 sign-statistic gap against (C/alpha^4) sum ||l_i||_1^4 + 2 c(alpha).

    The sign statistic is Pr[l(x) >= theta] (the halfspace convention maps
    the boundary to 1).  c(alpha) is the worse of the two families' maximal
    window masses at half-width alpha.
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must be in (0, 1/2), got {alpha}")
    _require_matching(fam_a, fam_b, 3)
    da = linear_form_distribution(fam_a, blocks)
    db = linear_form_distribution(fam_b, blocks)
    pa = float(da[1][da[0] >= theta].sum())
    pb = float(db[1][db[0] >= theta].sum())
    c_alpha = max(
        window_mass(da[0] - theta, da[1], alpha),
        window_mass(db[0] - theta, db[1], alpha),
    )
    ss = smooth_sign(alpha)
    s = sum_l1_fourth(blocks)
    smooth_term = ss.k_bound * s
    return SgnGapResult(
        gap=abs(pa - pb),
        bound=smooth_term + 2.0 * c_alpha,
        c_alpha=c_alpha,
        smooth_bound=smooth_term,
        sum_l1_4=s,
    )
