"""Moment-matched column distributions over {0,1}^k.

The positive source D1 mixes an exactly-one-hot component with four product
Bernoulli components at rates p, 2p, 3p, 4p.  The negative source D0 mixes an
all-zeros component with the same four product components, reweighted so that
every moment of degree at most four agrees between the two sources.  The
reweighting solves a 4x4 linear system whose closed form is

    eps_i = eps/4 + delta_i,   delta = (4b, -3b, 4b/3, -b/4),
    b = (1 - eps) / (k * p).

All weights are solved in exact rational arithmetic (floats are read as the
decimal literal they print as), so boundary-feasible parameter sets come out
exactly on the boundary instead of within float noise of it.  Closed-form
moments, the all-zeros probabilities, conditional moments, and a brute-force
enumeration oracle live here, along with deterministic column samplers and
the per-bit replacement-noise channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .core import (
    CursorRng,
    GuardError,
    rng_words,
    words_to_open_uniforms,
    words_to_uniforms,
)

Rational = Union[int, float, str, Fraction]

ENUM_GUARD_K = 20
_DENSE_NOISE_THRESHOLD = 1.0 / 32.0

KIND_ALL_ZERO = 0
KIND_EXACTLY_ONE = 1
KIND_BERNOULLI = 2

_KIND_NAMES = {
    KIND_ALL_ZERO: "all-zero",
    KIND_EXACTLY_ONE: "exactly-one",
    KIND_BERNOULLI: "bernoulli",
}


class FeasibilityError(ValueError):
    """Raised when no valid moment-matched pair exists at the parameters."""


def as_fraction(x: Rational) -> Fraction:
    """Exact rational from a parameter.

    Floats are converted through their shortest decimal representation, so a
    value written as 0.8 means 4/5 rather than the nearest binary double.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"parameter must be finite, got {x}")
        return Fraction(str(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as a rational")


# ---------------------------------------------------------------------------
# mixture components


@dataclass(frozen=True)
class AllZero:
    """Point mass on the all-zeros column."""

    kind = KIND_ALL_ZERO
    rate: float = 0.0
    rate_exact: Fraction = Fraction(0)

    def moment(self, s: int, k: int) -> float:
        return 1.0 if s == 0 else 0.0

    def moment_exact(self, s: int, k: int) -> Fraction:
        return Fraction(1 if s == 0 else 0)

    def prob_all_zero(self, k: int, gamma: float = 0.0) -> float:
        return (1.0 - gamma / 2.0) ** k


@dataclass(frozen=True)
class ExactlyOne:
    """Uniform choice of a single hot coordinate."""

    kind = KIND_EXACTLY_ONE
    rate: float = 0.0
    rate_exact: Fraction = Fraction(0)

    def moment(self, s: int, k: int) -> float:
        if s == 0:
            return 1.0
        return 1.0 / k if s == 1 else 0.0

    def moment_exact(self, s: int, k: int) -> Fraction:
        if s == 0:
            return Fraction(1)
        return Fraction(1, k) if s == 1 else Fraction(0)

    def prob_all_zero(self, k: int, gamma: float = 0.0) -> float:
        if gamma == 0.0:
            return 0.0
        # the hot bit must be replaced by a zero; the rest must stay zero
        return (gamma / 2.0) * (1.0 - gamma / 2.0) ** (k - 1)


@dataclass(frozen=True)
class Bernoulli:
    """Independent bits at a common rate."""

    rate: float
    rate_exact: Fraction

    kind = KIND_BERNOULLI

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"bernoulli rate must be in [0, 1], got {self.rate}")

    def moment(self, s: int, k: int) -> float:
        return self.rate ** s

    def moment_exact(self, s: int, k: int) -> Fraction:
        return self.rate_exact ** s

    def prob_all_zero(self, k: int, gamma: float = 0.0) -> float:
        q = (1.0 - gamma) * self.rate + gamma / 2.0
        return (1.0 - q) ** k


def bernoulli(rate: Rational) -> Bernoulli:
    exact = as_fraction(rate)
    return Bernoulli(rate=float(exact), rate_exact=exact)


Component = Union[AllZero, ExactlyOne, Bernoulli]


# ---------------------------------------------------------------------------
# mixtures


@dataclass(frozen=True)
class ColumnMixture:
    """Finite mixture of exchangeable column components over {0,1}^k.

    `weights_exact` carries the rational weights when the mixture came out of
    the exact solver; closed-form identities can then be checked with zero
    rounding error while sampling uses the float weights.
    """

    k: int
    weights: tuple[float, ...]
    components: tuple[Component, ...]
    weights_exact: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"column arity k must be >= 1, got {self.k}")
        if len(self.weights) != len(self.components):
            raise ValueError("weights and components must align")
        if not self.components:
            raise ValueError("mixture needs at least one component")
        for w in self.weights:
            if not (w >= 0.0):
                raise ValueError(f"mixture weight {w} is negative")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {total!r}, expected 1")
        if self.weights_exact is not None:
            if len(self.weights_exact) != len(self.weights):
                raise ValueError("exact weights must align with weights")
            if sum(self.weights_exact) != 1:
                raise ValueError("exact mixture weights must sum to exactly 1")

    def moment_of_size(self, s: int) -> float:
        """E[prod of s distinct coordinates], identical for every such set."""
        if s == 0:
            return 1.0
        return math.fsum(
            w * c.moment(s, self.k) for w, c in zip(self.weights, self.components)
        )

    def moment_of_size_exact(self, s: int) -> Fraction | None:
        if self.weights_exact is None:
            return None
        return sum(
            w * c.moment_exact(s, self.k)
            for w, c in zip(self.weights_exact, self.components)
        )

    def prob_all_zero(self) -> float:
        return math.fsum(
            w * c.prob_all_zero(self.k)
            for w, c in zip(self.weights, self.components)
        )

    def noisy(self, gamma: Rational) -> "NoisySource":
        return NoisySource(base=self, gamma_exact=as_fraction(gamma))

    @cached_property
    def sampler_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        cdf = np.cumsum(np.asarray(self.weights, dtype=np.float64))
        cdf[-1] = 1.0
        kinds = np.asarray([c.kind for c in self.components], dtype=np.uint8)
        rates = np.asarray([c.rate for c in self.components], dtype=np.float64)
        return cdf, kinds, rates


@dataclass(frozen=True)
class NoisySource:
    """A column source passed through per-bit replacement noise.

    Each bit is independently replaced by a uniform bit with probability
    gamma.  Moments follow from the base moments by substituting
    y = (1-gamma) x + gamma/2 per coordinate.
    """

    base: ColumnMixture
    gamma_exact: Fraction

    def __post_init__(self):
        if not 0 <= self.gamma_exact <= 1:
            raise ValueError(f"noise rate must be in [0, 1], got {self.gamma_exact}")

    @property
    def k(self) -> int:
        return self.base.k

    @property
    def gamma(self) -> float:
        return float(self.gamma_exact)

    def moment_of_size(self, s: int) -> float:
        g = self.gamma
        return math.fsum(
            math.comb(s, t)
            * (1.0 - g) ** t
            * (g / 2.0) ** (s - t)
            * self.base.moment_of_size(t)
            for t in range(s + 1)
        )

    def moment_of_size_exact(self, s: int) -> Fraction | None:
        g = self.gamma_exact
        total = Fraction(0)
        for t in range(s + 1):
            base = self.base.moment_of_size_exact(t)
            if base is None:
                return None
            total += math.comb(s, t) * (1 - g) ** t * (g / 2) ** (s - t) * base
        return total

    def prob_all_zero(self) -> float:
        g = self.gamma
        return math.fsum(
            w * c.prob_all_zero(self.k, g)
            for w, c in zip(self.base.weights, self.base.components)
        )


ColumnSource = Union[ColumnMixture, NoisySource]


# ---------------------------------------------------------------------------
# the weight solver


@dataclass(frozen=True)
class WeightSolution:
    """Exact and float solutions of the degree-4 matching system."""

    k: int
    eps: Fraction
    p: Fraction
    b: Fraction
    eps_weights: tuple[Fraction, Fraction, Fraction, Fraction]

    @property
    def eps_floats(self) -> tuple[float, float, float, float]:
        return tuple(float(w) for w in self.eps_weights)

    @property
    def total(self) -> Fraction:
        return sum(self.eps_weights)

    def residuals(self) -> tuple[float, ...]:
        """Float residuals of the four moment equations at the float weights."""
        eps_f = self.eps_floats
        p_f = float(self.p)
        eps = float(self.eps)
        out = []
        for s in range(1, 5):
            lhs = math.fsum(w * ((i + 1) * p_f) ** s for i, w in enumerate(eps_f))
            rhs = math.fsum((eps / 4.0) * ((i + 1) * p_f) ** s for i in range(4))
            if s == 1:
                rhs += (1.0 - eps) / self.k
            out.append(lhs - rhs)
        return tuple(out)


def _numeric_cross_check(k: int, eps: Fraction, p: Fraction,
                         exact: tuple[Fraction, ...]) -> None:
    # independent route: Gaussian elimination on the float Vandermonde system
    rates = [float((i + 1) * p) for i in range(4)]
    a = np.array([[r ** s for r in rates] for s in range(1, 5)], dtype=np.float64)
    rhs = np.array(
        [
            math.fsum((float(eps) / 4.0) * r ** s for r in rates)
            + ((1.0 - float(eps)) / k if s == 1 else 0.0)
            for s in range(1, 5)
        ]
    )
    numeric = np.linalg.solve(a, rhs)
    scale = max(1.0, float(max(abs(w) for w in exact)))
    drift = max(abs(n - float(e)) for n, e in zip(numeric, exact))
    if drift > 1e-6 * scale:
        raise ArithmeticError(
            f"weight solver cross-check failed: exact and numeric routes "
            f"disagree by {drift:.3e}"
        )


def solve_d0_weights(k: int, eps: Rational, p: Rational) -> WeightSolution:
    """Solve for the D0 component weights matching D1 to degree 4.

    Raises FeasibilityError when any weight would be negative (which happens
    exactly when eps*k*p < 12*(1-eps)) or when the weights exceed total mass 1
    (which happens exactly when k*p < 25/12), naming the violated quantity.
    """
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    eps_x = as_fraction(eps)
    p_x = as_fraction(p)
    if not 0 <= eps_x <= 1:
        raise ValueError(f"eps must be in [0, 1], got {eps_x}")
    if not 0 < p_x:
        raise ValueError(f"p must be positive, got {p_x}")
    if 4 * p_x > 1:
        raise ValueError(
            f"p must satisfy 4*p <= 1 so all component rates are valid; got p={p_x}"
        )

    b = (1 - eps_x) / (k * p_x)
    delta = (4 * b, -3 * b, Fraction(4, 3) * b, -b / 4)
    weights = tuple(eps_x / 4 + d for d in delta)

    for i, w in enumerate(weights, start=1):
        if w < 0:
            lhs = eps_x * k * p_x
            rhs = 12 * (1 - eps_x)
            raise FeasibilityError(
                f"eps{i} = {float(w):.6g} < 0: no valid weights at "
                f"(k={k}, eps={float(eps_x):.6g}, p={float(p_x):.6g}); "
                f"feasibility requires eps*k*p >= 12*(1-eps), got "
                f"{float(lhs):.6g} < {float(rhs):.6g}"
            )
    total = sum(weights)
    if total > 1:
        raise FeasibilityError(
            f"sum of eps weights = {float(total):.6g} > 1, leaving the "
            f"all-zero component of D0 with negative mass at "
            f"(k={k}, eps={float(eps_x):.6g}, p={float(p_x):.6g}); "
            f"this requires k*p >= 25/12, got k*p = {float(k * p_x):.6g}"
        )

    solution = WeightSolution(k=k, eps=eps_x, p=p_x, b=b, eps_weights=weights)
    _numeric_cross_check(k, eps_x, p_x, weights)
    return solution


def boundary_eps(k: int, p: Rational) -> Fraction:
    """The smallest feasible eps at (k, p): eps*k*p = 12*(1-eps)."""
    p_x = as_fraction(p)
    return Fraction(12, 1) / (12 + k * p_x)


def asymptotic_eps(k: int) -> float:
    """The k^(-1/2) mixing weight used by the asymptotic completeness bounds."""
    return k ** -0.5


def asymptotic_rate(k: int) -> float:
    """The k^(-1/3) base Bernoulli rate used by the asymptotic analysis."""
    return k ** (-1.0 / 3.0)


def default_noise_rate(k: int) -> float:
    """Noise rate 1/k^2: below one expected replaced bit per column."""
    return 1.0 / (k * k)


def build_pair(k: int, eps: Rational, p: Rational) -> tuple[ColumnMixture, ColumnMixture]:
    """Construct the moment-matched pair (D0, D1) at (k, eps, p).

    D1 = (1-eps) ExactlyOne + sum_i (eps/4) Bernoulli(i*p)
    D0 = (1-sum eps_i) AllZero + sum_i eps_i Bernoulli(i*p)
    """
    sol = solve_d0_weights(k, eps, p)
    rates = [(i + 1) * sol.p for i in range(4)]
    bern = tuple(bernoulli(r) for r in rates)

    d1_exact = (1 - sol.eps,) + tuple(sol.eps / 4 for _ in range(4))
    d1 = ColumnMixture(
        k=k,
        weights=tuple(float(w) for w in d1_exact),
        components=(ExactlyOne(),) + bern,
        weights_exact=d1_exact,
    )
    d0_exact = (1 - sol.total,) + sol.eps_weights
    d0 = ColumnMixture(
        k=k,
        weights=tuple(float(w) for w in d0_exact),
        components=(AllZero(),) + bern,
        weights_exact=d0_exact,
    )
    gap = moment_gap(d0, d1, 4)
    if gap > 1e-9:
        raise ArithmeticError(f"constructed pair has moment gap {gap:.3e}")
    return d0, d1


def completeness_pair(k: int, eps: Rational, p: Rational) -> tuple[ColumnMixture, ColumnMixture]:
    """One-sided pair for completeness-only experiments.

    D0 is the all-zeros point mass and D1 the usual positive mixture.  No
    degree-4 matching holds (or is possible for k*p < 25/12); acceptance
    closed forms remain valid.
    """
    eps_x = as_fraction(eps)
    p_x = as_fraction(p)
    if not 0 <= eps_x <= 1:
        raise ValueError(f"eps must be in [0, 1], got {eps_x}")
    if not 0 < 4 * p_x <= 1:
        raise ValueError(f"p must satisfy 0 < 4*p <= 1, got {p_x}")
    bern = tuple(bernoulli((i + 1) * p_x) for i in range(4))
    d1_exact = (1 - eps_x,) + tuple(eps_x / 4 for _ in range(4))
    d1 = ColumnMixture(
        k=k,
        weights=tuple(float(w) for w in d1_exact),
        components=(ExactlyOne(),) + bern,
        weights_exact=d1_exact,
    )
    d0 = ColumnMixture(
        k=k,
        weights=(1.0,),
        components=(AllZero(),),
        weights_exact=(Fraction(1),),
    )
    return d0, d1


# ---------------------------------------------------------------------------
# closed-form moment queries


def _distinct_coords(dist: ColumnSource, coords: Iterable[int]) -> frozenset[int]:
    out = set()
    for c in coords:
        if not isinstance(c, (int, np.integer)):
            raise TypeError(f"coordinate {c!r} is not an integer")
        if not 0 <= c < dist.k:
            raise ValueError(
                f"coordinate {c} out of range [0, {dist.k}) for this source"
            )
        out.add(int(c))
    return frozenset(out)


def exact_moment(dist: ColumnSource, coords: Iterable[int]) -> float:
    """E[prod_{i in coords} x_i] in closed form; repeats collapse (bits are 0/1)."""
    return dist.moment_of_size(len(_distinct_coords(dist, coords)))


def exact_moment_rational(dist: ColumnSource, coords: Iterable[int]) -> Fraction | None:
    """Exact-rational moment when the source carries exact weights."""
    return dist.moment_of_size_exact(len(_distinct_coords(dist, coords)))


def moment_gap(d0: ColumnSource, d1: ColumnSource, degree: int) -> float:
    """max_{1<=s<=degree} |E_D0 - E_D1| over s distinct coordinates."""
    if d0.k != d1.k:
        raise ValueError(f"sources have different arity: {d0.k} vs {d1.k}")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if degree > d0.k:
        raise ValueError(f"degree {degree} exceeds arity {d0.k}")
    return max(
        abs(d0.moment_of_size(s) - d1.moment_of_size(s))
        for s in range(1, degree + 1)
    )


def conditional_moment(
    dist: ColumnSource, coords: Iterable[int], j: int, c: int
) -> float:
    """E[prod_{i in coords} x_i | x_j = c] in closed form.

    c=1 reduces to a ratio of plain moments; c=0 goes through the complement
    identity E[f * (1-x_j)] = E[f] - E[f * x_j].
    """
    if c not in (0, 1):
        raise ValueError(f"conditioned value must be 0 or 1, got {c}")
    s = _distinct_coords(dist, coords)
    su = s | _distinct_coords(dist, [j])
    m1 = dist.moment_of_size(1)
    if c == 1:
        denom = m1
        num = dist.moment_of_size(len(su))
    else:
        denom = 1.0 - m1
        num = dist.moment_of_size(len(s)) - dist.moment_of_size(len(su))
    if denom <= 0.0:
        raise ValueError(
            f"conditioning event x_{j}={c} has probability {denom!r}, cannot condition"
        )
    return num / denom


def prob_all_zero(dist: ColumnSource) -> float:
    """P[column is all zeros] in closed form."""
    return dist.prob_all_zero()


# ---------------------------------------------------------------------------
# enumeration oracle


def _popcounts(n_patterns: int) -> np.ndarray:
    return np.bitwise_count(np.arange(n_patterns, dtype=np.uint64)).astype(np.int64)


def enum_pmf(dist: ColumnSource) -> np.ndarray:
    """Full pmf over all 2^k columns by direct enumeration (k <= 20).

    Independent of the closed forms: component pmfs are assembled pointwise
    and noise is applied as an explicit per-bit transfer.
    """
    if isinstance(dist, NoisySource):
        base = enum_pmf(dist.base)
        g = dist.gamma
        m = np.array(
            [[1.0 - g / 2.0, g / 2.0], [g / 2.0, 1.0 - g / 2.0]], dtype=np.float64
        )
        pmf = base.reshape((2,) * dist.k)
        for _ in range(dist.k):
            pmf = np.tensordot(pmf, m, axes=([0], [1]))
        return pmf.reshape(-1)

    k = dist.k
    if k > ENUM_GUARD_K:
        raise GuardError(
            f"enumeration over 2^{k} columns exceeds the 2^{ENUM_GUARD_K} guard"
        )
    n = 1 << k
    pop = _popcounts(n)
    pmf = np.zeros(n, dtype=np.float64)
    for w, comp in zip(dist.weights, dist.components):
        if comp.kind == KIND_ALL_ZERO:
            pmf[0] += w
        elif comp.kind == KIND_EXACTLY_ONE:
            for i in range(k):
                pmf[1 << i] += w / k
        else:
            q = comp.rate
            if q == 0.0:
                pmf[0] += w
            elif q == 1.0:
                pmf[n - 1] += w
            else:
                pmf += w * np.exp(
                    pop * math.log(q) + (k - pop) * math.log1p(-q)
                )
    return pmf


def enum_oracle_moment(dist: ColumnSource, coords: Iterable[int]) -> float:
    """Brute-force E[prod x_i] over all 2^k points; the closed forms' oracle."""
    s = _distinct_coords(dist, coords)
    pmf = enum_pmf(dist)
    mask = 0
    for i in s:
        mask |= 1 << i
    idx = np.arange(pmf.size, dtype=np.uint64)
    hit = (idx & np.uint64(mask)) == np.uint64(mask)
    return float(pmf[hit].sum())


def marginal_pmf(dist: ColumnSource, m: int) -> np.ndarray:
    """pmf of the first m coordinates (the sources are exchangeable).

    Pattern index encodes coordinate i at bit i.
    """
    if not 1 <= m <= dist.k:
        raise ValueError(f"marginal size must be in [1, {dist.k}], got {m}")
    if m > ENUM_GUARD_K:
        raise GuardError(f"marginal over 2^{m} patterns exceeds the guard")
    if isinstance(dist, NoisySource):
        base = marginal_pmf(dist.base, m)
        g = dist.gamma
        t = np.array(
            [[1.0 - g / 2.0, g / 2.0], [g / 2.0, 1.0 - g / 2.0]], dtype=np.float64
        )
        pmf = base.reshape((2,) * m)
        for _ in range(m):
            pmf = np.tensordot(pmf, t, axes=([0], [1]))
        return pmf.reshape(-1)

    k = dist.k
    n = 1 << m
    pop = _popcounts(n)
    pmf = np.zeros(n, dtype=np.float64)
    for w, comp in zip(dist.weights, dist.components):
        if comp.kind == KIND_ALL_ZERO:
            pmf[0] += w
        elif comp.kind == KIND_EXACTLY_ONE:
            pmf[0] += w * (k - m) / k
            for i in range(m):
                pmf[1 << i] += w / k
        else:
            q = comp.rate
            if q == 0.0:
                pmf[0] += w
            elif q == 1.0:
                pmf[n - 1] += w
            else:
                pmf += w * np.exp(pop * math.log(q) + (m - pop) * math.log1p(-q))
    return pmf


def marginal_pmf_rational(dist: ColumnSource, m: int) -> list[Fraction] | None:
    """Exact-rational marginal pmf; None when exact weights are unavailable."""
    if not 1 <= m <= dist.k:
        raise ValueError(f"marginal size must be in [1, {dist.k}], got {m}")
    if m > 16:
        raise GuardError("exact marginal limited to m <= 16")
    if isinstance(dist, NoisySource):
        base = marginal_pmf_rational(dist.base, m)
        if base is None:
            return None
        g = dist.gamma_exact
        stay, flip = 1 - g / 2, g / 2
        pmf = base
        # symmetric channel: each bit keeps its value w.p. 1 - g/2
        for bit in range(m):
            nxt = [Fraction(0)] * len(pmf)
            step = 1 << bit
            for idx, mass in enumerate(pmf):
                if not mass:
                    continue
                nxt[idx] += mass * stay
                nxt[idx ^ step] += mass * flip
            pmf = nxt
        return pmf

    if dist.weights_exact is None:
        return None
    k = dist.k
    n = 1 << m
    pmf = [Fraction(0)] * n
    for w, comp in zip(dist.weights_exact, dist.components):
        if comp.kind == KIND_ALL_ZERO:
            pmf[0] += w
        elif comp.kind == KIND_EXACTLY_ONE:
            pmf[0] += w * Fraction(k - m, k)
            for i in range(m):
                pmf[1 << i] += w * Fraction(1, k)
        else:
            q = comp.rate_exact
            for idx in range(n):
                pop = bin(idx).count("1")
                pmf[idx] += w * q ** pop * (1 - q) ** (m - pop)
    return pmf


# ---------------------------------------------------------------------------
# column-sum distribution (for exact acceptance analysis of weight-uniform
# halfspaces)


def _binom_pmf(n: int, q: float) -> np.ndarray:
    if q <= 0.0:
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    if q >= 1.0:
        out = np.zeros(n + 1)
        out[n] = 1.0
        return out
    j = np.arange(n + 1, dtype=np.float64)
    log_c = (
        math.lgamma(n + 1)
        - np.vectorize(math.lgamma)(j + 1)
        - np.vectorize(math.lgamma)(n - j + 1)
    )
    return np.exp(log_c + j * math.log(q) + (n - j) * math.log1p(-q))


def column_sum_pmf(dist: ColumnSource) -> np.ndarray:
    """Exact pmf of the number of ones in one column (length k+1)."""
    if isinstance(dist, NoisySource):
        k = dist.k
        g = dist.gamma
        pmf = np.zeros(k + 1, dtype=np.float64)
        for w, comp in zip(dist.base.weights, dist.base.components):
            if comp.kind == KIND_ALL_ZERO:
                pmf += w * _binom_pmf(k, g / 2.0)
            elif comp.kind == KIND_EXACTLY_ONE:
                rest = _binom_pmf(k - 1, g / 2.0)
                hot = np.array([g / 2.0, 1.0 - g / 2.0])
                pmf += w * np.convolve(rest, hot)
            else:
                q = (1.0 - g) * comp.rate + g / 2.0
                pmf += w * _binom_pmf(k, q)
        return pmf

    k = dist.k
    pmf = np.zeros(k + 1, dtype=np.float64)
    for w, comp in zip(dist.weights, dist.components):
        if comp.kind == KIND_ALL_ZERO:
            pmf[0] += w
        elif comp.kind == KIND_EXACTLY_ONE:
            pmf[1] += w
        else:
            pmf += w * _binom_pmf(k, comp.rate)
    return pmf


# ---------------------------------------------------------------------------
# sampling


def sample_column(dist: ColumnSource, rng: CursorRng) -> np.ndarray:
    """One column as a uint8 array, consuming the cursor sequentially."""
    if isinstance(dist, NoisySource):
        col = sample_column(dist.base, rng)
        g = dist.gamma
        if g > 0.0:
            mask = rng.uniforms(dist.k) < g
            vals = rng.uniforms(dist.k) < 0.5
            col = np.where(mask, vals.astype(np.uint8), col)
        return col

    cdf, kinds, rates = dist.sampler_tables
    comp = int(np.searchsorted(cdf, rng.uniform(), side="right"))
    comp = min(comp, len(kinds) - 1)
    col = np.zeros(dist.k, dtype=np.uint8)
    if kinds[comp] == KIND_EXACTLY_ONE:
        col[rng.randint(dist.k)] = 1
    elif kinds[comp] == KIND_BERNOULLI:
        col = (rng.uniforms(dist.k) < rates[comp]).astype(np.uint8)
    return col


_COLUMN_BLOCK_EXTRA = 2  # component word + hot word


def column_block_size(k: int, noisy: bool) -> int:
    """Counter words reserved per sampled column."""
    return _COLUMN_BLOCK_EXTRA + k + (k if noisy else 0)


def sample_columns(
    dist: ColumnSource,
    master_seed: int,
    stream_id: int,
    start: int,
    count: int,
) -> np.ndarray:
    """Batch of columns (count, k) addressed by absolute column index.

    Column n owns the counter block [n*B, (n+1)*B) with B = column_block_size;
    the result is independent of batch boundaries.
    """
    return sample_columns_at(
        dist,
        master_seed,
        stream_id,
        np.arange(start, start + count, dtype=np.uint64),
    )


def sample_columns_at(
    dist: ColumnSource,
    master_seed: int,
    stream_id: int,
    columns: np.ndarray,
) -> np.ndarray:
    """Columns for an explicit array of absolute column indices.

    Each index owns its fixed counter block, so interleaving calls for
    disjoint index sets (different mixtures per example row, say) still
    reproduces the same bits per index.
    """
    noisy = isinstance(dist, NoisySource)
    base_mix = dist.base if noisy else dist
    k = base_mix.k
    block = column_block_size(k, noisy)
    columns = np.asarray(columns, dtype=np.uint64)
    count = columns.size
    idx = columns * np.uint64(block)

    cdf, kinds, rates = base_mix.sampler_tables
    u = words_to_uniforms(rng_words(master_seed, stream_id, idx))
    comp = np.minimum(np.searchsorted(cdf, u, side="right"), len(kinds) - 1)
    kind_arr = kinds[comp]
    rate_arr = rates[comp]

    cols = np.zeros((count, k), dtype=np.uint8)

    hot_rows = np.flatnonzero(kind_arr == KIND_EXACTLY_ONE)
    if hot_rows.size:
        hw = words_to_uniforms(
            rng_words(master_seed, stream_id, idx[hot_rows] + np.uint64(1))
        )
        hot = np.minimum((hw * k).astype(np.int64), k - 1)
        cols[hot_rows, hot] = 1

    bern_rows = np.flatnonzero(kind_arr == KIND_BERNOULLI)
    if bern_rows.size:
        widx = idx[bern_rows, None] + np.uint64(2) + np.arange(k, dtype=np.uint64)[None, :]
        bu = words_to_uniforms(rng_words(master_seed, stream_id, widx.reshape(-1)))
        bits = bu.reshape(bern_rows.size, k) < rate_arr[bern_rows, None]
        cols[bern_rows] = bits.astype(np.uint8)

    if noisy and dist.gamma > 0.0:
        g = dist.gamma
        widx = idx[:, None] + np.uint64(2 + k) + np.arange(k, dtype=np.uint64)[None, :]
        w = rng_words(master_seed, stream_id, widx.reshape(-1)).reshape(count, k)
        mask = words_to_uniforms(w) < g
        vals = (w & np.uint64(1)).astype(np.uint8)
        cols = np.where(mask, vals, cols)
    return cols


def noise_block_size(length: int) -> int:
    """Counter words reserved per example for replacement noise over `length` bits."""
    return length + 2


def apply_noise(
    bits: np.ndarray,
    gamma: float,
    master_seed: int,
    stream_id: int,
    start: int,
) -> np.ndarray:
    """Per-bit replacement noise over rows of a (count, L) bit array.

    Row r (absolute example index start + r) owns the counter block
    [(start+r)*(L+2), ...).  For sparse noise the replaced positions are
    walked by exact geometric gaps, consuming one word per replacement; each
    word's low bit supplies the replacement value and its top 53 bits the
    gap uniform, so the channel is exactly the independent per-bit one.
    Dense rates use one word per bit.  The path depends only on gamma, so
    equal parameters give identical output regardless of batching.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 2:
        raise ValueError("apply_noise expects a (count, length) bit array")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"noise rate must be in [0, 1], got {gamma}")
    count, length = bits.shape
    out = bits.copy()
    if gamma == 0.0 or length == 0 or count == 0:
        return out

    block = np.uint64(noise_block_size(length))
    base = (np.arange(start, start + count, dtype=np.uint64)) * block

    if gamma >= _DENSE_NOISE_THRESHOLD:
        widx = base[:, None] + np.arange(length, dtype=np.uint64)[None, :]
        w = rng_words(master_seed, stream_id, widx.reshape(-1)).reshape(count, length)
        mask = words_to_uniforms(w) < gamma
        vals = (w & np.uint64(1)).astype(np.uint8)
        return np.where(mask, vals, out)

    inv_log = 1.0 / math.log1p(-gamma)
    pos = np.full(count, -1, dtype=np.int64)
    slot = np.zeros(count, dtype=np.uint64)
    active = np.arange(count)
    while active.size:
        w = rng_words(master_seed, stream_id, base[active] + slot[active])
        u = words_to_open_uniforms(w)
        gap = np.floor(np.log(u) * inv_log).astype(np.int64)
        pos[active] += gap + 1
        slot[active] += np.uint64(1)
        vals = (w & np.uint64(1)).astype(np.uint8)
        alive = pos[active] < length
        rows = active[alive]
        out[rows, pos[rows]] = vals[alive]
        active = rows
    return out


def sample_frequencies(
    dist: ColumnSource,
    coords: Sequence[int],
    trials: int,
    master_seed: int,
    stream_id: int,
) -> float:
    """Empirical E[prod_{i in coords} x_i] over `trials` sampled columns."""
    s = sorted(_distinct_coords(dist, coords))
    total = 0
    chunk = max(1, min(trials, 1 << 16))
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        cols = sample_columns(dist, master_seed, stream_id, done, n)
        sel = cols[:, s] if s else np.ones((n, 1), dtype=np.uint8)
        total += int(sel.all(axis=1).sum())
        done += n
    return total / trials
