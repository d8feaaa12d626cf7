"""Gadget column mixtures: weight solving, moment matching, enumeration oracles."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glhs.moments import (
    AllZero,
    Bernoulli,
    ColumnMixture,
    ExactlyOne,
    FeasibilityError,
    apply_noise,
    as_fraction,
    bernoulli,
    boundary_eps,
    build_pair,
    column_block_size,
    column_sum_pmf,
    completeness_pair,
    conditional_moment,
    enum_oracle_moment,
    enum_pmf,
    exact_moment,
    exact_moment_rational,
    marginal_pmf,
    moment_gap,
    noise_block_size,
    prob_all_zero,
    sample_columns,
    sample_columns_at,
    solve_d0_weights,
)

# a comfortably feasible small case reused across tests
K, EPS, P = 12, "0.82", "0.25"


def _fraction_solve(aug):
    """Gaussian elimination over Fractions; aug is n x (n+1)."""
    n = len(aug)
    m = [row[:] for row in aug]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        inv = Fraction(1, 1) / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


class TestFractions:
    def test_decimal_strings_and_floats_mean_the_decimal(self):
        assert as_fraction("0.1") == Fraction(1, 10)
        assert as_fraction(0.1) == Fraction(1, 10)
        assert as_fraction("3/4") == Fraction(3, 4)
        assert as_fraction(Fraction(2, 7)) == Fraction(2, 7)
        assert as_fraction(3) == Fraction(3)


class TestComponents:
    def test_component_moments(self):
        k = 10
        assert AllZero().moment_exact(2, k) == 0
        assert ExactlyOne().moment_exact(1, k) == Fraction(1, k)
        assert ExactlyOne().moment_exact(2, k) == 0
        q = Fraction(1, 3)
        assert bernoulli(q).moment_exact(3, k) == q**3

    def test_component_all_zero(self):
        k = 6
        assert AllZero().prob_all_zero(k) == 1.0
        assert ExactlyOne().prob_all_zero(k) == 0.0
        assert bernoulli("0.25").prob_all_zero(k) == pytest.approx(0.75**k)

    def test_bernoulli_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            bernoulli("1.5")


class TestWeightSolver:
    def test_weights_match_an_independent_linear_solve(self):
        sol = solve_d0_weights(K, EPS, P)
        eps, p = sol.eps, sol.p
        # the delta system: sum_i delta_i (i p)^s = (1-eps)/k for s=1, else 0
        aug = [
            [((i + 1) * p) ** s for i in range(4)]
            + [Fraction(1 - eps, K) if s == 1 else Fraction(0)]
            for s in range(1, 5)
        ]
        deltas = _fraction_solve(aug)
        for i, d in enumerate(deltas):
            assert sol.eps_weights[i] == eps / 4 + d

    def test_closed_form_deltas(self):
        sol = solve_d0_weights(K, EPS, P)
        b = sol.b
        assert b == (1 - sol.eps) / (K * sol.p)
        expected = (4 * b, -3 * b, 4 * b / 3, -b / 4)
        for got, want in zip(sol.eps_weights, expected):
            assert got - sol.eps / 4 == want

    def test_residuals_vanish(self):
        sol = solve_d0_weights(K, EPS, P)
        assert max(abs(r) for r in sol.residuals()) <= 1e-12

    def test_boundary_eps_zeroes_the_second_weight(self):
        p = Fraction(1, 4)
        eps_star = boundary_eps(K, p)
        assert eps_star == Fraction(12, 12) / (1 + K * p / 12)
        sol = solve_d0_weights(K, eps_star, p)
        assert sol.eps_weights[1] == 0
        assert min(sol.eps_weights) == 0

    def test_below_boundary_is_infeasible(self):
        with pytest.raises(FeasibilityError, match=r"12\*\(1-eps\)"):
            solve_d0_weights(64, "0.125", "0.25")
        with pytest.raises(FeasibilityError, match="eps2"):
            solve_d0_weights(64, "0.125", "0.25")

    def test_small_kp_is_infeasible_even_with_large_eps(self):
        # first constraint holds (0.95 >= 0.6) but the weights cannot sum to <= 1
        with pytest.raises(FeasibilityError, match="25/12"):
            solve_d0_weights(4, "0.95", "0.25")

    @given(
        st.integers(10, 200),
        st.fractions(min_value="1/100", max_value="1/4"),
    )
    @settings(max_examples=60, deadline=None)
    def test_any_feasible_point_solves_and_matches(self, k, p):
        eps = boundary_eps(k, p)
        if eps + (1 - eps) / 8 > 1 or k * p < Fraction(25, 12):
            return
        eps = eps + (1 - eps) / 8  # strictly inside the feasible region
        sol = solve_d0_weights(k, eps, p)
        assert all(w >= 0 for w in sol.eps_weights)
        assert sol.total <= 1
        d0, d1 = build_pair(k, eps, p)
        for s in range(1, 5):
            assert d0.moment_of_size_exact(s) == d1.moment_of_size_exact(s)


class TestMomentMatching:
    def test_pair_moments_match_exactly_through_degree_four(self):
        d0, d1 = build_pair(K, EPS, P)
        for s in range(1, 5):
            assert d0.moment_of_size_exact(s) == d1.moment_of_size_exact(s)
        assert moment_gap(d0, d1, 4) <= 1e-12  # float channel roundoff only

    def test_fifth_moment_splits_by_exactly_24_b_p5(self):
        sol = solve_d0_weights(K, EPS, P)
        d0, d1 = build_pair(K, EPS, P)
        gap5 = d1.moment_of_size_exact(5) - d0.moment_of_size_exact(5)
        assert gap5 == 24 * sol.b * sol.p**5

    def test_noisy_moments_still_match(self):
        d0, d1 = build_pair(K, EPS, P)
        g = Fraction(1, 144)
        n0, n1 = d0.noisy(g), d1.noisy(g)
        for s in range(1, 5):
            assert n0.moment_of_size_exact(s) == n1.moment_of_size_exact(s)

    def test_enumeration_oracle_agrees_with_closed_forms(self):
        d0, d1 = build_pair(K, EPS, P)
        for dist in (d0, d1, d1.noisy(Fraction(1, 16))):
            for coords in [(0,), (1, 5), (0, 3, 7), (2, 4, 8, 11)]:
                assert enum_oracle_moment(dist, coords) == pytest.approx(
                    exact_moment(dist, coords), abs=1e-12
                )

    def test_moments_are_exchangeable(self):
        _, d1 = build_pair(K, EPS, P)
        assert exact_moment_rational(d1, (0, 1, 2)) == exact_moment_rational(d1, (9, 4, 11))

    def test_conditional_moment_oracle(self):
        # E[x_0 x_1 | x_2 = 1] via enumeration
        _, d1 = build_pair(K, EPS, P)
        pmf = enum_pmf(d1)
        patt = np.arange(pmf.size)
        on2 = (patt >> 2) & 1 == 1
        both = ((patt >> 0) & 1 == 1) & ((patt >> 1) & 1 == 1)
        want = pmf[on2 & both].sum() / pmf[on2].sum()
        assert conditional_moment(d1, (0, 1), 2, 1) == pytest.approx(want, abs=1e-12)


class TestDistributionShapes:
    def test_pmf_sums_to_one(self):
        d0, d1 = build_pair(K, EPS, P)
        for dist in (d0, d1, d0.noisy(Fraction(1, 9))):
            pmf = enum_pmf(dist)
            assert pmf.size == 2**K
            assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
            assert pmf.min() >= 0

    def test_prob_all_zero_closed_form(self):
        d0, d1 = build_pair(K, EPS, P)
        for dist in (d0, d1, d1.noisy(Fraction(1, 31))):
            assert prob_all_zero(dist) == pytest.approx(enum_pmf(dist)[0], abs=1e-12)

    def test_marginal_pmf_from_component_marginals(self):
        # exchangeable mixture: hand-build the m-coordinate marginal per component
        m = 3
        d0, d1 = build_pair(K, EPS, P)
        for dist in (d0, d1):
            got = marginal_pmf(dist, m)
            want = np.zeros(2**m)
            for w, comp in zip(dist.weights, dist.components):
                for patt in range(2**m):
                    ones = bin(patt).count("1")
                    if isinstance(comp, AllZero):
                        prob = 1.0 if ones == 0 else 0.0
                    elif isinstance(comp, ExactlyOne):
                        if ones == 0:
                            prob = (K - m) / K
                        elif ones == 1:
                            prob = 1 / K
                        else:
                            prob = 0.0
                    else:
                        q = float(comp.rate)
                        prob = q**ones * (1 - q) ** (m - ones)
                    want[patt] += w * prob
            assert np.allclose(got, want, atol=1e-12)

    def test_column_sum_pmf_against_enumeration(self):
        d0, _ = build_pair(K, EPS, P)
        pmf = enum_pmf(d0)
        pop = np.array([bin(i).count("1") for i in range(pmf.size)])
        want = np.bincount(pop, weights=pmf, minlength=K + 1)
        assert np.allclose(column_sum_pmf(d0), want, atol=1e-12)

    def test_completeness_pair_is_one_sided(self):
        d0, d1 = completeness_pair(3, "0.8", "0.25")
        assert prob_all_zero(d0) == 1.0
        assert d0.moment_of_size_exact(1) == 0
        assert d1.moment_of_size_exact(1) > 0
        # no matching claim: gap at degree 1 is the full D1 mean
        assert moment_gap(d0, d1, 1) == pytest.approx(float(d1.moment_of_size_exact(1)))


class TestSampling:
    def test_batching_does_not_change_bits(self):
        d0, _ = build_pair(K, EPS, P)
        whole = sample_columns(d0, 99, 5, 0, 32)
        parts = np.concatenate(
            [sample_columns(d0, 99, 5, 0, 10), sample_columns(d0, 99, 5, 10, 22)]
        )
        assert np.array_equal(whole, parts)

    def test_explicit_indices_are_position_free(self):
        _, d1 = build_pair(K, EPS, P)
        cols = np.array([3, 17, 4, 3], dtype=np.uint64)
        got = sample_columns_at(d1, 99, 5, cols)
        ref = sample_columns(d1, 99, 5, 0, 18)
        assert np.array_equal(got, ref[[3, 17, 4, 3]])

    def test_reruns_are_byte_identical(self):
        _, d1 = build_pair(K, EPS, P)
        a = sample_columns(d1.noisy(Fraction(1, 50)), 7, 1, 0, 64)
        b = sample_columns(d1.noisy(Fraction(1, 50)), 7, 1, 0, 64)
        assert np.array_equal(a, b)

    def test_empirical_moments_track_closed_forms(self):
        d0, d1 = build_pair(K, EPS, P)
        n = 40000
        for dist in (d0, d1):
            cols = sample_columns(dist, 1234, 2, 0, n)
            mean_rate = cols.mean()
            m1 = dist.moment_of_size(1)
            sigma = math.sqrt(m1 * (1 - m1) / (n * K))  # correlated bits: generous anyway
            assert abs(mean_rate - m1) <= 6 * sigma + 1e-3
            zero_rate = (cols.sum(axis=1) == 0).mean()
            pz = prob_all_zero(dist)
            assert abs(zero_rate - pz) <= 4 * math.sqrt(pz * (1 - pz) / n) + 1e-3

    def test_exactly_one_component_shows_up_as_unit_rows(self):
        d0, d1 = build_pair(K, EPS, P)
        cols1 = sample_columns(d1, 77, 3, 0, 4000)
        cols0 = sample_columns(d0, 77, 4, 0, 4000)
        ones1 = (cols1.sum(axis=1) == 1).mean()
        ones0 = (cols0.sum(axis=1) == 1).mean()
        # D1 places (1-eps) directly on one-hot columns, D0 only binomial mass
        p1 = sum(
            w * (float(c.rate) ** 1 * (1 - float(c.rate)) ** (K - 1) * K if isinstance(c, Bernoulli) else 1.0 if isinstance(c, ExactlyOne) else 0.0)
            for w, c in zip(d1.weights, d1.components)
        )
        p0 = sum(
            w * (float(c.rate) ** 1 * (1 - float(c.rate)) ** (K - 1) * K if isinstance(c, Bernoulli) else 0.0)
            for w, c in zip(d0.weights, d0.components)
        )
        assert abs(ones1 - p1) <= 4 * math.sqrt(p1 * (1 - p1) / 4000)
        assert abs(ones0 - p0) <= 4 * math.sqrt(p0 * (1 - p0) / 4000)

    def test_noisy_sampling_matches_noisy_closed_form(self):
        _, d1 = build_pair(K, EPS, P)
        noisy = d1.noisy(Fraction(1, 8))
        n = 40000
        cols = sample_columns(noisy, 314, 6, 0, n)
        zero_rate = (cols.sum(axis=1) == 0).mean()
        pz = prob_all_zero(noisy)
        assert abs(zero_rate - pz) <= 4 * math.sqrt(pz * (1 - pz) / n)


class TestNoiseChannel:
    def test_dense_and_sparse_paths_hit_the_rate(self):
        n, length = 3000, 64
        zeros = np.zeros((n, length), dtype=np.uint8)
        for gamma in (0.5, 0.01):
            out = apply_noise(zeros, gamma, 11, 0, 0)
            rate = out.mean()
            sigma = math.sqrt(gamma / 2 * (1 - gamma / 2) / (n * length))
            assert abs(rate - gamma / 2) <= 5 * sigma

    def test_noise_is_per_row_addressed(self):
        rng = np.random.default_rng(0)
        bits = rng.integers(0, 2, size=(10, 40), dtype=np.uint8)
        whole = apply_noise(bits, 0.02, 5, 1, 0)
        parts = np.concatenate(
            [apply_noise(bits[:4], 0.02, 5, 1, 0), apply_noise(bits[4:], 0.02, 5, 1, 4)]
        )
        assert np.array_equal(whole, parts)

    def test_zero_noise_is_identity(self):
        bits = np.ones((4, 9), dtype=np.uint8)
        assert np.array_equal(apply_noise(bits, 0.0, 1, 1, 0), bits)

    def test_replacement_channel_is_input_independent_where_hit(self):
        # the same (seed, stream, row) positions are replaced regardless of input
        ones = np.ones((200, 50), dtype=np.uint8)
        zeros = np.zeros((200, 50), dtype=np.uint8)
        a = apply_noise(ones, 0.03, 9, 2, 0)
        b = apply_noise(zeros, 0.03, 9, 2, 0)
        hit_a = a != ones
        hit_b = b != zeros
        # a replacement writes a uniform bit: flip shows only half the hits,
        # but a flip in one input must be a replaced slot in the other
        assert (hit_a & hit_b).sum() == 0  # same slot cannot flip both 1->0 and 0->1

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            apply_noise(np.zeros((2, 2), dtype=np.uint8), 1.5, 0, 0, 0)
        with pytest.raises(ValueError):
            apply_noise(np.zeros(4, dtype=np.uint8), 0.1, 0, 0, 0)

    def test_block_sizes(self):
        assert column_block_size(K, noisy=False) == K + 2
        assert column_block_size(K, noisy=True) == 2 * K + 2
        assert noise_block_size(100) == 102
