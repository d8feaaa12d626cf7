"""Ensemble invariance: matched families, smooth test functions, hybrid swaps."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from glhs.core import GuardError
from glhs.moments import build_pair, solve_d0_weights
from glhs.invariance import (
    C_PHI,
    QUARTIC,
    Ensemble,
    PolyPsi,
    conditioned_marginal_ensemble,
    ensemble_from_pmf,
    expect_psi,
    family,
    first_moment_mismatch,
    hybrid_steps,
    invariance_gap,
    invariance_gap_exact,
    linear_form_distribution,
    matching_moments,
    mixture_marginal_ensemble,
    sgn_gap_bound,
    smooth_sign,
    spread_function,
    sum_l1_fourth,
    window_mass,
)

K, EPS, P = 12, "0.82", "0.25"


def _matched_families(m, r, exact=False):
    d0, d1 = build_pair(K, EPS, P)
    e0 = mixture_marginal_ensemble(d0, m, exact=exact)
    e1 = mixture_marginal_ensemble(d1, m, exact=exact)
    return family(*([e0] * r)), family(*([e1] * r))


class TestEnsemble:
    def test_moment_by_hand(self):
        ens = Ensemble(
            vars_count=2,
            support=((Fraction(1, 4), (0, 1)), (Fraction(3, 4), (1, 1))),
        )
        assert ens.moment((0,)) == Fraction(3, 4)
        assert ens.moment((0, 1)) == Fraction(3, 4)
        assert ens.moment((1, 1)) == Fraction(1)
        assert ens.exact

    def test_float_path(self):
        ens = Ensemble(vars_count=1, support=((0.5, (0.0,)), (0.5, (1.0,))))
        assert not ens.exact
        assert ens.moment((0,)) == pytest.approx(0.5)

    def test_validation(self):
        with pytest.raises(ValueError, match="sum"):
            Ensemble(vars_count=1, support=((0.5, (1,)),))
        with pytest.raises(ValueError, match="values"):
            Ensemble(vars_count=2, support=((1, (1,)),))
        with pytest.raises(ValueError, match="bounded"):
            Ensemble(vars_count=1, support=((1, (2,)),))
        with pytest.raises(ValueError, match="out of range"):
            Ensemble(vars_count=1, support=((1, (1,)),)).moment((1,))

    def test_mismatch_found_at_the_right_degree(self):
        # same mean and second moment, different third moment
        a = Ensemble(
            vars_count=1,
            support=((Fraction(1, 2), (-1,)), (Fraction(1, 2), (1,))),
        )
        b = Ensemble(
            vars_count=1,
            support=(
                (Fraction(1, 8), (-1,)),
                (Fraction(3, 4), (0,)),
                (Fraction(1, 8), (1,)),
            ),
        )
        # E = 0 both; E^2: 1 vs 1/4 -> degree 2 mismatch
        assert first_moment_mismatch(a, b, 3) == (0, 0)
        assert matching_moments(a, b, 1)
        assert not matching_moments(a, b, 2)


class TestMarginalEnsembles:
    def test_pmf_bit_convention(self):
        # index 2 = binary 10 = (x0, x1) = (0, 1)
        pmf = [Fraction(0), Fraction(0), Fraction(1), Fraction(0)]
        ens = ensemble_from_pmf(pmf, 2)
        assert ens.moment((0,)) == 0
        assert ens.moment((1,)) == 1

    def test_marginal_matches_distinct_coordinate_moments(self):
        from glhs.moments import exact_moment_rational

        d0, d1 = build_pair(K, EPS, P)
        for dist in (d0, d1):
            ens = mixture_marginal_ensemble(dist, 4, exact=True)
            for size in (1, 2, 3, 4):
                coords = tuple(range(size))
                assert ens.moment(coords) == exact_moment_rational(dist, coords)

    def test_matched_pair_gives_degree_four_matched_ensembles(self):
        d0, d1 = build_pair(K, EPS, P)
        e0 = mixture_marginal_ensemble(d0, 4, exact=True)
        e1 = mixture_marginal_ensemble(d1, 4, exact=True)
        assert first_moment_mismatch(e0, e1, 4) is None

    def test_conditioning_spends_exactly_one_degree(self):
        d0, d1 = build_pair(K, EPS, P)
        c0 = conditioned_marginal_ensemble(d0, 4, exact=True)
        c1 = conditioned_marginal_ensemble(d1, 4, exact=True)
        assert first_moment_mismatch(c0, c1, 3) is None
        # degree 4 must now break: the gap is the unmatched fifth moment
        # of the pair divided by the (shared) first moment
        sol = solve_d0_weights(K, EPS, P)
        got = c1.moment((0, 1, 2, 3)) - c0.moment((0, 1, 2, 3))
        m1 = d1.moment_of_size_exact(1)
        assert got == 24 * sol.b * sol.p**5 / m1
        assert got != 0

    def test_conditioned_oracle_via_enumeration(self):
        from glhs.moments import enum_pmf

        _, d1 = build_pair(K, EPS, P)
        cond = conditioned_marginal_ensemble(d1, 2, exact=False)
        pmf = enum_pmf(d1)
        patt = np.arange(pmf.size)
        on0 = (patt & 1) == 1
        want = pmf[on0 & ((patt >> 1) & 1 == 1) & ((patt >> 2) & 1 == 1)].sum()
        want /= pmf[on0].sum()
        assert float(cond.moment((0, 1))) == pytest.approx(want, abs=1e-12)


class TestPolyPsi:
    def test_evaluation(self):
        psi = PolyPsi(coeffs=(1, 2, 3))  # 1 + 2t + 3t^2
        assert psi(2.0) == 17.0
        assert np.allclose(psi(np.array([0.0, 1.0])), [1.0, 6.0])

    def test_degree_ignores_trailing_zeros(self):
        assert PolyPsi(coeffs=(0, 1, 0, 0)).degree == 1
        assert QUARTIC.degree == 4

    def test_k_bound(self):
        assert QUARTIC.k_bound == 24.0
        assert PolyPsi(coeffs=(0, 1, 1, 1)).k_bound == 0.0
        with pytest.raises(ValueError):
            PolyPsi(coeffs=(0, 0, 0, 0, 0, 1)).k_bound


class TestSmoothSign:
    def test_seam_values(self):
        ss = smooth_sign(0.25)
        assert ss(-0.25) == pytest.approx(0.0, abs=1e-12)
        assert ss(0.25) == pytest.approx(1.0, abs=1e-12)
        assert ss(0.0) == pytest.approx(0.5, abs=1e-12)
        assert ss(-1.0) == 0.0
        assert ss(1.0) == 1.0

    def test_monotone_bridge(self):
        ss = smooth_sign(0.1)
        t = np.linspace(-0.1, 0.1, 2001)
        vals = ss(t)
        assert (np.diff(vals) >= -1e-12).all()

    def test_fourth_derivative_respects_k_bound(self):
        lam = 0.2
        ss = smooth_sign(lam)
        t = np.linspace(-lam, lam, 40001)
        peak = np.abs(ss.fourth_derivative(t)).max()
        assert peak <= ss.k_bound * (1 + 1e-9)
        assert peak >= 0.9 * ss.k_bound  # the certified max is attained inside
        assert ss.fourth_derivative(2 * lam) == 0.0

    def test_k_bound_scaling(self):
        assert smooth_sign(0.1).k_bound == pytest.approx(C_PHI / 0.1**4)
        with pytest.raises(ValueError):
            smooth_sign(0.5)


class TestLinearForm:
    def test_distribution_by_enumeration(self):
        ens = ensemble_from_pmf([0.25, 0.25, 0.25, 0.25], 2)
        fam = family(ens, ens)
        blocks = [[1.0, 2.0], [4.0, 8.0]]
        atoms, probs = linear_form_distribution(fam, blocks)
        want = {}
        for rows in itertools.product(range(4), repeat=2):
            val = sum(
                b[0] * (r & 1) + b[1] * ((r >> 1) & 1) for b, r in zip(blocks, rows)
            )
            want[val] = want.get(val, 0.0) + 1 / 16
        assert sorted(atoms.tolist()) == sorted(want)
        for a, p in zip(atoms, probs):
            assert p == pytest.approx(want[float(a)])

    def test_expect_psi_matches_manual_sum(self):
        fam_a, _ = _matched_families(2, 2)
        blocks = [[0.3, -0.2], [0.1, 0.4]]
        atoms, probs = linear_form_distribution(fam_a, blocks)
        want = float(np.dot(probs, (atoms - 0.1) ** 4))
        assert expect_psi(fam_a, blocks, 0.1, QUARTIC) == pytest.approx(want)

    def test_sum_l1_fourth(self):
        assert sum_l1_fourth([[1.0, -1.0], [0.5]]) == 16.0 + 0.0625


class TestInvarianceGap:
    def test_quartic_gap_within_bound(self):
        fam_a, fam_b = _matched_families(2, 3)
        blocks = [[0.2, -0.3], [0.1, 0.25], [0.15, 0.05]]
        res = invariance_gap(fam_a, fam_b, blocks, 0.2, QUARTIC, QUARTIC.k_bound)
        assert res.passed
        assert res.gap == pytest.approx(abs(res.expect_a - res.expect_b))
        assert res.bound == pytest.approx(24.0 * sum_l1_fourth(blocks))

    def test_cubic_gap_is_exactly_zero(self):
        fam_a, fam_b = _matched_families(2, 3, exact=True)
        blocks = [
            [Fraction(1, 5), Fraction(-3, 10)],
            [Fraction(1, 10), Fraction(1, 4)],
            [Fraction(3, 20), Fraction(1, 20)],
        ]
        cubic = PolyPsi(coeffs=(Fraction(1), Fraction(1), Fraction(1), Fraction(1)))
        assert invariance_gap_exact(fam_a, fam_b, blocks, Fraction(1, 5), cubic) == 0

    def test_quartic_exact_gap_is_generally_nonzero(self):
        # on 0/1 variables repeated indices collapse, so degree-4 matched
        # marginals kill every quartic; the conditioned pair matches only to
        # degree 3 and the quartic picks up the degree-4 term l0*l1*l2*l3
        d0, d1 = build_pair(K, EPS, P)
        fam_a = family(conditioned_marginal_ensemble(d0, 4, exact=True))
        fam_b = family(conditioned_marginal_ensemble(d1, 4, exact=True))
        blocks = [[Fraction(1, 3), Fraction(1, 7), Fraction(2, 5), Fraction(1, 2)]]
        quartic = PolyPsi(coeffs=(0, 0, 0, 0, Fraction(1)))
        assert invariance_gap_exact(fam_a, fam_b, blocks, Fraction(0), quartic) != 0

    def test_mismatched_families_are_rejected(self):
        fam_a, _ = _matched_families(2, 2)
        bad = family(
            ensemble_from_pmf([0.5, 0.5, 0.0, 0.0], 2),
            ensemble_from_pmf([0.5, 0.5, 0.0, 0.0], 2),
        )
        with pytest.raises(ValueError, match="degree"):
            invariance_gap(fam_a, bad, [[0.1, 0.1], [0.1, 0.1]], 0.0, QUARTIC, 24.0)

    def test_exact_convolution_guard(self):
        # 18 incommensurate singleton blocks double the atom count per step
        ens = ensemble_from_pmf([Fraction(1, 2), Fraction(1, 2)], 1)
        fams = family(*([ens] * 18))
        blocks = [[Fraction(1, 997 + i)] for i in range(18)]
        with pytest.raises(GuardError, match="atoms"):
            invariance_gap_exact(fams, fams, blocks, Fraction(0), QUARTIC)


class TestHybridSteps:
    def test_steps_telescope_to_the_signed_gap(self):
        fam_a, fam_b = _matched_families(2, 3)
        blocks = [[0.2, -0.3], [0.1, 0.25], [0.15, 0.05]]
        theta = 0.1
        steps = hybrid_steps(fam_a, fam_b, blocks, theta, QUARTIC)
        ea = expect_psi(fam_a, blocks, theta, QUARTIC)
        eb = expect_psi(fam_b, blocks, theta, QUARTIC)
        assert math.fsum(steps) == pytest.approx(eb - ea, abs=1e-12)

    def test_each_step_obeys_the_local_bound(self):
        fam_a, fam_b = _matched_families(3, 4)
        blocks = [[0.1, -0.2, 0.05], [0.2, 0.1, 0.0], [0.05, 0.05, 0.3], [0.1, 0.1, 0.1]]
        steps = hybrid_steps(fam_a, fam_b, blocks, 0.3, QUARTIC)
        for step, block in zip(steps, blocks):
            l1 = sum(abs(v) for v in block)
            assert abs(step) <= (QUARTIC.k_bound / 12.0) * l1**4 + 1e-9


class TestSignStatistic:
    def test_window_mass_oracle(self):
        atoms = np.array([0.0, 1.0, 2.0])
        probs = np.array([0.2, 0.3, 0.5])
        assert window_mass(atoms, probs, 0.5) == pytest.approx(0.8)
        assert window_mass(atoms, probs, 0.1) == pytest.approx(0.5)
        assert window_mass(atoms, probs, 2.0) == pytest.approx(1.0)

    def test_spread_function_is_window_mass_of_the_form(self):
        fam_a, _ = _matched_families(2, 2)
        blocks = [[0.3, 0.1], [0.2, 0.4]]
        atoms, probs = linear_form_distribution(fam_a, blocks)
        assert spread_function(fam_a, blocks, 0.05) == pytest.approx(
            window_mass(atoms, probs, 0.05)
        )

    def test_sgn_gap_components(self):
        fam_a, fam_b = _matched_families(2, 3)
        blocks = [[0.2, -0.3], [0.1, 0.25], [0.15, 0.05]]
        theta, alpha = 0.2, 0.2
        res = sgn_gap_bound(fam_a, fam_b, blocks, theta, alpha)
        da = linear_form_distribution(fam_a, blocks)
        db = linear_form_distribution(fam_b, blocks)
        pa = float(da[1][da[0] >= theta].sum())
        pb = float(db[1][db[0] >= theta].sum())
        assert res.gap == pytest.approx(abs(pa - pb))
        assert res.smooth_bound == pytest.approx(
            (C_PHI / alpha**4) * sum_l1_fourth(blocks)
        )
        assert res.bound == pytest.approx(res.smooth_bound + 2 * res.c_alpha)
        assert res.passed

    def test_alpha_range(self):
        fam_a, fam_b = _matched_families(2, 1)
        with pytest.raises(ValueError):
            sgn_gap_bound(fam_a, fam_b, [[0.1, 0.1]], 0.0, 0.6)
