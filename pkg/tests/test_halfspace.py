"""Halfspaces, disjunctions, and magnitude-tail structure."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from glhs.halfspace import (
    CriticalIndexReport,
    Disjunction,
    Halfspace,
    check_geometric_decay,
    critical_index,
    read_halfspace,
    regularizing_prefix,
    sgn,
    top_indices,
    truncate,
    write_halfspace,
)

finite_floats = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
)


def _oracle_critical_index(w, tau):
    """Direct restatement: first 1-based sorted position with |w| <= tau * tail norm."""
    order = sorted(range(len(w)), key=lambda i: (-abs(w[i]), i))
    mags = [abs(w[i]) for i in order]
    for t in range(len(w)):
        tail = math.hypot(*mags[t:])
        if mags[t] <= tau * tail:
            return t + 1
    return math.inf


class TestSgn:
    def test_zero_maps_to_plus_one(self):
        assert sgn(0.0) == 1
        assert sgn(1e-300) == 1
        assert sgn(-1e-300) == -1


class TestHalfspace:
    def test_grid_roundtrip(self):
        grid = np.arange(12, dtype=np.float64).reshape(3, 4)
        h = Halfspace.from_grid(grid, theta=1.5)
        assert h.rows == 3 and h.cols == 4 and h.dim == 12
        assert np.array_equal(h.grid(), grid)
        assert np.array_equal(h.block(1), grid[1])

    def test_weights_are_readonly(self):
        h = Halfspace.from_grid(np.ones((2, 2)), theta=0.0)
        with pytest.raises(ValueError):
            h.weights[0] = 5.0

    @given(
        hnp.arrays(np.float64, st.integers(1, 16), elements=finite_floats),
        finite_floats,
        st.integers(0, 2**32),
    )
    @settings(max_examples=60, deadline=None)
    def test_evaluate_is_the_margin_sign(self, w, theta, seed):
        h = Halfspace(weights=w, theta=theta, rows=1, cols=w.size)
        bits = np.random.default_rng(seed).integers(0, 2, size=(8, w.size), dtype=np.uint8)
        margins = h.margin(bits)
        evals = h.evaluate(bits)
        assert np.allclose(margins, bits @ w - theta)
        assert np.array_equal(evals, (margins >= 0).astype(np.uint8))

    def test_margin_accepts_single_row(self):
        h = Halfspace.from_grid(np.array([[1.0, -1.0]]), theta=0.0)
        assert int(h.evaluate(np.array([1, 0], dtype=np.uint8))) == 1
        assert int(h.evaluate(np.array([0, 1], dtype=np.uint8))) == 0


class TestDisjunction:
    def test_literals_are_positional(self):
        d = Disjunction(literals=frozenset({(0, 1), (2, 0)}), rows=3, cols=2)
        assert d.dim == 6
        assert sorted(d.flat_indices().tolist()) == [1, 4]

    @given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32))
    @settings(max_examples=60, deadline=None)
    def test_disjunction_equals_its_halfspace_form(self, rows, cols, seed):
        rng = np.random.default_rng(seed)
        n_lits = int(rng.integers(1, rows * cols + 1))
        lits = set()
        while len(lits) < n_lits:
            lits.add((int(rng.integers(rows)), int(rng.integers(cols))))
        d = Disjunction(literals=frozenset(lits), rows=rows, cols=cols)
        bits = rng.integers(0, 2, size=(32, rows * cols), dtype=np.uint8)
        want = bits[:, d.flat_indices()].any(axis=1).astype(np.uint8)
        assert np.array_equal(d.evaluate(bits), want)
        assert np.array_equal(d.as_halfspace().evaluate(bits), want)

    def test_empty_disjunction_rejects_everything(self):
        d = Disjunction(literals=frozenset(), rows=2, cols=2)
        bits = np.ones((3, 4), dtype=np.uint8)
        assert d.evaluate(bits).tolist() == [0, 0, 0]


class TestCriticalIndex:
    def test_regular_vector(self):
        # 4 equal weights: |w|/sigma = 1/2 <= tau at the first position
        rep = critical_index([1.0, 1.0, 1.0, 1.0], tau=0.5)
        assert rep.c_tau == 1
        assert rep.is_regular

    def test_single_spike_is_never_regular(self):
        rep = critical_index([5.0], tau=0.5)
        assert rep.c_tau == math.inf

    def test_known_mixed_vector(self):
        w = [8.0, 1.0, 1.0, 1.0, 1.0]
        # position 1: 8/sqrt(68) = 0.97 > 0.5; position 2: 1/2 <= 0.5
        rep = critical_index(w, tau=0.5)
        assert rep.c_tau == 2
        assert rep.order[0] == 0

    @given(
        hnp.arrays(
            np.float64,
            st.integers(1, 24),
            elements=st.floats(min_value=-100, max_value=100, allow_nan=False),
        ),
        st.floats(min_value=0.05, max_value=1.0),
    )
    @settings(max_examples=120, deadline=None)
    def test_matches_direct_restatement(self, w, tau):
        assert critical_index(w, tau).c_tau == _oracle_critical_index(w.tolist(), tau)

    @given(
        hnp.arrays(
            np.float64,
            st.integers(1, 16),
            elements=st.floats(min_value=-100, max_value=100, allow_nan=False),
        ),
        st.floats(min_value=0.05, max_value=1.0),
        st.floats(min_value=0.01, max_value=1000),
    )
    @settings(max_examples=60, deadline=None)
    def test_scale_invariance(self, w, tau, scale):
        assert critical_index(w, tau).c_tau == critical_index(w * scale, tau).c_tau

    def test_zero_vector_is_regular(self):
        assert critical_index(np.zeros(5), tau=0.3).c_tau == 1

    def test_tail_norms_are_suffix_norms(self):
        w = np.array([3.0, -4.0, 12.0])
        rep = critical_index(w, tau=0.2)
        mags = np.abs(w[rep.order])
        for t in range(3):
            assert rep.tail_norms[t] == pytest.approx(
                math.sqrt((mags[t:] ** 2).sum())
            )

    def test_rejects_bad_tau(self):
        with pytest.raises(ValueError):
            critical_index([1.0], tau=0.0)
        with pytest.raises(ValueError):
            critical_index([1.0], tau=1.5)


class TestPrefixAndTruncate:
    def test_top_indices_rank_order(self):
        w = [0.5, -8.0, 2.0, -1.0]
        assert top_indices(w, 3).tolist() == [1, 2, 3]
        assert top_indices(w, 99).tolist() == [1, 2, 3, 0]

    def test_regularizing_prefix_leaves_a_regular_tail(self):
        w = np.array([100.0, 50.0, 1.0, 1.0, 1.0, 1.0, 1.0])
        tau = 0.5
        prefix = regularizing_prefix(w, tau)
        rest = w.copy()
        rest[prefix] = 0.0
        assert critical_index(rest, tau).c_tau == 1
        # minimality: keeping the last prefix element breaks regularity
        assert prefix.size == critical_index(w, tau).c_tau - 1
        if prefix.size:
            partial = w.copy()
            partial[prefix[:-1]] = 0.0
            assert critical_index(partial, tau).c_tau != 1

    def test_truncate_zeroes_the_complement(self):
        w = np.array([1.0, 2.0, 3.0, 4.0])
        assert truncate(w, [0, 2]).tolist() == [1.0, 0.0, 3.0, 0.0]
        with pytest.raises(ValueError):
            truncate(w, [4])

    def test_truncate_keeps_input_intact(self):
        w = np.array([1.0, 2.0])
        truncate(w, [0])
        assert w.tolist() == [1.0, 2.0]


class TestGeometricDecay:
    def test_geometric_vector_passes(self):
        w = [3.0 ** -i for i in range(10)]
        assert check_geometric_decay(w, tau=0.3, l=4)

    @given(
        hnp.arrays(
            np.float64,
            st.integers(4, 24),
            elements=st.floats(min_value=-10, max_value=10, allow_nan=False),
        ),
        st.floats(min_value=0.05, max_value=1.0 / 3.0),
    )
    @settings(max_examples=150, deadline=None)
    def test_chain_holds_whenever_the_precondition_does(self, w, tau):
        # every link is implied by non-criticality of the positions it
        # crosses, so under c_tau > l the verifier must always pass
        rep = critical_index(w, tau)
        l = w.size - 1 if math.isinf(rep.c_tau) else int(rep.c_tau) - 1
        if l < 1:
            return
        assert check_geometric_decay(w, tau=tau, l=l)

    def test_precondition_requires_large_critical_index(self):
        with pytest.raises(ValueError, match="critical index"):
            check_geometric_decay([1.0, 1.0, 1.0, 1.0], tau=0.6, l=2)

    def test_third_link_holds_strictly_below_critical(self):
        # alternating-ish decay: passes the norm chain but position 1 violates
        # tau*sigma <= |w| only at or past the critical index, never before
        w = [2.0 ** -i for i in range(12)]
        assert check_geometric_decay(w, tau=1.0 / 3.0, l=6)


class TestSerialization:
    @given(
        rows=st.integers(1, 4),
        cols=st.integers(1, 5),
        theta=finite_floats,
        seed=st.integers(0, 2**32),
    )
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_is_exact(self, tmp_path_factory, rows, cols, theta, seed):
        rng = np.random.default_rng(seed)
        grid = rng.standard_normal((rows, cols)) * 1e3
        h = Halfspace.from_grid(grid, theta=theta)
        path = tmp_path_factory.mktemp("hs") / "h.json"
        write_halfspace(h, str(path))
        back = read_halfspace(str(path))
        assert back.rows == rows and back.cols == cols
        assert back.theta == theta
        assert np.array_equal(back.weights, h.weights)
