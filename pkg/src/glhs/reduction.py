"""Labeled-example samplers, the halfspace decoder, and soundness audits.

The central object is a gadget test over a k x R bit grid: draw a uniform
label b, fill the R columns independently from the b-side gadget mixture,
then hit every bit with replacement noise.  Encoding hypotheses (a
dictator-style OR reading one column) accept with probability tracked by an
exact closed form; hypotheses without a dominant shared coordinate provably
hover near 1/2.

Two instance-driven samplers embed that test into projection instances:

* the unique-projection sampler permutes each slot's columns by its
  bijection and pads non-edge vertices with zero blocks (noise lands on x
  before the pullback, and the bit layout matches the plain grid test
  word-for-word given aligned seeds);
* the general sampler copies source column pi(j) into target coordinate j
  and applies independent noise per TARGET coordinate, after the pullback.
  Coordinates sharing a source become almost identical copies, which is
  what its soundness analysis leans on.

Layouts are fixed per example index across four purpose streams (label,
edge, column, noise words), so any chunking of a batch reproduces identical
bytes.  Edge slots scatter in order: when a hyperedge repeats a vertex the
later slot wins.

The decoding direction turns halfspace weights back into vertex labels
(uniform over each block's top-t magnitudes) and audits the structural
quantities the soundness argument consumes: per-edge weak-satisfaction
probability, disjointness of projected top sets, and the quartic collision
("niceness") statistic of regular parts under projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as _iter_product

import numpy as np

from .core import (
    CursorRng,
    GuardError,
    PURPOSE_DECODE,
    PURPOSE_EDGE,
    PURPOSE_LABEL,
    PURPOSE_NOISE,
    PURPOSE_X,
    BitVector,
    LabeledExample,
    purpose_stream,
    rng_words,
    words_to_uniforms,
)
from .halfspace import Disjunction, Halfspace, regularizing_prefix, top_indices, truncate
from .labelcover import LabelCoverInstance, Labeling, weak_mask
from .moments import (
    ColumnMixture,
    exact_moment,
    moment_gap,
    prob_all_zero,
    sample_columns_at,
    apply_noise,
)
from .stats import Interval, wilson_interval

DECODE_ENUM_GUARD = 1_000_000


@dataclass(frozen=True)
class TestSpec:
    """Parameters of the grid test: the gadget pair, arity, width, noise.

    The pair must match moments to degree 4 unless `completeness_only` is
    set (a one-sided pair supports completeness measurements at arities too
    small for any matched pair to exist).
    """

    d0: ColumnMixture
    d1: ColumnMixture
    r: int
    gamma: float
    completeness_only: bool = False

    def __post_init__(self):
        if self.d0.k != self.d1.k:
            raise ValueError(
                f"mixture arities differ: {self.d0.k} vs {self.d1.k}"
            )
        if self.r < 1:
            raise ValueError(f"width must be positive, got {self.r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"noise rate must be in [0, 1], got {self.gamma}")
        if not self.completeness_only:
            gap = moment_gap(self.d0, self.d1, 4)
            if gap > 1e-9:
                raise ValueError(
                    f"gadget pair mismatches moments up to degree 4 (gap {gap:.3g}); "
                    "set completeness_only for one-sided use"
                )

    @property
    def k(self) -> int:
        return self.d0.k

    @property
    def dim(self) -> int:
        return self.k * self.r


@dataclass(frozen=True)
class DecoderSpec:
    """List size, regularity parameter, and trial count for decoding."""

    t: int
    tau: float
    trials: int = 64

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"list size must be at least 1, got {self.t}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.trials < 1:
            raise ValueError(f"trials must be positive, got {self.trials}")


# ---------------------------------------------------------------------------
# theoretical parameter presets (magnitudes are impractical; audits accept
# free values, these record the couplings)


def grid_test_tau(k: int) -> float:
    return float(k) ** -7


def grid_test_t(k: int, r: int, tau: float | None = None) -> int:
    """List size paired with the grid-test soundness analysis."""
    if tau is None:
        tau = grid_test_tau(k)
    inv2 = 1.0 / (tau * tau)
    return math.ceil(
        inv2 * (3.0 * math.log(1.0 / tau) + math.log(r))
        + math.ceil(4.0 * inv2 * math.log(1.0 / tau)) * math.ceil(4.0 * k * k * math.log(k))
    )


def smooth_reduction_tau(k: int) -> float:
    return float(k) ** -13


def smooth_reduction_t(k: int, d: int, tau: float | None = None) -> int:
    """List size paired with the projection-instance soundness analysis."""
    if tau is None:
        tau = smooth_reduction_tau(k)
    inv2 = 1.0 / (tau * tau)
    return math.ceil(
        inv2
        * (
            math.ceil(4.0 * k * k * math.log(2.0 * k)) * math.ceil(4.0 * math.log(1.0 / tau))
            + math.log(1.0 / tau)
            + 10.0 * math.log(d)
        )
    )


# ---------------------------------------------------------------------------
# samplers


def _labels_for(master_seed: int, stream_id: int, start: int, count: int) -> np.ndarray:
    idx = np.arange(start, start + count, dtype=np.uint64)
    words = rng_words(master_seed, purpose_stream(stream_id, PURPOSE_LABEL), idx)
    return (words & np.uint64(1)).astype(np.uint8)


def _edges_for(
    master_seed: int, stream_id: int, start: int, count: int, num_edges: int
) -> np.ndarray:
    idx = np.arange(start, start + count, dtype=np.uint64)
    u = words_to_uniforms(
        rng_words(master_seed, purpose_stream(stream_id, PURPOSE_EDGE), idx)
    )
    return np.minimum((u * num_edges).astype(np.int64), num_edges - 1)


def _grid_columns(
    spec: TestSpec,
    labels: np.ndarray,
    width: int,
    master_seed: int,
    stream_id: int,
    start: int,
) -> np.ndarray:
    """(count, k, width) noiseless grids; example n owns columns n*width ...

    Rows with label 0 draw their columns from d0, rows with label 1 from d1,
    at the same counter addresses either way.
    """
    count = labels.size
    x_stream = purpose_stream(stream_id, PURPOSE_X)
    base = (
        np.arange(start, start + count, dtype=np.uint64)[:, None] * np.uint64(width)
        + np.arange(width, dtype=np.uint64)[None, :]
    )
    cols = np.empty((count, width, spec.k), dtype=np.uint8)
    for bit, mixture in ((0, spec.d0), (1, spec.d1)):
        rows = np.flatnonzero(labels == bit)
        if rows.size:
            drawn = sample_columns_at(
                mixture, master_seed, x_stream, base[rows].reshape(-1)
            )
            cols[rows] = drawn.reshape(rows.size, width, spec.k)
    return cols.transpose(0, 2, 1)


def dict_test_batch(
    spec: TestSpec,
    master_seed: int,
    stream_id: int,
    start: int,
    count: int,
) -> tuple[np.ndarray, np.ndarray]:
    """(bits (count, k*r), labels (count,)) for absolute examples start..

    b uniform; columns i.i.d. from the b-side mixture; independent
    replacement noise on every bit.  Grid layout: bit (i, j) of example n is
    bits[n, i*r + j].
    """
    if count < 1:
        return np.zeros((0, spec.dim), dtype=np.uint8), np.zeros(0, dtype=np.uint8)
    labels = _labels_for(master_seed, stream_id, start, count)
    grids = _grid_columns(spec, labels, spec.r, master_seed, stream_id, start)
    flat = np.ascontiguousarray(grids).reshape(count, spec.dim)
    noisy = apply_noise(
        flat, spec.gamma, master_seed, purpose_stream(stream_id, PURPOSE_NOISE), start
    )
    return noisy, labels


def dict_test_sample(
    spec: TestSpec, master_seed: int, stream_id: int, index: int
) -> LabeledExample:
    bits, labels = dict_test_batch(spec, master_seed, stream_id, index, 1)
    return LabeledExample(features=BitVector(bits[0]), label=int(labels[0]))


def ug_reduce_batch(
    inst: LabelCoverInstance,
    spec: TestSpec,
    master_seed: int,
    stream_id: int,
    start: int,
    count: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Unique-instance sampler over |V| x R grids.

    Noise lands on the k x R source grid first (the noisy-mixture power
    distribution); slot i then permutes columns by its bijection:
    target column j copies source column pi^{v_i,e}(j).  Non-edge vertex
    blocks stay zero.  With identity projections the edge rows reproduce
    dict_test_batch byte-for-byte.
    """
    if not inst.unique:
        raise ValueError("sampler requires a unique instance (M = N, bijections)")
    if inst.m != spec.r:
        raise ValueError(
            f"instance label count {inst.m} does not match spec width {spec.r}"
        )
    if inst.k != spec.k:
        raise ValueError(
            f"instance arity {inst.k} does not match gadget arity {spec.k}"
        )
    r = spec.r
    labels = _labels_for(master_seed, stream_id, start, count)
    edge_ids = _edges_for(master_seed, stream_id, start, count, inst.num_edges)
    grids = _grid_columns(spec, labels, r, master_seed, stream_id, start)
    flat = np.ascontiguousarray(grids).reshape(count, spec.k * r)
    noisy = apply_noise(
        flat, spec.gamma, master_seed, purpose_stream(stream_id, PURPOSE_NOISE), start
    ).reshape(count, spec.k, r)

    out = np.zeros((count, inst.num_vertices, r), dtype=np.uint8)
    rows = np.arange(count)
    edge_verts = inst.edges[edge_ids]
    for s in range(inst.k):
        proj = inst.projections[edge_ids, s].astype(np.int64)
        pulled = np.take_along_axis(noisy[:, s, :], proj, axis=1)
        out[rows, edge_verts[:, s]] = pulled
    return out.reshape(count, inst.num_vertices * r), labels


def lc_reduce_batch(
    inst: LabelCoverInstance,
    spec: TestSpec,
    master_seed: int,
    stream_id: int,
    start: int,
    count: int,
) -> tuple[np.ndarray, np.ndarray]:
    """General-instance sampler over |V| x M grids.

    The k x N source grid is drawn noiselessly; slot i's block copies
    source bit pi^{v_i,e}(j) into target coordinate j, and the noise is
    applied per target coordinate after the pullback (coordinates sharing a
    source are almost identical copies, their disagreement probability
    bounded by 2 * gamma * (1 - gamma/2)).
    """
    if inst.k != spec.k:
        raise ValueError(
            f"instance arity {inst.k} does not match gadget arity {spec.k}"
        )
    if inst.n != spec.r:
        raise ValueError(
            f"instance inner label count {inst.n} does not match spec width {spec.r}"
        )
    labels = _labels_for(master_seed, stream_id, start, count)
    edge_ids = _edges_for(master_seed, stream_id, start, count, inst.num_edges)
    grids = _grid_columns(spec, labels, inst.n, master_seed, stream_id, start)

    rows = np.arange(count)
    pulled = np.empty((count, inst.k, inst.m), dtype=np.uint8)
    for s in range(inst.k):
        proj = inst.projections[edge_ids, s].astype(np.int64)
        pulled[:, s, :] = np.take_along_axis(grids[:, s, :], proj, axis=1)
    noisy = apply_noise(
        pulled.reshape(count, inst.k * inst.m),
        spec.gamma,
        master_seed,
        purpose_stream(stream_id, PURPOSE_NOISE),
        start,
    ).reshape(count, inst.k, inst.m)

    out = np.zeros((count, inst.num_vertices, inst.m), dtype=np.uint8)
    edge_verts = inst.edges[edge_ids]
    for s in range(inst.k):
        out[rows, edge_verts[:, s]] = noisy[:, s, :]
    return out.reshape(count, inst.num_vertices * inst.m), labels


# ---------------------------------------------------------------------------
# closed forms


def or_acceptance_closed_form(spec: TestSpec) -> float:
    """Acceptance of a one-column OR under the grid test, exactly.

    The OR of one column accepts a b=0 example iff the noisy column is all
    zero, and a b=1 example iff it is not:
    1/2 * P0(all zero) + 1/2 * (1 - P1(all zero)).

    The same number is the planted-disjunction acceptance on a strongly
    satisfiable instance with distinct-vertex edges, where the disjunction
    collapses to the OR of the common projected column.
    """
    p0 = prob_all_zero(spec.d0.noisy(spec.gamma))
    p1 = prob_all_zero(spec.d1.noisy(spec.gamma))
    return 0.5 * p0 + 0.5 * (1.0 - p1)


def copy_disagreement_bound(gamma: float) -> float:
    """Upper bound on Pr[two noisy copies of one source bit differ]."""
    return 2.0 * gamma * (1.0 - gamma / 2.0)


def planted_disjunction(lab: Labeling) -> Disjunction:
    """OR of y_v at each vertex's planted label."""
    return Disjunction(
        literals=frozenset(
            (v, int(lab.assignment[v])) for v in range(lab.num_vertices)
        ),
        rows=lab.num_vertices,
        cols=lab.m,
    )


# ---------------------------------------------------------------------------
# decoding


def decode_labeling(
    h: Halfspace,
    spec: DecoderSpec,
    master_seed: int,
    stream_id: int,
    trial: int = 0,
) -> Labeling:
    """One label per vertex, uniform over the top-t magnitudes of its block.

    All-zero blocks fall back to a uniform label over the whole alphabet.
    Each trial consumes exactly one draw per vertex, so trial n starts at
    cursor n * rows.
    """
    rng = CursorRng(
        master_seed, purpose_stream(stream_id, PURPOSE_DECODE), index=trial * h.rows
    )
    labels = np.empty(h.rows, dtype=np.int32)
    for v in range(h.rows):
        block = h.block(v)
        if not np.any(block):
            labels[v] = rng.randint(h.cols)
        else:
            tops = top_indices(block, min(spec.t, h.cols))
            labels[v] = tops[rng.randint(tops.size)]
    return Labeling(assignment=labels, m=h.cols)


@dataclass(frozen=True)
class DecodeReport:
    weak_rate: float
    interval: Interval
    trials: int
    edges: int


def weak_sat_rate_of_decoder(
    h: Halfspace,
    spec: DecoderSpec,
    inst: LabelCoverInstance,
    master_seed: int,
    stream_id: int = 0,
) -> DecodeReport:
    """Mean weakly-satisfied fraction over independent decode draws."""
    if h.rows != inst.num_vertices or h.cols != inst.m:
        raise ValueError(
            f"halfspace grid {h.rows}x{h.cols} does not match instance "
            f"{inst.num_vertices}x{inst.m}"
        )
    total = 0
    for trial in range(spec.trials):
        lab = decode_labeling(h, spec, master_seed, stream_id, trial=trial)
        total += int(weak_mask(inst, lab).sum())
    n = spec.trials * inst.num_edges
    return DecodeReport(
        weak_rate=total / n,
        interval=wilson_interval(total, n),
        trials=spec.trials,
        edges=inst.num_edges,
    )


def _candidate_labels(h: Halfspace, spec_t: int, v: int) -> np.ndarray:
    block = h.block(v)
    if not np.any(block):
        return np.arange(h.cols, dtype=np.int64)
    return top_indices(block, min(spec_t, h.cols))


def edge_weak_probability(
    inst: LabelCoverInstance, h: Halfspace, t: int, edge: int
) -> float:
    """Exact weak-satisfaction probability of one edge under the decoder.

    Enumerates the product of candidate sets over the edge's DISTINCT
    vertices (one draw per vertex, shared across its slots).
    """
    if not 0 <= edge < inst.num_edges:
        raise IndexError(f"edge {edge} out of range [0, {inst.num_edges})")
    verts = [int(v) for v in inst.edges[edge]]
    distinct = sorted(set(verts))
    cands = {v: _candidate_labels(h, t, v) for v in distinct}
    total_points = math.prod(c.size for c in cands.values())
    if total_points > DECODE_ENUM_GUARD:
        raise GuardError(
            f"candidate product has {total_points} points; guard is {DECODE_ENUM_GUARD}"
        )
    proj = inst.projections[edge]
    hits = 0
    for combo in _iter_product(*(cands[v] for v in distinct)):
        label_of = dict(zip(distinct, combo))
        projected = [proj[s, label_of[verts[s]]] for s in range(inst.k)]
        ok = any(
            projected[s] == projected[u] and verts[s] != verts[u]
            for s in range(inst.k)
            for u in range(s + 1, inst.k)
        )
        hits += ok
    return hits / total_points


def disjoint_tops(
    inst: LabelCoverInstance, h: Halfspace, edge: int, t: int
) -> bool:
    """Are the projected top-t label sets pairwise disjoint across the edge?

    Only pairs of slots holding distinct vertices count, mirroring weak
    satisfaction.
    """
    if not 0 <= edge < inst.num_edges:
        raise IndexError(f"edge {edge} out of range [0, {inst.num_edges})")
    verts = [int(v) for v in inst.edges[edge]]
    projected = []
    for s in range(inst.k):
        tops = _candidate_labels(h, t, verts[s])
        projected.append(set(int(x) for x in inst.projections[edge, s][tops]))
    for s in range(inst.k):
        for u in range(s + 1, inst.k):
            if verts[s] != verts[u] and projected[s] & projected[u]:
                return False
    return True


# ---------------------------------------------------------------------------
# niceness


def niceness_value(w_v: np.ndarray, tau: float, proj_row: np.ndarray, n: int) -> float:
    """Quartic collision mass of the regular part under one projection.

    l is w_v with its regularizing prefix removed; the value is
    sum_i (sum_{j in preimage(i)} |l_j|)^4 / ||l||_2^4, and 0 when l = 0.
    """
    w_v = np.asarray(w_v, dtype=np.float64)
    proj_row = np.asarray(proj_row, dtype=np.int64)
    if proj_row.shape != w_v.shape:
        raise ValueError(
            f"projection row shape {proj_row.shape} does not match weights {w_v.shape}"
        )
    prefix = regularizing_prefix(w_v, tau)
    l = w_v - truncate(w_v, prefix)
    norm2 = float(l @ l)
    if norm2 <= 0.0:
        return 0.0
    sums = np.bincount(proj_row, weights=np.abs(l), minlength=n)
    return float(np.sum(sums**4)) / (norm2 * norm2)


def is_beta_nice(
    w_v: np.ndarray, tau: float, proj_row: np.ndarray, n: int, beta: float
) -> bool:
    return niceness_value(w_v, tau, proj_row, n) <= beta


def edge_niceness_audit(
    inst: LabelCoverInstance, h: Halfspace, tau: float, beta: float
) -> float:
    """Fraction of edges all of whose slot vertices are beta-nice."""
    if h.rows != inst.num_vertices or h.cols != inst.m:
        raise ValueError(
            f"halfspace grid {h.rows}x{h.cols} does not match instance "
            f"{inst.num_vertices}x{inst.m}"
        )
    values = {}
    nice_edges = 0
    for e in range(inst.num_edges):
        ok = True
        for s in range(inst.k):
            v = int(inst.edges[e, s])
            key = (v, inst.projections[e, s].tobytes())
            val = values.get(key)
            if val is None:
                val = niceness_value(h.block(v), tau, inst.projections[e, s], inst.n)
                values[key] = val
            if val > beta:
                ok = False
                break
        nice_edges += ok
    return nice_edges / inst.num_edges


def non_nice_bound(k: int, d: int, j: float) -> float:
    """k * d^16 / J: the audited ceiling on the non-nice edge fraction."""
    return k * float(d) ** 16 / j


# ---------------------------------------------------------------------------
# truncation stability


def edge_incidence_fraction(inst: LabelCoverInstance, v: int) -> float:
    """Fraction of edges containing vertex v at least once."""
    return float((inst.edges == v).any(axis=1).mean())


def truncation_shift(
    h: Halfspace,
    vertex: int,
    t: int,
    inst: LabelCoverInstance,
    spec: TestSpec,
) -> tuple[Halfspace, float]:
    """Replace one vertex block by its top-t truncation, shifting the threshold.

    The dropped tail a contributes E[<a, y_v> | b=0] to every margin on
    average; subtracting that mean from theta recenters the truncated
    halfspace.  The closed form uses E[y | b=0, v on edge] = (1-gamma) * m1
    + gamma/2 per coordinate (m1 the degree-1 gadget moment) times the
    fraction of edges covering v; it matches the per-edge recentering
    exactly when every edge covers v.
    """
    if not 0 <= vertex < h.rows:
        raise IndexError(f"vertex {vertex} out of range [0, {h.rows})")
    block = h.block(vertex)
    keep = top_indices(block, min(t, h.cols))
    kept = truncate(block, keep)
    dropped = block - kept
    grid = h.grid().copy()
    grid[vertex] = kept
    m1 = exact_moment(spec.d0, [0])
    per_coord = (1.0 - spec.gamma) * m1 + spec.gamma / 2.0
    shift = edge_incidence_fraction(inst, vertex) * per_coord * float(dropped.sum())
    return Halfspace.from_grid(grid, h.theta - shift), shift
