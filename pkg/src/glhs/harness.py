"""Hypothesis evaluation, a perceptron probe, and experiment orchestration.

`agreement` counts exact matches between a hypothesis and a labeled stream
and reports the rate with a Wilson interval plus the conditional means
E[h | b] whose balanced combination obeys the half-plus-half-gap identity.
`perceptron_train` is a deterministic averaged-perceptron probe: the
hardness construction predicts that no efficient learner beats the trivial
rate by much on sound instances, so its results are reported comparatively
rather than asserted against theory constants.

`run_experiment` executes named plans (completeness, soundness,
decode-planted) and emits one CheckRecord per check; records serialize to
single tab-separated text lines so report files can be folded by
concatenation.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .core import (
    CursorRng,
    PURPOSE_LEARN,
    PURPOSE_MC,
    LabeledExample,
    StreamReader,
    StreamWriter,
    purpose_stream,
)
from .halfspace import Disjunction, Halfspace
from .labelcover import LabelCoverInstance, Labeling
from .moments import ColumnSource, column_sum_pmf
from .reduction import (
    DecoderSpec,
    TestSpec,
    decode_labeling,
    dict_test_batch,
    lc_reduce_batch,
    or_acceptance_closed_form,
    planted_disjunction,
    ug_reduce_batch,
    weak_sat_rate_of_decoder,
)
from .stats import Interval, binomial_sigma, wilson_interval

Hypothesis = Union[Halfspace, Disjunction]

DEFAULT_CHUNK = 8192


def hypothesis_id(h: Hypothesis) -> str:
    """Stable short identifier: kind, grid shape, content digest."""
    digest = hashlib.blake2b(digest_size=6)
    if isinstance(h, Halfspace):
        kind = "halfspace"
        digest.update(np.ascontiguousarray(h.weights).tobytes())
        digest.update(repr(h.theta).encode())
    else:
        kind = "disjunction"
        digest.update(repr(sorted(h.literals)).encode())
    return f"{kind}-{h.rows}x{h.cols}-{digest.hexdigest()}"


# ---------------------------------------------------------------------------
# agreement


@dataclass(frozen=True)
class AgreementReport:
    """Exact agreement count of a hypothesis against a labeled sample set.

    `rate` is matches/count.  The conditional means split by label:
    cond_mean1 = E[h | b=1], cond_mean0 = E[h | b=0].  The balanced
    acceptance 1/2 + (cond_mean1 - cond_mean0)/2 weighs both labels equally
    and is what the closed forms predict; it equals `rate` exactly when the
    label counts are equal.
    """

    hypothesis: str
    count: int
    matches: int
    n1: int
    hits1: int
    provenance: str

    def __post_init__(self):
        if not 0 <= self.matches <= self.count:
            raise ValueError("match count out of range")

    @property
    def n0(self) -> int:
        return self.count - self.n1

    @property
    def hits0(self) -> int:
        # h=1 answers among b=0 examples: those b=0 examples NOT matched
        return self.n0 - (self.matches - (self.hits1))

    @property
    def rate(self) -> float:
        return self.matches / self.count

    @property
    def interval(self) -> Interval:
        return wilson_interval(self.matches, self.count)

    @property
    def cond_mean1(self) -> float:
        """E[h | b=1]; 0 when no b=1 examples were seen."""
        return self.hits1 / self.n1 if self.n1 else 0.0

    @property
    def cond_mean0(self) -> float:
        """E[h | b=0]; 0 when no b=0 examples were seen."""
        return self.hits0 / self.n0 if self.n0 else 0.0

    @property
    def gap(self) -> float:
        return self.cond_mean1 - self.cond_mean0

    @property
    def balanced_acceptance(self) -> float:
        return 0.5 + 0.5 * self.gap

    def identity_residual(self) -> float:
        """|balanced acceptance - (1/2 + gap/2)| recomputed from raw counts.

        Always tiny (two float evaluations of one algebraic identity); kept
        as an explicit audit so every experiment can record it.
        """
        lhs = 0.0
        if self.n1:
            lhs += 0.5 * (self.hits1 / self.n1)
        if self.n0:
            lhs += 0.5 * (1.0 - self.hits0 / self.n0)
        else:
            lhs += 0.5
        return abs(lhs - self.balanced_acceptance)


BatchIter = Iterator[tuple[np.ndarray, np.ndarray]]

ExampleSource = Union[
    str,
    os.PathLike,
    StreamReader,
    tuple[np.ndarray, np.ndarray],
    Sequence[LabeledExample],
]


def _normalize_batches(
    examples: ExampleSource, chunk: int
) -> tuple[int | None, BatchIter, str]:
    """(declared dim or None, batch iterator, provenance string)."""
    if isinstance(examples, (str, os.PathLike)):
        reader = StreamReader(os.fspath(examples))
        return (
            reader.header.bits_per_example,
            reader.read_batches(chunk),
            f"file:{os.fspath(examples)}",
        )
    if isinstance(examples, StreamReader):
        return (
            examples.header.bits_per_example,
            examples.read_batches(chunk),
            f"file:{examples.path}",
        )
    if isinstance(examples, tuple) and len(examples) == 2:
        bits, labels = examples
        bits = np.asarray(bits, dtype=np.uint8)
        labels = np.asarray(labels, dtype=np.uint8)
        if bits.ndim != 2 or labels.shape != (bits.shape[0],):
            raise ValueError("expected (bits (n, dim), labels (n,)) arrays")
        return bits.shape[1], iter([(bits, labels)]), "arrays"
    examples = list(examples)
    if not examples:
        return None, iter([]), "examples"
    dim = len(examples[0].features)
    bits = np.stack([ex.features.to_array() for ex in examples])
    labels = np.asarray([ex.label for ex in examples], dtype=np.uint8)
    return dim, iter([(bits, labels)]), "examples"


def agreement(
    hypothesis: Hypothesis,
    examples: ExampleSource,
    chunk: int = DEFAULT_CHUNK,
) -> AgreementReport:
    """Exact agreement of `hypothesis` over every provided example."""
    dim, batches, provenance = _normalize_batches(examples, chunk)
    if dim is not None and dim != hypothesis.dim:
        raise ValueError(
            f"hypothesis reads {hypothesis.dim} bits but examples carry {dim}"
        )
    count = matches = n1 = hits1 = 0
    for bits, labels in batches:
        preds = hypothesis.evaluate(bits)
        count += labels.size
        matches += int((preds == labels).sum())
        ones = labels == 1
        n1 += int(ones.sum())
        hits1 += int(preds[ones].sum())
    if count == 0:
        raise ValueError("no examples to evaluate")
    return AgreementReport(
        hypothesis=hypothesis_id(hypothesis),
        count=count,
        matches=matches,
        n1=n1,
        hits1=hits1,
        provenance=provenance,
    )


def negated_rate(report: AgreementReport) -> float:
    """Agreement rate the pointwise negation would have scored."""
    return (report.count - report.matches) / report.count


# ---------------------------------------------------------------------------
# perceptron probe


@dataclass(frozen=True)
class LearnerConfig:
    """Averaged-perceptron settings; training order is fixed by the seed."""

    epochs: int = 5
    rate: float = 1.0
    schedule: str = "constant"
    shuffle_seed: int = 0
    averaged: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if not self.rate > 0.0:
            raise ValueError(f"learning rate must be positive, got {self.rate}")
        if self.schedule not in ("constant", "inverse"):
            raise ValueError(
                f"schedule must be 'constant' or 'inverse', got {self.schedule!r}"
            )


def _load_examples(
    examples: ExampleSource, chunk: int
) -> tuple[np.ndarray, np.ndarray, int | None, int | None]:
    """Materialize (bits, labels); grid shape comes along when known."""
    rows = cols = None
    if isinstance(examples, (str, os.PathLike)):
        examples = StreamReader(os.fspath(examples))
    if isinstance(examples, StreamReader):
        rows, cols = examples.header.rows, examples.header.cols
    dim, batches, _ = _normalize_batches(examples, chunk)
    parts = list(batches)
    if not parts or sum(b.shape[0] for b, _ in parts) == 0:
        raise ValueError("no training examples")
    bits = np.concatenate([b for b, _ in parts])
    labels = np.concatenate([l for _, l in parts])
    del dim
    return bits, labels, rows, cols


def perceptron_train(
    examples: ExampleSource,
    cfg: LearnerConfig = LearnerConfig(),
    rows: int | None = None,
    cols: int | None = None,
    chunk: int = DEFAULT_CHUNK,
) -> Halfspace:
    """Train a halfspace on {0,1} features with a bias folded into theta.

    Mistake-driven updates on the +-1 margin, visiting examples in an order
    reshuffled each epoch from cfg.shuffle_seed.  With `averaged` the
    returned weights are the average over all per-step states (computed via
    the weighted-update identity, so only mistakes touch the accumulators).
    """
    bits, labels, hdr_rows, hdr_cols = _load_examples(examples, chunk)
    if rows is None or cols is None:
        if hdr_rows is not None:
            rows, cols = hdr_rows, hdr_cols
        else:
            rows, cols = 1, bits.shape[1]
    if rows * cols != bits.shape[1]:
        raise ValueError(
            f"grid {rows}x{cols} does not match feature width {bits.shape[1]}"
        )
    n, dim = bits.shape
    x = bits.astype(np.float64)
    t = labels.astype(np.float64) * 2.0 - 1.0

    w = np.zeros(dim)
    bias = 0.0
    u = np.zeros(dim)
    u_bias = 0.0
    rng = CursorRng(cfg.shuffle_seed, purpose_stream(0, PURPOSE_LEARN))
    step = 0
    total = n * cfg.epochs
    for epoch in range(cfg.epochs):
        order = rng.shuffle(list(range(n)))
        eta = cfg.rate if cfg.schedule == "constant" else cfg.rate / (epoch + 1)
        for i in order:
            step += 1
            margin = x[i] @ w + bias
            pred = 1.0 if margin >= 0.0 else -1.0
            if pred != t[i]:
                delta = eta * t[i]
                w += delta * x[i]
                bias += delta
                u += (step * delta) * x[i]
                u_bias += step * delta
    if cfg.averaged:
        w = w * ((total + 1) / total) - u / total
        bias = bias * ((total + 1) / total) - u_bias / total
    return Halfspace.from_grid(w.reshape(rows, cols), -bias)


# ---------------------------------------------------------------------------
# majority-statistic closed forms


def matrix_sum_pmf(dist: ColumnSource, r: int) -> np.ndarray:
    """PMF of the total bit count over r i.i.d. columns (length r*k + 1)."""
    if r < 1:
        raise ValueError(f"column count must be positive, got {r}")
    base = column_sum_pmf(dist)
    acc = None
    power = base
    exp = r
    while exp:
        if exp & 1:
            acc = power if acc is None else np.convolve(acc, power)
        exp >>= 1
        if exp:
            power = np.convolve(power, power)
    return acc


def majority_threshold(spec: TestSpec) -> tuple[int, float]:
    """Integer threshold maximizing the exact majority acceptance.

    The majority halfspace accepts iff the total bit count reaches theta;
    acceptance = 1/2 + (P1[S >= theta] - P0[S >= theta])/2, maximized over
    integer thresholds (the Kolmogorov point of the two sum laws).
    """
    pmf0 = matrix_sum_pmf(spec.d0.noisy(spec.gamma), spec.r)
    pmf1 = matrix_sum_pmf(spec.d1.noisy(spec.gamma), spec.r)
    # tail[t] = P[S >= t] for t = 0 .. r*k + 1
    tail0 = np.concatenate([np.cumsum(pmf0[::-1])[::-1], [0.0]])
    tail1 = np.concatenate([np.cumsum(pmf1[::-1])[::-1], [0.0]])
    diff = tail1 - tail0
    theta = int(np.argmax(diff))
    return theta, 0.5 + 0.5 * float(diff[theta])


def exact_majority_gap(spec: TestSpec) -> float:
    """max over thresholds of |E[h | b=1] - E[h | b=0]| for majority h."""
    theta, acc = majority_threshold(spec)
    del theta
    return 2.0 * acc - 1.0


def majority_halfspace(spec: TestSpec, theta: int | None = None) -> Halfspace:
    """All-ones weights over the k x r grid at the optimal integer threshold."""
    if theta is None:
        theta, _ = majority_threshold(spec)
    return Halfspace.from_grid(np.ones((spec.k, spec.r)), float(theta))


def linear_statistic_gap_exact(spec: TestSpec, coeffs: Sequence[float]) -> Fraction:
    """E[sum c_i y_i | b=1] - E[... | b=0], exactly zero for matched pairs.

    Degree-1 noisy moments agree coordinate-wise whenever the base pair
    matches first moments, so the difference is coeff-sum times an exact
    zero.
    """
    m1 = spec.d1.noisy(spec.gamma).moment_of_size_exact(1)
    m0 = spec.d0.noisy(spec.gamma).moment_of_size_exact(1)
    if m1 is None or m0 is None:
        raise ValueError("exact weights unavailable; build the pair via the solver")
    total = Fraction(0)
    for c in coeffs:
        total += Fraction(str(float(c)))
    return total * (m1 - m0)


def centered_threshold(spec: TestSpec, weights: np.ndarray) -> float:
    """theta equal to the common expected margin (same under both labels)."""
    base = spec.d0.noisy(spec.gamma).moment_of_size(1)
    return float(np.sum(weights)) * base


def random_regular_halfspace(
    spec: TestSpec, master_seed: int, stream_id: int = 0, trial: int = 0
) -> Halfspace:
    """Centered probe with i.i.d. uniform(-1/2, 1/2) weights.

    Bounded weights over a large grid keep every coordinate's share of the
    norm small, and the centered threshold makes acceptance hover near 1/2
    up to the conditional-mean gap under audit.
    """
    dim = spec.dim
    rng = CursorRng(
        master_seed, purpose_stream(stream_id, PURPOSE_MC), index=trial * dim
    )
    w = rng.uniforms(dim) - 0.5
    return Halfspace.from_grid(
        w.reshape(spec.k, spec.r), centered_threshold(spec, w)
    )


# ---------------------------------------------------------------------------
# stream generation


def _spec_meta(spec: TestSpec, kind: str, master_seed: int, stream_id: int) -> str:
    parts = [
        f"kind={kind}",
        f"k={spec.k}",
        f"r={spec.r}",
        f"gamma={spec.gamma!r}",
        f"seed={master_seed}",
        f"stream={stream_id}",
    ]
    return " ".join(parts)


def write_dict_test_stream(
    path: str,
    spec: TestSpec,
    count: int,
    master_seed: int,
    stream_id: int = 0,
    chunk: int = DEFAULT_CHUNK,
    extra_meta: str = "",
) -> None:
    meta = _spec_meta(spec, "dict-test", master_seed, stream_id)
    if extra_meta:
        meta += " " + extra_meta
    with StreamWriter(path, spec.k, spec.r, meta=meta) as out:
        for start in range(0, count, chunk):
            n = min(chunk, count - start)
            bits, labels = dict_test_batch(spec, master_seed, stream_id, start, n)
            out.append_batch(bits, labels)


def write_reduction_stream(
    path: str,
    inst: LabelCoverInstance,
    spec: TestSpec,
    count: int,
    master_seed: int,
    stream_id: int = 0,
    chunk: int = DEFAULT_CHUNK,
    extra_meta: str = "",
) -> None:
    """Unique instances use the permuted-grid sampler, general ones the
    per-target-noise sampler; the meta line records which."""
    if inst.unique:
        sampler, kind, cols = ug_reduce_batch, "ug-reduce", inst.m
    else:
        sampler, kind, cols = lc_reduce_batch, "lc-reduce", inst.m
    meta = _spec_meta(spec, kind, master_seed, stream_id) + (
        f" vertices={inst.num_vertices} edges={inst.num_edges} m={inst.m} n={inst.n}"
    )
    if extra_meta:
        meta += " " + extra_meta
    with StreamWriter(path, inst.num_vertices, cols, meta=meta) as out:
        for start in range(0, count, chunk):
            n = min(chunk, count - start)
            bits, labels = sampler(inst, spec, master_seed, stream_id, start, n)
            out.append_batch(bits, labels)


# ---------------------------------------------------------------------------
# report records


@dataclass(frozen=True)
class CheckRecord:
    """One verified (or reported) quantity: id, params, statistic, verdict."""

    check_id: str
    params: tuple[tuple[str, str], ...]
    statistic: float
    target: str
    status: str

    def __post_init__(self):
        if self.status not in ("pass", "fail", "exploratory"):
            raise ValueError(f"unknown record status {self.status!r}")

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def line(self) -> str:
        params = ",".join(f"{k}={v}" for k, v in self.params)
        return "\t".join(
            ["check", self.check_id, params, repr(self.statistic), self.target, self.status]
        )


def make_record(
    check_id: str,
    params: dict,
    statistic: float,
    target: str,
    ok: bool | None,
) -> CheckRecord:
    """ok=None marks the record exploratory (reported, not asserted)."""
    status = "exploratory" if ok is None else ("pass" if ok else "fail")
    return CheckRecord(
        check_id=check_id,
        params=tuple((str(k), str(v)) for k, v in params.items()),
        statistic=float(statistic),
        target=target,
        status=status,
    )


def parse_record(line: str) -> CheckRecord:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 6 or fields[0] != "check":
        raise ValueError(f"not a check record: {line!r}")
    _, check_id, params_text, stat_text, target, status = fields
    params = tuple(
        tuple(item.split("=", 1)) for item in params_text.split(",") if item
    )
    return CheckRecord(
        check_id=check_id,
        params=params,  # type: ignore[arg-type]
        statistic=float(stat_text),
        target=target,
        status=status,
    )


def write_records(records: Iterable[CheckRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.line() + "\n")


def read_records(path: str) -> list[CheckRecord]:
    """Parse check lines; blank lines and '#' comments (config echoes) skip."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                records.append(parse_record(line))
    return records


@dataclass(frozen=True)
class ReportSummary:
    total: int
    passed: int
    failed: int
    exploratory: int

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def line(self) -> str:
        verdict = "OK" if self.ok else "FAIL"
        return (
            f"summary\ttotal={self.total}\tpass={self.passed}"
            f"\tfail={self.failed}\texploratory={self.exploratory}\t{verdict}"
        )


def summarize_records(records: Iterable[CheckRecord]) -> ReportSummary:
    total = passed = failed = exploratory = 0
    for rec in records:
        total += 1
        if rec.status == "pass":
            passed += 1
        elif rec.status == "fail":
            failed += 1
        else:
            exploratory += 1
    return ReportSummary(total, passed, failed, exploratory)


def fold_record_files(paths: Sequence[str]) -> tuple[list[CheckRecord], ReportSummary]:
    records: list[CheckRecord] = []
    for path in paths:
        records.extend(read_records(path))
    return records, summarize_records(records)


# ---------------------------------------------------------------------------
# experiment plans


@dataclass(frozen=True)
class ExperimentPlan:
    """A named bundle of runs producing CheckRecords.

    kinds: 'completeness' (planted disjunction vs the closed form),
    'soundness' (majority + optional random/learned probes, each decodable
    when an instance and decoder are present), 'decode-planted' (the
    end-to-end recovery check).
    """

    kind: str
    spec: TestSpec
    samples: int
    master_seed: int
    stream_id: int = 0
    chunk: int = DEFAULT_CHUNK
    instance: LabelCoverInstance | None = None
    labeling: Labeling | None = None
    decoder: DecoderSpec | None = None
    threshold: float | None = None
    random_probes: int = 0
    learner: LearnerConfig | None = None
    sigma_rule: float = 4.0

    def __post_init__(self):
        if self.kind not in ("completeness", "soundness", "decode-planted"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.samples < 1 and self.kind != "decode-planted":
            raise ValueError("sample count must be positive")


def _plan_sampler(plan: ExperimentPlan):
    if plan.instance is None:
        return lambda start, n: dict_test_batch(
            plan.spec, plan.master_seed, plan.stream_id, start, n
        )
    inst = plan.instance
    sampler = ug_reduce_batch if inst.unique else lc_reduce_batch
    return lambda start, n: sampler(
        inst, plan.spec, plan.master_seed, plan.stream_id, start, n
    )


def _plan_params(plan: ExperimentPlan, **extra) -> dict:
    params = {
        "k": plan.spec.k,
        "r": plan.spec.r,
        "gamma": f"{plan.spec.gamma:.3g}",
        "n": plan.samples,
        "seed": plan.master_seed,
    }
    if plan.instance is not None:
        params["V"] = plan.instance.num_vertices
        params["E"] = plan.instance.num_edges
    params.update(extra)
    return params


def _measure(plan: ExperimentPlan, hypothesis: Hypothesis) -> AgreementReport:
    sampler = _plan_sampler(plan)
    count = matches = n1 = hits1 = 0
    for start in range(0, plan.samples, plan.chunk):
        n = min(plan.chunk, plan.samples - start)
        bits, labels = sampler(start, n)
        preds = hypothesis.evaluate(bits)
        count += labels.size
        matches += int((preds == labels).sum())
        ones = labels == 1
        n1 += int(ones.sum())
        hits1 += int(preds[ones].sum())
    return AgreementReport(
        hypothesis=hypothesis_id(hypothesis),
        count=count,
        matches=matches,
        n1=n1,
        hits1=hits1,
        provenance=f"sampled seed={plan.master_seed} stream={plan.stream_id}",
    )


def _identity_record(plan: ExperimentPlan, rep: AgreementReport, tag: str) -> CheckRecord:
    residual = rep.identity_residual()
    return make_record(
        f"{tag}.balance-identity",
        _plan_params(plan),
        residual,
        "<= 1e-12",
        residual <= 1e-12,
    )


def _probe_records(
    plan: ExperimentPlan, name: str, hypothesis: Hypothesis
) -> list[CheckRecord]:
    """Soundness probe: measured gap (asserted when a threshold is set),
    plus decode-and-weak-satisfaction when an instance and decoder exist."""
    rep = _measure(plan, hypothesis)
    # conditional means each carry ~ sqrt(1/4 / (n/2)) noise; their difference
    # carries twice the pooled binomial sigma
    gap_sigma = 2.0 * binomial_sigma(0.5, rep.count)
    records = [
        make_record(
            f"soundness.{name}.gap",
            _plan_params(plan, hyp=rep.hypothesis),
            abs(rep.gap),
            (
                f"<= {plan.threshold!r} + {plan.sigma_rule}*sigma({gap_sigma:.2e})"
                if plan.threshold is not None
                else "reported"
            ),
            (
                abs(rep.gap) <= plan.threshold + plan.sigma_rule * gap_sigma
                if plan.threshold is not None
                else None
            ),
        ),
        _identity_record(plan, rep, f"soundness.{name}"),
    ]
    if plan.instance is not None and plan.decoder is not None:
        h = hypothesis.as_halfspace() if isinstance(hypothesis, Disjunction) else hypothesis
        decode = weak_sat_rate_of_decoder(
            h, plan.decoder, plan.instance, plan.master_seed, plan.stream_id
        )
        records.append(
            make_record(
                f"soundness.{name}.decoded-weak-rate",
                _plan_params(plan, t=plan.decoder.t, trials=plan.decoder.trials),
                decode.weak_rate,
                "reported",
                None,
            )
        )
    return records


def run_experiment(plan: ExperimentPlan) -> list[CheckRecord]:
    if plan.kind == "completeness":
        if plan.instance is not None and plan.labeling is None:
            raise ValueError("completeness on an instance needs the planted labeling")
        if plan.instance is not None:
            hyp: Hypothesis = planted_disjunction(plan.labeling)
        else:
            hyp = Disjunction(
                literals=frozenset((i, 0) for i in range(plan.spec.k)),
                rows=plan.spec.k,
                cols=plan.spec.r,
            )
        predicted = or_acceptance_closed_form(plan.spec)
        rep = _measure(plan, hyp)
        sigma = binomial_sigma(predicted, rep.count)
        tol = plan.sigma_rule * sigma + plan.sigma_rule / rep.count
        records = [
            make_record(
                "completeness.acceptance",
                _plan_params(plan, predicted=f"{predicted:.6f}"),
                rep.balanced_acceptance,
                f"within {tol:.2e} of {predicted:.6f}",
                abs(rep.balanced_acceptance - predicted) <= tol,
            ),
            _identity_record(plan, rep, "completeness"),
        ]
        if plan.threshold is not None:
            records.append(
                make_record(
                    "completeness.floor",
                    _plan_params(plan),
                    rep.rate,
                    f">= {plan.threshold!r}",
                    rep.rate >= plan.threshold,
                )
            )
        return records

    if plan.kind == "soundness":
        if plan.instance is None:
            probe = majority_halfspace(plan.spec)
        else:
            # all-ones probe over the instance grid; off-edge blocks are zero
            # so for unique instances the bit-sum law (and the optimal integer
            # threshold) is exactly the grid test's
            theta, _ = majority_threshold(plan.spec)
            scale = 1.0 if plan.instance.unique else plan.instance.m / plan.instance.n
            probe = Halfspace.from_grid(
                np.ones((plan.instance.num_vertices, plan.instance.m)),
                theta * scale,
            )
        records = _probe_records(plan, "majority", probe)
        for trial in range(plan.random_probes):
            probe = random_regular_halfspace(
                plan.spec, plan.master_seed, plan.stream_id, trial
            )
            sub = replace(plan, threshold=None)
            records.extend(_probe_records(sub, f"random{trial}", probe))
        if plan.learner is not None:
            sampler = _plan_sampler(plan)
            bits, labels = sampler(0, min(plan.samples, 20000))
            rows = plan.spec.k if plan.instance is None else plan.instance.num_vertices
            learned = perceptron_train(
                (bits, labels), plan.learner, rows=rows, cols=bits.shape[1] // rows
            )
            sub = replace(plan, threshold=None)
            learned_records = _probe_records(sub, "learned", learned)
            rep = _measure(sub, learned)
            trivial = max(rep.n1, rep.n0) / rep.count
            learned_records.append(
                make_record(
                    "soundness.learned.vs-trivial",
                    _plan_params(plan),
                    rep.rate - trivial,
                    "reported (learned minus best-constant agreement)",
                    None,
                )
            )
            records.extend(learned_records)
        return records

    # decode-planted
    if plan.instance is None or plan.labeling is None or plan.decoder is None:
        raise ValueError("decode-planted needs instance, labeling, and decoder")
    h = planted_disjunction(plan.labeling).as_halfspace()
    decode = weak_sat_rate_of_decoder(
        h, plan.decoder, plan.instance, plan.master_seed, plan.stream_id
    )
    recovered = decode_labeling(
        h, plan.decoder, plan.master_seed, plan.stream_id, trial=0
    )
    exact = bool(
        np.array_equal(recovered.assignment, plan.labeling.assignment)
    )
    return [
        make_record(
            "decode.weak-rate",
            _plan_params(plan, t=plan.decoder.t, trials=plan.decoder.trials),
            decode.weak_rate,
            ">= 1.0" if plan.decoder.t == 1 else "reported",
            decode.weak_rate >= 1.0 if plan.decoder.t == 1 else None,
        ),
        make_record(
            "decode.recovers-planted",
            _plan_params(plan, t=plan.decoder.t),
            1.0 if exact else 0.0,
            "== 1 (t=1 list decoding is exact)" if plan.decoder.t == 1 else "reported",
            exact if plan.decoder.t == 1 else None,
        ),
    ]
