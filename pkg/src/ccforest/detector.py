"""Partitioned random-forest ensemble for flagging coincidentally correct tests.

Passing tests are processed in chunks.  For each chunk the remaining passing
tests are split at random into ``p`` near-equal partitions; each partition
plus every failing test trains one forest, and each forest labels every test
in the chunk.  A chunk test whose "failing" labels are at least as many as
its "passing" labels is reported as coincidentally correct.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ChunksNotPartition, InsufficientPassing, NoFailingTests
from .features import ComboVectorizer, PrincipalComponents
from .forest import FAIL, PASS, RandomForest
from .spectra import CoverageRun

__all__ = [
    "DetectionParams",
    "TestVotes",
    "ChunkRecord",
    "DetectionReport",
    "tally",
    "detect",
    "detect_fixed_chunks",
    "CCDetector",
]


@dataclass(frozen=True)
class DetectionParams:
    chunk_size: int = 10
    partitions: int = 3
    combo: int = 1
    pca_mode: str | None = "variance"
    pca_fraction: float = 0.6
    n_trees: int = 100
    max_features: int | float | str | None = "sqrt"
    max_depth: int | None = None
    min_samples_split: int = 2
    class_weight: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if self.partitions < 2:
            raise ValueError("partitions must be at least 2 for majority voting")
        if self.combo not in (1, 2, 3):
            raise ValueError("combo must be 1, 2 or 3")

    def forest_params(self) -> dict:
        return dict(
            n_trees=self.n_trees,
            max_features=self.max_features,
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
            class_weight=self.class_weight,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TestVotes:
    labels: tuple[int, ...]
    cc_num: int
    ncc_num: int

    __test__ = False  # not a pytest class

    @property
    def is_cc(self) -> bool:
        return self.cc_num >= self.ncc_num


def tally(labels: Iterable[int]) -> TestVotes:
    """Count partition labels; a tie counts as coincidentally correct."""
    labels = tuple(int(v) for v in labels)
    cc = sum(1 for v in labels if v == FAIL)
    return TestVotes(labels, cc, len(labels) - cc)


@dataclass(frozen=True)
class ChunkRecord:
    tests: tuple[str, ...]
    partitions: tuple[tuple[str, ...], ...]
    training: tuple[tuple[str, ...], ...]

    @property
    def p(self) -> int:
        return len(self.partitions)


@dataclass(frozen=True)
class DetectionReport:
    ct: frozenset[str]
    per_test: Mapping[str, TestVotes]
    chunks: tuple[ChunkRecord, ...]
    params: DetectionParams
    run_digest: str
    program_id: str = ""
    failing: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "program_id": self.program_id,
            "run_digest": self.run_digest,
            "params": self.params.to_dict(),
            "failing": list(self.failing),
            "chunks": [
                {
                    "tests": list(c.tests),
                    "p": c.p,
                    "partitions": [list(part) for part in c.partitions],
                    "training": [list(t) for t in c.training],
                }
                for c in self.chunks
            ],
            "per_test": {
                tid: {"labels": list(v.labels), "cc_num": v.cc_num, "ncc_num": v.ncc_num}
                for tid, v in sorted(self.per_test.items())
            },
            "ct": sorted(self.ct),
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent)

    @classmethod
    def from_dict(cls, doc: dict) -> "DetectionReport":
        return cls(
            ct=frozenset(doc["ct"]),
            per_test={
                tid: TestVotes(tuple(v["labels"]), v["cc_num"], v["ncc_num"])
                for tid, v in doc["per_test"].items()
            },
            chunks=tuple(
                ChunkRecord(
                    tuple(c["tests"]),
                    tuple(tuple(p) for p in c["partitions"]),
                    tuple(tuple(t) for t in c["training"]),
                )
                for c in doc["chunks"]
            ),
            params=DetectionParams(**doc["params"]),
            run_digest=doc["run_digest"],
            program_id=doc.get("program_id", ""),
            failing=tuple(doc.get("failing", ())),
        )


def _derived_seed(*parts) -> int:
    """64-bit seed from integers and strings, stable across platforms."""
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")


def _label_chunk(chunk_traces, train_traces, train_y, params: DetectionParams, seed: int):
    vec = ComboVectorizer(k=params.combo).fit(train_traces)
    X_train = vec.transform(train_traces).astype(np.float64)
    X_chunk = vec.transform(chunk_traces).astype(np.float64)
    if X_train.shape[1] == 0:
        # no combos of this length in training: a constant column keeps the forest well-posed
        X_train = np.zeros((len(train_traces), 1))
        X_chunk = np.zeros((len(chunk_traces), 1))
    if params.pca_mode is not None:
        pca = PrincipalComponents(mode=params.pca_mode, fraction=params.pca_fraction).fit(X_train)
        X_train = pca.transform(X_train)
        X_chunk = pca.transform(X_chunk)
    forest = RandomForest(seed=seed, **params.forest_params()).fit(X_train, train_y)
    return forest.predict(X_chunk)


def _run_chunks(run: CoverageRun, chunks: Sequence[Sequence[str]], params: DetectionParams) -> DetectionReport:
    failing = run.failing
    if not failing:
        raise NoFailingTests(f"run {run.program_id!r} has no failing tests")
    passing_ids = [t.test_id for t in run.passing]
    traces = {t.test_id: t.sequence for t in run.tests}
    fail_ids = tuple(t.test_id for t in failing)

    records = []
    per_test: dict[str, TestVotes] = {}
    for chunk in chunks:
        chunk = tuple(chunk)
        members = set(chunk)
        remaining = np.array([tid for tid in passing_ids if tid not in members], dtype=object)
        if len(remaining) < 2:
            raise InsufficientPassing(
                f"chunk of {len(chunk)} leaves {len(remaining)} passing tests; need at least 2 for voting"
            )
        chunk_seed = _derived_seed(params.seed, sorted(chunk))
        rng = np.random.Generator(np.random.PCG64(chunk_seed))
        shuffled = remaining[rng.permutation(len(remaining))]
        p = min(params.partitions, len(remaining))
        partitions = tuple(tuple(part.tolist()) for part in np.array_split(shuffled, p))

        chunk_traces = [traces[tid] for tid in chunk]
        labels = np.empty((p, len(chunk)), dtype=np.int64)
        training = []
        for m, part in enumerate(partitions):
            train_ids = part + fail_ids
            training.append(train_ids)
            train_y = np.array([PASS] * len(part) + [FAIL] * len(fail_ids))
            labels[m] = _label_chunk(
                chunk_traces, [traces[t] for t in train_ids], train_y, params,
                _derived_seed(chunk_seed, m),
            )
        for j, tid in enumerate(chunk):
            per_test[tid] = tally(labels[:, j])
        records.append(ChunkRecord(chunk, partitions, tuple(training)))

    ct = frozenset(tid for tid, v in per_test.items() if v.is_cc)
    return DetectionReport(
        ct=ct,
        per_test=per_test,
        chunks=tuple(records),
        params=params,
        run_digest=run.digest(),
        program_id=run.program_id,
        failing=fail_ids,
    )


def _check_passing_pool(run: CoverageRun) -> list[str]:
    if not run.failing:
        raise NoFailingTests(f"run {run.program_id!r} has no failing tests")
    ids = [t.test_id for t in run.passing]
    if len(ids) < 3:
        raise InsufficientPassing(f"{len(ids)} passing tests; need a chunk plus two training partitions")
    return ids


def detect(run: CoverageRun, params: DetectionParams | None = None) -> DetectionReport:
    """Chunk the passing tests in seeded random order and vote on each chunk.

    The chunk size is clamped so that, where the pool allows, enough passing
    tests remain to fill every partition; the last chunk may be smaller than
    the others.
    """
    params = params or DetectionParams()
    ids = _check_passing_pool(run)
    k = min(params.chunk_size, max(1, len(ids) - params.partitions))
    rng = np.random.Generator(np.random.PCG64(_derived_seed(params.seed, "chunk-order")))
    order = [ids[i] for i in rng.permutation(len(ids))]
    chunks = [order[i:i + k] for i in range(0, len(order), k)]
    return _run_chunks(run, chunks, params)


def detect_fixed_chunks(run: CoverageRun, chunks: Sequence[Sequence[str]],
                        params: DetectionParams | None = None) -> DetectionReport:
    """Same voting as :func:`detect` with caller-supplied chunks.

    Randomness for each chunk is keyed on its membership, so reordering the
    chunks does not change the outcome.
    """
    params = params or DetectionParams()
    ids = _check_passing_pool(run)
    pool = set(ids)
    seen: set[str] = set()
    for chunk in chunks:
        if not chunk:
            raise ChunksNotPartition("empty chunk")
        for tid in chunk:
            if tid not in pool:
                raise ChunksNotPartition(f"{tid!r} is not a passing test of the run")
            if tid in seen:
                raise ChunksNotPartition(f"{tid!r} appears in more than one chunk")
            seen.add(tid)
    if seen != pool:
        missing = sorted(pool - seen)
        raise ChunksNotPartition(f"passing tests not covered by any chunk: {missing[:5]}")
    return _run_chunks(run, chunks, params)


class CCDetector(BaseEstimator):
    """Estimator wrapper around :func:`detect`.

    ``fit`` takes a :class:`~ccforest.spectra.CoverageRun`; the detected set
    is exposed as ``ct_`` and the full report as ``report_``.
    """

    def __init__(self, chunk_size=10, partitions=3, combo=1, pca_mode="variance",
                 pca_fraction=0.6, n_trees=100, max_features="sqrt", max_depth=None,
                 min_samples_split=2, class_weight=None, seed=0):
        self.chunk_size = chunk_size
        self.partitions = partitions
        self.combo = combo
        self.pca_mode = pca_mode
        self.pca_fraction = pca_fraction
        self.n_trees = n_trees
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.class_weight = class_weight
        self.seed = seed

    def fit(self, run: CoverageRun, y=None, chunks=None):
        params = DetectionParams(**self.get_params())
        if chunks is None:
            self.report_ = detect(run, params)
        else:
            self.report_ = detect_fixed_chunks(run, chunks, params)
        self.ct_ = self.report_.ct
        return self

    def predict(self, run: CoverageRun) -> np.ndarray:
        """+1 for each passing test flagged as coincidentally correct, else -1."""
        check_is_fitted(self, "report_")
        if run.digest() != self.report_.run_digest:
            raise ValueError("run differs from the one the detector was fitted on")
        return np.array([FAIL if t.test_id in self.ct_ else PASS for t in run.passing])

    def fit_predict(self, run: CoverageRun, y=None) -> np.ndarray:
        return self.fit(run).predict(run)
