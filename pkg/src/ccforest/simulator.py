"""Synthetic coverage runs with known coincidentally correct tests.

The generated program is a set of three-statement blocks plus, for each
fault, a reserved branch ``a, b, fault, c`` that only fault-reaching inputs
execute.  Clean passing tests concatenate random blocks and never enter a
fault branch.  Failing tests are clean
traces with the signature of one fault spliced in one or more times.
Coincidentally correct (CC) tests are passing tests built like failing ones;
``signature_strength`` controls how much of the signature they keep.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .exceptions import InfeasibleParams, RunMismatch
from .spectra import (
    CoverageRun,
    ExecutionTrace,
    Verdict,
    dumps_coverage,
    dumps_faults,
    dumps_instrumentation,
)

__all__ = ["SimParams", "simulate", "write_simulation", "load_truth", "score", "Score"]

_SIG_LEN = 4
_BLOCK = 3
_MAX_REPS = 3


@dataclass(frozen=True)
class SimParams:
    statement_count: int = 60
    n_passing: int = 200
    n_failing: int = 20
    cc_rate: float = 0.1
    fault_count: int = 1
    min_trace_length: int = 10
    max_trace_length: int = 30
    signature_strength: float = 0.8
    seed: int = 0
    program_id: str = "sim"

    @property
    def n_cc(self) -> int:
        return math.floor(self.cc_rate * self.n_passing)

    def validate(self) -> None:
        if self.n_failing < 1:
            raise InfeasibleParams("n_failing must be at least 1")
        if self.n_passing < 0:
            raise InfeasibleParams("n_passing must be non-negative")
        if not 0 <= self.cc_rate < 1:
            raise InfeasibleParams("cc_rate must be in [0, 1)")
        if self.fault_count < 1:
            raise InfeasibleParams("fault_count must be at least 1")
        if not 0 < self.signature_strength <= 1:
            raise InfeasibleParams("signature_strength must be in (0, 1]")
        if self.min_trace_length < _SIG_LEN + 1:
            raise InfeasibleParams(
                f"min_trace_length must be at least {_SIG_LEN + 1} to hold a fault signature"
            )
        if self.max_trace_length < self.min_trace_length:
            raise InfeasibleParams("max_trace_length must be >= min_trace_length")
        clean = self.statement_count - _SIG_LEN * self.fault_count
        if clean < 2 * _BLOCK:
            raise InfeasibleParams(
                f"statement_count leaves {clean} non-faulty statements; need at least {2 * _BLOCK}"
            )

    def to_dict(self) -> dict:
        return asdict(self)


def _clean_trace(rng, blocks, length):
    out: list[int] = []
    while len(out) < length:
        out.extend(blocks[rng.integers(len(blocks))])
    return out[:length]


def _with_signature(rng, blocks, length, signature, strength, reps):
    """Clean trace with ``reps`` copies of ``signature`` spliced in.

    Non-fault signature statements survive with probability ``strength``;
    the fault statement (index 2) is always kept.
    """
    pieces = []
    for _ in range(reps):
        keep = rng.random(len(signature)) < strength
        keep[2] = True
        pieces.append([s for s, k in zip(signature, keep) if k])
    base = _clean_trace(rng, blocks, max(0, length - sum(len(p) for p in pieces)))
    cuts = np.sort(rng.integers(0, len(base) + 1, size=reps))
    out, prev = [], 0
    for cut, piece in zip(cuts, pieces):
        out.extend(base[prev:cut])
        out.extend(piece)
        prev = cut
    out.extend(base[prev:])
    return out


def simulate(params: SimParams | None = None) -> tuple[CoverageRun, frozenset[str]]:
    """Generate a run and the ids of its injected CC tests."""
    params = params or SimParams()
    params.validate()
    rng = np.random.default_rng(params.seed)
    S = params.statement_count

    reserved = rng.choice(np.arange(1, S + 1), _SIG_LEN * params.fault_count, replace=False)
    signatures = {}
    for chunk in reserved.reshape(params.fault_count, _SIG_LEN):
        a, b, f, c = (int(s) for s in chunk)
        signatures[f] = [a, b, f, c]
    faults = sorted(signatures)
    taken = set(int(s) for s in reserved)
    clean = [s for s in range(1, S + 1) if s not in taken]
    blocks = [clean[i:i + _BLOCK] for i in range(0, len(clean), _BLOCK)]

    lo, hi = params.min_trace_length, params.max_trace_length
    kinds = (["fail"] * params.n_failing + ["cc"] * params.n_cc
             + ["pass"] * (params.n_passing - params.n_cc))
    kinds = [kinds[i] for i in rng.permutation(len(kinds))]
    width = len(str(len(kinds)))

    tests, truth = [], set()
    for i, kind in enumerate(kinds, start=1):
        tid = f"T{i:0{width}d}"
        length = int(rng.integers(lo, hi + 1))
        if kind == "pass":
            seq = _clean_trace(rng, blocks, length)
            verdict = Verdict.PASSING
        else:
            sig = signatures[faults[rng.integers(len(faults))]]
            reps = int(rng.integers(1, min(_MAX_REPS, (length - 1) // _SIG_LEN) + 1))
            if kind == "fail":
                seq = _with_signature(rng, blocks, length, sig, 1.0, reps)
                verdict = Verdict.FAILING
            else:
                seq = _with_signature(rng, blocks, length, sig, params.signature_strength, reps)
                verdict = Verdict.PASSING
                truth.add(tid)
        tests.append(ExecutionTrace(tid, tuple(seq), verdict))

    run = CoverageRun(
        program_id=params.program_id,
        statement_count=S,
        tests=tuple(tests),
        instrumentation={s: (f"{params.program_id}.java", s) for s in range(1, S + 1)},
        faulty_statements=frozenset(faults),
    )
    return run, frozenset(truth)


def write_simulation(run: CoverageRun, truth, directory) -> dict[str, Path]:
    """Write coverage, instrumentation, faults and truth files; returns their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "coverage": directory / "coverage.csv",
        "instrumentation": directory / "instrumentation.csv",
        "faults": directory / "faults.txt",
        "truth": directory / "truth.txt",
    }
    paths["coverage"].write_text(dumps_coverage(run), encoding="utf-8")
    paths["instrumentation"].write_text(dumps_instrumentation(run), encoding="utf-8")
    paths["faults"].write_text(dumps_faults(run), encoding="utf-8")
    paths["truth"].write_text("".join(f"{t}\n" for t in sorted(truth)), encoding="utf-8")
    return paths


def load_truth(path) -> frozenset[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(s.strip() for s in lines if s.strip() and not s.lstrip().startswith("#"))


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def score(report, ground_truth, run: CoverageRun | None = None) -> Score:
    """Precision/recall/F1 of ``report.ct`` against ``ground_truth``.

    With nothing detected precision is 1; with nothing to find recall is 1.
    """
    if run is not None and run.digest() != report.run_digest:
        raise RunMismatch("report was produced from a different run")
    truth = frozenset(ground_truth)
    unknown = truth - set(report.per_test)
    if unknown:
        raise RunMismatch(f"truth lists tests the report never labelled: {sorted(unknown)[:5]}")
    ct = frozenset(report.ct)
    tp = len(ct & truth)
    fp = len(ct - truth)
    fn = len(truth - ct)
    precision = tp / (tp + fp) if ct else 1.0
    recall = tp / (tp + fn) if truth else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Score(precision, recall, f1, tp, fp, fn)
