"""Spectrum-based fault localization cost, and the effect of flipping or
trimming suspected coincidentally correct tests.

Coverage here is binary: a statement is covered by a test if it appears
anywhere in the test's trace.  Cost is the fraction of the statement
universe examined, in descending suspiciousness order, up to and including
the best-ranked faulty statement.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import NoFailingTests, UnknownTestId
from .spectra import CoverageRun, ExecutionTrace, Verdict

__all__ = [
    "SpectraCounts",
    "spectra_counts",
    "ochiai",
    "tarantula",
    "suspiciousness",
    "rank_cost",
    "cost",
    "effective_run",
    "CostReport",
    "apply_strategy",
    "cost_table_rows",
    "write_cost_table",
    "FORMULAS",
    "TIE_POLICIES",
    "STRATEGIES",
    "VARIANTS",
]

TIE_POLICIES = ("worst", "best", "average")
STRATEGIES = ("none", "flip", "trim")
VARIANTS = ("one", "all")
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class SpectraCounts:
    """Per-statement hit counts; index ``i`` is statement ``i + 1``."""

    ef: np.ndarray
    ep: np.ndarray
    F: int
    P: int

    @property
    def nf(self) -> np.ndarray:
        return self.F - self.ef

    @property
    def np(self) -> np.ndarray:
        return self.P - self.ep


def spectra_counts(run: CoverageRun) -> SpectraCounts:
    n = run.statement_count
    ef = np.zeros(n, dtype=np.int64)
    ep = np.zeros(n, dtype=np.int64)
    F = P = 0
    for t in run.tests:
        cols = np.fromiter(t.covered, dtype=np.int64) - 1
        if t.is_failing:
            ef[cols] += 1
            F += 1
        else:
            ep[cols] += 1
            P += 1
    return SpectraCounts(ef, ep, F, P)


def ochiai(ef, ep, F, P=None):
    ef = np.asarray(ef, dtype=np.float64)
    ep = np.asarray(ep, dtype=np.float64)
    denom = np.sqrt(F * (ef + ep))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ef > 0, ef / np.where(denom > 0, denom, 1.0), 0.0)


def tarantula(ef, ep, F, P):
    ef = np.asarray(ef, dtype=np.float64)
    ep = np.asarray(ep, dtype=np.float64)
    fail_ratio = ef / F
    pass_ratio = ep / P if P > 0 else np.zeros_like(ep)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ef > 0, fail_ratio / (fail_ratio + pass_ratio), 0.0)


FORMULAS = {"ochiai": ochiai, "tarantula": tarantula}


def suspiciousness(counts: SpectraCounts, formula: str = "ochiai") -> np.ndarray:
    if counts.F < 1:
        raise NoFailingTests("suspiciousness needs at least one failing test")
    try:
        fn = FORMULAS[formula]
    except KeyError:
        raise ValueError(f"unknown formula {formula!r}; expected one of {sorted(FORMULAS)}") from None
    return fn(counts.ef, counts.ep, counts.F, counts.P)


def rank_cost(scores: Sequence[float], faulty: Iterable[int], tie_policy: str = "worst") -> float:
    """Cost of reaching the best-scored faulty statement (1-based ids)."""
    scores = np.asarray(scores, dtype=np.float64)
    faulty = sorted(faulty)
    if not faulty:
        raise ValueError("no faulty statements")
    target = max(scores[s - 1] for s in faulty)
    above = int(np.count_nonzero(scores > target + _TIE_TOL))
    tied = int(np.count_nonzero(np.abs(scores - target) <= _TIE_TOL))
    if tie_policy == "worst":
        examined = above + tied
    elif tie_policy == "best":
        examined = above + 1
    elif tie_policy == "average":
        examined = above + (tied + 1) / 2
    else:
        raise ValueError(f"unknown tie policy {tie_policy!r}; expected one of {TIE_POLICIES}")
    return examined / len(scores)


def cost(run: CoverageRun, formula: str = "ochiai", tie_policy: str = "worst") -> float:
    if run.faulty_statements is None:
        raise ValueError("run has no fault ground truth; load it with a faults file")
    scores = suspiciousness(spectra_counts(run), formula)
    return rank_cost(scores, run.faulty_statements, tie_policy)


def effective_run(run: CoverageRun, changed: Iterable[str], strategy: str) -> CoverageRun:
    """The suite after flipping or trimming the ``changed`` passing tests."""
    changed = set(changed)
    if strategy == "none" or not changed:
        return run
    tests: list[ExecutionTrace] = []
    for t in run.tests:
        if t.test_id not in changed:
            tests.append(t)
        elif strategy == "flip":
            tests.append(ExecutionTrace(t.test_id, t.sequence, Verdict.FAILING))
        elif strategy != "trim":
            raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    return run.with_tests(tests)


@dataclass(frozen=True)
class CostReport:
    strategy: str
    formula: str
    tie_policy: str
    original_cost: float
    one_at_a_time: tuple[float, ...] | None
    all_at_once: float | None
    per_change: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "formula": self.formula,
            "tie_policy": self.tie_policy,
            "original_cost": self.original_cost,
            "one_at_a_time": None if self.one_at_a_time is None else list(self.one_at_a_time),
            "all_at_once": self.all_at_once,
            "per_change": dict(sorted(self.per_change.items())),
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent)


def apply_strategy(run: CoverageRun, ct: Iterable[str], strategy: str = "trim",
                   variants: Sequence[str] = VARIANTS, formula: str = "ochiai",
                   tie_policy: str = "worst") -> CostReport:
    """Fault-localization cost before and after flipping/trimming ``ct``.

    ``"one"`` recomputes the cost once per changed test; ``"all"`` changes
    every test in ``ct`` together.  A variant not requested is reported as
    ``None``.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}; expected one of {VARIANTS}")
    ct = sorted(set(ct))
    passing = {t.test_id for t in run.passing}
    for tid in ct:
        if tid not in passing:
            raise UnknownTestId(f"{tid!r} is not a passing test of run {run.program_id!r}")

    original = cost(run, formula, tie_policy)
    per_change = {}
    one = None
    if "one" in variants:
        per_change = {tid: cost(effective_run(run, [tid], strategy), formula, tie_policy) for tid in ct}
        one = tuple(sorted(set(per_change.values())))
    every = cost(effective_run(run, ct, strategy), formula, tie_policy) if "all" in variants else None
    return CostReport(strategy, formula, tie_policy, original, one, every, per_change)


# -- tabular output ----------------------------------------------------------

TABLE_COLUMNS = (
    "program", "strategy",
    "one_at_a_time_combo1", "one_at_a_time_combo2", "one_at_a_time_combo3",
    "all_at_once_combo1", "all_at_once_combo2", "all_at_once_combo3",
    "original_cost",
)


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _fmt_set(values) -> str:
    if values is None:
        return ""
    if not values:
        return ""
    if len(values) == 1:
        return _fmt(values[0])
    return "{" + ", ".join(_fmt(v) for v in values) + "}"


def cost_table_rows(program: str, strategy: str, by_combo: Mapping[int, CostReport]) -> dict:
    """One table row; an empty one-at-a-time set (nothing detected) shows the original cost."""
    first = next(iter(by_combo.values()))
    row = {"program": program, "strategy": strategy, "original_cost": _fmt(first.original_cost)}
    for k in (1, 2, 3):
        rep = by_combo.get(k)
        if rep is None:
            row[f"one_at_a_time_combo{k}"] = row[f"all_at_once_combo{k}"] = ""
            continue
        if rep.one_at_a_time is not None and not rep.one_at_a_time:
            row[f"one_at_a_time_combo{k}"] = _fmt(rep.original_cost)
        else:
            row[f"one_at_a_time_combo{k}"] = _fmt_set(rep.one_at_a_time)
        row[f"all_at_once_combo{k}"] = "" if rep.all_at_once is None else _fmt(rep.all_at_once)
    return row


def write_cost_table(rows: Iterable[Mapping[str, str]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()
