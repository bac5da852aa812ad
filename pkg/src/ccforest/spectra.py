"""Coverage runs: per-test execution traces, verdicts, instrumentation and faults.

Three line-oriented UTF-8 files describe a run::

    coverage.csv         test_id,verdict,trace      e.g. ``TC1,-1,1;2;5;6;5;2``
    instrumentation.csv  statements,<count>         then ``id,file,line`` per statement
    faults.txt           one faulty statement id per line

Lines starting with ``#`` are comments.  A coverage comment of the form
``# program: <name>`` sets the program id (otherwise the file stem is used).
Ground-truth faults are kept in their own file so that detection code never
reads them.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import io
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .exceptions import (
    DuplicateTestId,
    MalformedRecord,
    NoFailingTests,
    UnknownStatement,
)

__all__ = [
    "Verdict",
    "ExecutionTrace",
    "CoverageRun",
    "RunSummary",
    "load_run",
    "save_run",
    "summarize",
    "dumps_coverage",
    "dumps_instrumentation",
    "dumps_faults",
]


class Verdict(enum.IntEnum):
    """Test outcome, encoded -1 for passing and +1 for failing."""

    PASSING = -1
    FAILING = 1

    @property
    def token(self) -> str:
        return "+1" if self is Verdict.FAILING else "-1"

    @classmethod
    def parse(cls, text: str) -> "Verdict":
        text = text.strip()
        if text == "-1":
            return cls.PASSING
        if text in ("+1", "1"):
            return cls.FAILING
        raise ValueError(f"verdict must be -1 or +1, got {text!r}")


@dataclass(frozen=True)
class ExecutionTrace:
    """One executed test: its id, ordered statement sequence and verdict."""

    test_id: str
    sequence: tuple[int, ...]
    verdict: Verdict

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(int(s) for s in self.sequence))
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        if not self.sequence:
            raise ValueError(f"test {self.test_id!r} has an empty trace")

    @property
    def is_failing(self) -> bool:
        return self.verdict is Verdict.FAILING

    @property
    def covered(self) -> frozenset[int]:
        return frozenset(self.sequence)


@dataclass(frozen=True)
class CoverageRun:
    """Full spectra of a test suite for one faulty program.

    ``faulty_statements`` is ``None`` when no faults file was supplied; cost
    evaluation needs it, detection does not.
    """

    program_id: str
    statement_count: int
    tests: tuple[ExecutionTrace, ...]
    instrumentation: Mapping[int, tuple[str, int]] = field(default_factory=dict)
    faulty_statements: frozenset[int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tests", tuple(self.tests))
        object.__setattr__(
            self, "instrumentation", MappingProxyType(dict(self.instrumentation))
        )
        if self.statement_count < 1:
            raise ValueError("statement_count must be positive")
        seen = set()
        for t in self.tests:
            if t.test_id in seen:
                raise DuplicateTestId(f"duplicate test id {t.test_id!r}")
            seen.add(t.test_id)
            bad = [s for s in t.sequence if not 1 <= s <= self.statement_count]
            if bad:
                raise UnknownStatement(
                    f"test {t.test_id!r} references statement {bad[0]} outside 1..{self.statement_count}"
                )
        if not any(t.is_failing for t in self.tests):
            raise NoFailingTests(f"run {self.program_id!r} has no failing tests")
        for sid in self.instrumentation:
            if not 1 <= sid <= self.statement_count:
                raise UnknownStatement(f"instrumentation for unknown statement {sid}")
        if self.faulty_statements is not None:
            faults = frozenset(int(s) for s in self.faulty_statements)
            if not faults:
                raise ValueError("faulty_statements must be non-empty")
            bad = sorted(s for s in faults if not 1 <= s <= self.statement_count)
            if bad:
                raise UnknownStatement(f"faulty statement {bad[0]} outside 1..{self.statement_count}")
            object.__setattr__(self, "faulty_statements", faults)

    @property
    def passing(self) -> tuple[ExecutionTrace, ...]:
        return tuple(t for t in self.tests if not t.is_failing)

    @property
    def failing(self) -> tuple[ExecutionTrace, ...]:
        return tuple(t for t in self.tests if t.is_failing)

    @property
    def test_ids(self) -> tuple[str, ...]:
        return tuple(t.test_id for t in self.tests)

    def __getitem__(self, test_id: str) -> ExecutionTrace:
        for t in self.tests:
            if t.test_id == test_id:
                return t
        raise KeyError(test_id)

    def with_tests(self, tests: Iterable[ExecutionTrace]) -> "CoverageRun":
        return CoverageRun(
            self.program_id,
            self.statement_count,
            tuple(tests),
            self.instrumentation,
            self.faulty_statements,
        )

    def digest(self) -> str:
        """SHA-256 over the canonical serialization of traces and instrumentation."""
        h = hashlib.sha256()
        h.update(dumps_coverage(self).encode())
        h.update(dumps_instrumentation(self).encode())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, CoverageRun):
            return NotImplemented
        return (
            self.program_id == other.program_id
            and self.statement_count == other.statement_count
            and self.tests == other.tests
            and dict(self.instrumentation) == dict(other.instrumentation)
            and self.faulty_statements == other.faulty_statements
        )

    __hash__ = None


@dataclass(frozen=True)
class RunSummary:
    program_id: str
    tests: int
    passing: int
    failing: int
    statements: int
    trace_length_min: int
    trace_length_max: int
    trace_length_mean: float
    faulty: int | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize(run: CoverageRun) -> RunSummary:
    lengths = [len(t.sequence) for t in run.tests]
    return RunSummary(
        program_id=run.program_id,
        tests=len(run.tests),
        passing=len(run.passing),
        failing=len(run.failing),
        statements=run.statement_count,
        trace_length_min=min(lengths),
        trace_length_max=max(lengths),
        trace_length_mean=statistics.fmean(lengths),
        faulty=None if run.faulty_statements is None else len(run.faulty_statements),
    )


# -- parsing -----------------------------------------------------------------


def _records(path: Path):
    """Yield (line_no, fields) for non-blank, non-comment lines."""
    with open(path, encoding="utf-8", newline="") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                fields = next(csv.reader([stripped], strict=True))
            except csv.Error as exc:
                raise MalformedRecord(path, line_no, str(exc)) from None
            yield line_no, [f.strip() for f in fields]


def _positive_int(path, line_no, text, what):
    try:
        value = int(text)
    except ValueError:
        raise MalformedRecord(path, line_no, f"{what} is not an integer: {text!r}") from None
    if value < 1:
        raise MalformedRecord(path, line_no, f"{what} must be positive, got {value}")
    return value


def _load_instrumentation(path: Path) -> tuple[int, dict[int, tuple[str, int]]]:
    count = None
    mapping: dict[int, tuple[str, int]] = {}
    last_line = 0
    for line_no, fields in _records(path):
        last_line = line_no
        if count is None:
            if len(fields) != 2 or fields[0] != "statements":
                raise MalformedRecord(path, line_no, "expected header 'statements,<count>'")
            count = _positive_int(path, line_no, fields[1], "statement count")
            continue
        if len(fields) != 3:
            raise MalformedRecord(path, line_no, f"expected 3 fields 'id,file,line', got {len(fields)}")
        sid = _positive_int(path, line_no, fields[0], "statement id")
        if sid > count:
            raise UnknownStatement(f"{path}:{line_no}: statement {sid} exceeds declared count {count}")
        if sid in mapping:
            raise MalformedRecord(path, line_no, f"duplicate statement id {sid}")
        if not fields[1]:
            raise MalformedRecord(path, line_no, "empty source file name")
        mapping[sid] = (fields[1], _positive_int(path, line_no, fields[2], "line"))
    if count is None:
        raise MalformedRecord(path, max(last_line, 1), "missing 'statements,<count>' header")
    if len(mapping) != count:
        missing = min(set(range(1, count + 1)) - set(mapping))
        raise MalformedRecord(path, last_line + 1, f"no record for statement {missing}")
    return count, mapping


def _load_coverage(path: Path, statement_count: int) -> tuple[str | None, list[ExecutionTrace]]:
    program_id = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            s = line.strip()
            if s.startswith("#") and s[1:].strip().startswith("program:"):
                program_id = s[1:].strip()[len("program:"):].strip() or None
                break
    tests: list[ExecutionTrace] = []
    seen: set[str] = set()
    for line_no, fields in _records(path):
        if len(fields) != 3:
            raise MalformedRecord(path, line_no, f"expected 3 fields 'test_id,verdict,trace', got {len(fields)}")
        test_id, verdict_text, trace_text = fields
        if not test_id:
            raise MalformedRecord(path, line_no, "empty test id")
        if test_id in seen:
            raise DuplicateTestId(f"{path}:{line_no}: duplicate test id {test_id!r}")
        seen.add(test_id)
        try:
            verdict = Verdict.parse(verdict_text)
        except ValueError as exc:
            raise MalformedRecord(path, line_no, str(exc)) from None
        if not trace_text:
            raise MalformedRecord(path, line_no, "empty trace")
        sequence = []
        for token in trace_text.split(";"):
            try:
                sid = int(token.strip())
            except ValueError:
                raise MalformedRecord(path, line_no, f"bad statement id {token!r}") from None
            if not 1 <= sid <= statement_count:
                raise UnknownStatement(
                    f"{path}:{line_no}: statement {sid} outside 1..{statement_count}"
                )
            sequence.append(sid)
        tests.append(ExecutionTrace(test_id, tuple(sequence), verdict))
    return program_id, tests


def _load_faults(path: Path, statement_count: int) -> frozenset[int]:
    faults = set()
    last_line = 0
    for line_no, fields in _records(path):
        last_line = line_no
        if len(fields) != 1:
            raise MalformedRecord(path, line_no, "expected a single statement id")
        sid = _positive_int(path, line_no, fields[0], "statement id")
        if sid > statement_count:
            raise UnknownStatement(f"{path}:{line_no}: statement {sid} outside 1..{statement_count}")
        if sid in faults:
            raise MalformedRecord(path, line_no, f"duplicate fault {sid}")
        faults.add(sid)
    if not faults:
        raise MalformedRecord(path, max(last_line, 1), "faults file lists no statements")
    return frozenset(faults)


def load_run(coverage_path, instrumentation_path, faults_path=None) -> CoverageRun:
    """Parse and validate a coverage run from its three files.

    ``faults_path`` may be omitted when only detection is needed.
    """
    coverage_path = Path(coverage_path)
    count, mapping = _load_instrumentation(Path(instrumentation_path))
    program_id, tests = _load_coverage(coverage_path, count)
    faults = None if faults_path is None else _load_faults(Path(faults_path), count)
    return CoverageRun(
        program_id=program_id or coverage_path.stem,
        statement_count=count,
        tests=tuple(tests),
        instrumentation=mapping,
        faulty_statements=faults,
    )


# -- serialization -----------------------------------------------------------


def _csv_line(fields) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(fields)
    return buf.getvalue()


def dumps_coverage(run: CoverageRun) -> str:
    lines = [f"# program: {run.program_id}\n"]
    for t in run.tests:
        lines.append(_csv_line([t.test_id, t.verdict.token, ";".join(map(str, t.sequence))]))
    return "".join(lines)


def dumps_instrumentation(run: CoverageRun) -> str:
    lines = [f"statements,{run.statement_count}\n"]
    for sid in sorted(run.instrumentation):
        src, line = run.instrumentation[sid]
        lines.append(_csv_line([sid, src, line]))
    return "".join(lines)


def dumps_faults(run: CoverageRun) -> str:
    if run.faulty_statements is None:
        raise ValueError("run has no fault ground truth")
    return "".join(f"{s}\n" for s in sorted(run.faulty_statements))


def save_run(run: CoverageRun, coverage_path, instrumentation_path, faults_path=None) -> None:
    Path(coverage_path).write_text(dumps_coverage(run), encoding="utf-8")
    Path(instrumentation_path).write_text(dumps_instrumentation(run), encoding="utf-8")
    if faults_path is not None:
        Path(faults_path).write_text(dumps_faults(run), encoding="utf-8")
