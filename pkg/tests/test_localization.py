import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ccforest.exceptions import NoFailingTests, UnknownTestId
from ccforest.localization import (
    TABLE_COLUMNS,
    CostReport,
    SpectraCounts,
    apply_strategy,
    cost,
    cost_table_rows,
    effective_run,
    ochiai,
    rank_cost,
    spectra_counts,
    suspiciousness,
    tarantula,
    write_cost_table,
)
from ccforest.spectra import CoverageRun, ExecutionTrace, Verdict

import sbfl_oracles as oracle


def make_run(spec, statement_count, faults):
    tests = [ExecutionTrace(tid, tuple(seq), Verdict.FAILING if fail else Verdict.PASSING)
             for tid, seq, fail in spec]
    return CoverageRun("toy", statement_count, tuple(tests),
                       {s: ("Toy.java", s) for s in range(1, statement_count + 1)}, frozenset(faults))


def test_ochiai_examples():
    assert ochiai([5], [0], 5).tolist() == [1.0]
    assert ochiai([0], [3], 5).tolist() == [0.0]
    assert ochiai([1], [3], 1)[0] == pytest.approx(0.5)
    assert ochiai([2], [2], 4)[0] == pytest.approx(2 / math.sqrt(16))


def test_tarantula_examples():
    assert tarantula([2], [0], 2, 4).tolist() == [1.0]
    assert tarantula([1], [2], 2, 4)[0] == pytest.approx(0.5)
    assert tarantula([0], [1], 2, 4).tolist() == [0.0]
    assert tarantula([1], [0], 1, 0).tolist() == [1.0]


def test_no_failing_tests():
    with pytest.raises(NoFailingTests):
        suspiciousness(SpectraCounts(np.zeros(3), np.ones(3), 0, 2))
    with pytest.raises(ValueError):
        suspiciousness(SpectraCounts(np.ones(3), np.ones(3), 1, 1), "dstar")


def test_single_statement_at_top_of_45():
    scores = np.zeros(45)
    scores[9] = 0.9
    assert rank_cost(scores, [10]) == pytest.approx(1 / 45)
    assert round(rank_cost(scores, [10]), 3) == 0.022


def test_all_tied():
    s = np.full(8, 0.3)
    assert rank_cost(s, [3], "worst") == 1.0
    assert rank_cost(s, [3], "best") == 1 / 8
    assert rank_cost(s, [3], "average") == 4.5 / 8


def test_multi_fault_uses_best_ranked():
    s = [0.9, 0.1, 0.5, 0.5, 0.2]
    assert rank_cost(s, [2, 3], "worst") == 3 / 5
    assert rank_cost(s, [2, 3], "best") == 2 / 5


def test_rank_cost_errors():
    with pytest.raises(ValueError):
        rank_cost([0.1], [])
    with pytest.raises(ValueError):
        rank_cost([0.1], [1], "median")


@given(
    st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), min_size=1, max_size=12),
    st.data(),
    st.sampled_from(["worst", "best", "average"]),
)
def test_rank_cost_matches_sort_and_scan(scores, data, tie):
    faulty = data.draw(st.sets(st.integers(1, len(scores)), min_size=1))
    assert rank_cost(scores, faulty, tie) == pytest.approx(oracle.sort_and_scan(scores, faulty, tie), abs=1e-12)


def test_spectra_counts_match_oracle(small_sim):
    run, _ = small_sim
    c = spectra_counts(run)
    ef, ep, F, P = oracle.counts(((t.sequence, t.is_failing) for t in run.tests), run.statement_count)
    assert c.ef.tolist() == ef and c.ep.tolist() == ep and (c.F, c.P) == (F, P)
    assert (c.nf + c.ef == F).all() and (c.np + c.ep == P).all()


SCENARIO = [
    ("P1", [1, 2, 3], False),
    ("P2", [1, 2, 3, 6], False),
    ("P3", [1, 3, 6], False),
    ("C1", [1, 2, 4], False),
    ("C2", [1, 4, 6], False),
    ("F1", [1, 4, 5], True),
    ("F2", [1, 2, 4, 5], True),
]


def test_effective_run_counts():
    run = make_run(SCENARIO, 6, [4])
    flipped = effective_run(run, ["C1", "C2"], "flip")
    trimmed = effective_run(run, ["C1", "C2"], "trim")
    assert (len(flipped.failing), len(flipped.passing)) == (4, 3)
    assert (len(trimmed.failing), len(trimmed.passing)) == (2, 3)
    assert effective_run(run, ["C1"], "none") is run
    with pytest.raises(ValueError):
        effective_run(run, ["C1"], "drop")


def test_strategies_against_oracle():
    run = make_run(SCENARIO, 6, [4])
    for strategy, keep in (("trim", lambda tid: tid not in ("C1", "C2")), ("flip", lambda tid: True)):
        traces = [(seq, fail or (strategy == "flip" and tid.startswith("C")))
                  for tid, seq, fail in SCENARIO if keep(tid)]
        expected = oracle.sort_and_scan(oracle.scores(traces, 6), [4], "worst")
        rep = apply_strategy(run, ["C1", "C2"], strategy)
        assert rep.all_at_once == pytest.approx(expected)
        assert rep.all_at_once <= rep.original_cost
    base = oracle.sort_and_scan(oracle.scores([(s, f) for _, s, f in SCENARIO], 6), [4], "worst")
    assert cost(run) == pytest.approx(base)


def test_one_at_a_time_and_per_change():
    run = make_run(SCENARIO, 6, [4])
    rep = apply_strategy(run, ["C2", "C1"], "trim")
    assert set(rep.per_change) == {"C1", "C2"}
    assert rep.one_at_a_time == tuple(sorted(set(rep.per_change.values())))
    single = apply_strategy(run, ["C1"], "flip")
    assert single.one_at_a_time == (single.all_at_once,)
    only_all = apply_strategy(run, ["C1"], "flip", variants=["all"])
    assert only_all.one_at_a_time is None and only_all.per_change == {}


def test_empty_ct_keeps_original():
    run = make_run(SCENARIO, 6, [4])
    rep = apply_strategy(run, [], "trim")
    assert rep.one_at_a_time == ()
    assert rep.all_at_once == rep.original_cost


def test_apply_strategy_errors():
    run = make_run(SCENARIO, 6, [4])
    with pytest.raises(UnknownTestId):
        apply_strategy(run, ["F1"])
    with pytest.raises(UnknownTestId):
        apply_strategy(run, ["nope"])
    with pytest.raises(ValueError):
        apply_strategy(run, ["C1"], "drop")
    with pytest.raises(ValueError):
        apply_strategy(run, ["C1"], variants=["some"])
    with pytest.raises(ValueError):
        cost(CoverageRun("toy", 6, run.tests, run.instrumentation))


def test_cost_table():
    reps = {
        1: CostReport("trim", "ochiai", "worst", 0.5, (0.05, 1 / 15), 0.04),
        2: CostReport("trim", "ochiai", "worst", 0.5, (), 0.5),
    }
    row = cost_table_rows("Math", "trim", reps)
    assert row["one_at_a_time_combo1"] == "{0.050, 0.067}"
    assert row["one_at_a_time_combo2"] == "0.500"
    assert row["all_at_once_combo1"] == "0.040"
    assert row["one_at_a_time_combo3"] == ""
    text = write_cost_table([row])
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert tuple(parsed[0]) == TABLE_COLUMNS
    assert parsed[0]["original_cost"] == "0.500"


def test_report_json():
    run = make_run(SCENARIO, 6, [4])
    rep = apply_strategy(run, ["C1"], "flip", formula="tarantula", tie_policy="average")
    assert '"tie_policy": "average"' in rep.to_json()
