import json

import pytest

from modbench.refdata import (CLIMB_A100_PUBLISHED, CLIMB_PRIMARY_PUBLISHED,
                              PER_TASK_A100, PER_TASK_PRIMARY,
                              reference_results)
from modbench.results import (CLIMB_TASKS, ResultsFile, check_unique,
                              climb_avg)


def test_task_list_is_the_twelve_benchmark_suite():
    assert len(CLIMB_TASKS) == 12
    assert CLIMB_TASKS[0] == "piqa"
    assert "winogrande" in CLIMB_TASKS
    assert len(set(CLIMB_TASKS)) == 12


def test_climb_avg_matches_published_aggregates():
    assert climb_avg(PER_TASK_PRIMARY) == pytest.approx(
        CLIMB_PRIMARY_PUBLISHED, abs=5e-5)
    assert climb_avg(PER_TASK_A100) == pytest.approx(
        CLIMB_A100_PUBLISHED, abs=5e-5)


def test_climb_avg_uniform_input():
    assert climb_avg({t: 0.5 for t in CLIMB_TASKS}) == 0.5


def test_climb_avg_missing_task_named_in_error():
    scores = {t: 0.5 for t in CLIMB_TASKS if t != "boolq"}
    with pytest.raises(ValueError, match="boolq"):
        climb_avg(scores)


def test_climb_avg_rejects_unknown_task():
    scores = {t: 0.5 for t in CLIMB_TASKS}
    scores["gsm8k"] = 0.5
    with pytest.raises(ValueError, match="gsm8k"):
        climb_avg(scores)


def test_climb_avg_rejects_out_of_range():
    scores = {t: 0.5 for t in CLIMB_TASKS}
    scores["piqa"] = 1.2
    with pytest.raises(ValueError):
        climb_avg(scores)


def test_results_file_requires_some_score():
    with pytest.raises(ValueError):
        ResultsFile(method="baseline", scale="1.2B", seed=42)
    with pytest.raises(ValueError):
        ResultsFile(method="baseline", scale="1.2B", seed=42, aggregate=1.5)


def test_results_file_climb_prefers_per_task():
    scores = {t: 0.5 for t in CLIMB_TASKS}
    rf = ResultsFile(method="baseline", scale="1.2B", seed=42,
                     per_task=scores, aggregate=0.9)
    assert rf.climb() == 0.5
    agg_only = ResultsFile(method="baseline", scale="1.2B", seed=42,
                           aggregate=0.9)
    assert agg_only.climb() == 0.9


def test_results_file_key():
    rf = ResultsFile(method="qknorm", scale="3B", seed=7, aggregate=0.51)
    assert rf.key == ("qknorm", "3B", 7)


def test_results_file_json_round_trip_keeps_precision():
    rf = ResultsFile(method="softpick", scale="1.2B", seed=42,
                     per_task=dict(PER_TASK_PRIMARY),
                     val_loss=2.4814,
                     provenance="unit test")
    text = rf.to_json()
    assert json.loads(text) == json.loads(rf.to_json())  # stable
    back = ResultsFile.from_json(text)
    assert back == rf
    assert back.per_task["winogrande"] == PER_TASK_PRIMARY["winogrande"]
    # keys are emitted sorted so diffs stay readable
    payload = json.loads(text)
    assert list(payload) == sorted(payload)


def test_results_file_save_load(tmp_path):
    rf = ResultsFile(method="baseline", scale="1.2B", seed=43,
                     aggregate=0.4815)
    path = tmp_path / "baseline_42.json"
    rf.save(str(path))
    assert ResultsFile.load(str(path)) == rf


def test_check_unique_flags_duplicates():
    a = ResultsFile(method="baseline", scale="1.2B", seed=42, aggregate=0.48)
    b = ResultsFile(method="baseline", scale="1.2B", seed=42, aggregate=0.49)
    c = ResultsFile(method="baseline", scale="1.2B", seed=43, aggregate=0.48)
    check_unique([a, c])
    with pytest.raises(ValueError, match="baseline"):
        check_unique([a, b])


def test_bundled_reference_rows_are_complete():
    rows = reference_results("1.2B")
    assert len(rows) == 20
    tags = {r.method for r in rows}
    assert "baseline" in tags and "softpick" in tags
    assert all(r.seed == 42 for r in rows)
    check_unique(rows)
    rows3 = reference_results("3B")
    assert len(rows3) == 10
    assert all(r.scale == "3B" for r in rows3)
