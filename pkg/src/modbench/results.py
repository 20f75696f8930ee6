"""Evaluation-result ingestion and the 12-task aggregate metric.

A results document describes one (method, scale, seed) evaluation. It
carries either the full per-task accuracy map, an aggregate-only score
(for sources that publish only the average), or both.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

# Fixed downstream suite, in canonical emission order. Task identifiers are
# the snake_case names used by lm-evaluation-harness so real harness output
# maps on field names alone.
CLIMB_TASKS = (
    "piqa",
    "arc_challenge",
    "arc_easy",
    "hellaswag",
    "winogrande",
    "social_iqa",
    "mmlu",
    "openbookqa",
    "boolq",
    "race",
    "lambada_openai",
    "truthfulqa_mc2",
)


def climb_avg(per_task: dict) -> float:
    """Unweighted macro-average accuracy over the fixed 12-task list."""
    for task in CLIMB_TASKS:
        if task not in per_task:
            raise ValueError(f"missing task {task!r}")
    unknown = sorted(set(per_task) - set(CLIMB_TASKS))
    if unknown:
        raise ValueError(f"unknown tasks {unknown}")
    for task, acc in per_task.items():
        if not 0.0 <= float(acc) <= 1.0:
            raise ValueError(f"accuracy for {task!r} outside [0, 1]: {acc}")
    return sum(float(per_task[t]) for t in CLIMB_TASKS) / len(CLIMB_TASKS)


@dataclass
class ResultsFile:
    """One evaluation result for a (method, scale, seed) triple.

    aggregate is the CLIMB-avg for rows whose per-task accuracies are not
    available; when per_task is present the aggregate is always recomputed
    from it. provenance is free-form (harness version, few-shot settings).
    """

    method: str
    scale: str
    seed: int
    per_task: dict | None = None
    aggregate: float | None = None
    val_loss: float | None = None
    provenance: str | None = None

    def __post_init__(self):
        if not self.method:
            raise ValueError("method tag must be non-empty")
        if self.per_task is None and self.aggregate is None:
            raise ValueError("need per_task accuracies or an aggregate score")
        if self.per_task is not None:
            climb_avg(self.per_task)  # validates tasks and ranges
        if self.aggregate is not None and not 0.0 <= self.aggregate <= 1.0:
            raise ValueError(f"aggregate outside [0, 1]: {self.aggregate}")

    @property
    def key(self) -> tuple:
        return (self.method, self.scale, self.seed)

    def climb(self) -> float:
        if self.per_task is not None:
            return climb_avg(self.per_task)
        return float(self.aggregate)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ResultsFile":
        return cls(**json.loads(text))

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str) -> "ResultsFile":
        with open(path) as fh:
            return cls.from_json(fh.read())


def check_unique(results) -> None:
    """Reject duplicate (method, scale, seed) rows in one ingestion batch."""
    seen = set()
    for r in results:
        if r.key in seen:
            raise ValueError(f"duplicate results row for {r.key}")
        seen.add(r.key)
