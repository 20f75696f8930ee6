"""Report tables over ingested results: ranking, cross-scale transfer,
per-task delta matrix, and the loss-vs-downstream comparison.

Every builder returns a ReportTable holding unrounded values; rounding
happens only in the text emission. The delimited emission keeps full float
precision so ingestion -> emission round-trips are lossless.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .accounting import delta_table
from .results import CLIMB_TASKS, check_unique
from .stats import SeedSet, stat_report, zscore

FORMATS = ("rank", "cross_scale", "per_task_delta", "flops", "loss_vs_climb")


@dataclass
class ReportTable:
    format: str
    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"unknown table format {self.format!r}")

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]

    def row(self, method: str) -> dict:
        for row in self.rows:
            if row.get("method") == method:
                return row
        raise KeyError(method)

    def to_text(self) -> str:
        cells = [[_text_cell(row[c]) for c in self.columns] for row in self.rows]
        widths = [max([len(c)] + [len(r[i]) for r in cells])
                  for i, c in enumerate(self.columns)]
        lines = [_pad(self.columns, widths), _pad(["-" * w for w in widths], widths)]
        lines += [_pad(r, widths) for r in cells]
        if "summary" in self.meta:
            lines.append("")
            lines.append(self.meta["summary"])
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)]
        for row in self.rows:
            lines.append("\t".join(_tsv_cell(row[c]) for c in self.columns))
        return "\n".join(lines) + "\n"

    def write(self, directory: str, name: str) -> tuple:
        os.makedirs(directory, exist_ok=True)
        txt = os.path.join(directory, name + ".txt")
        tsv = os.path.join(directory, name + ".tsv")
        with open(txt, "w") as fh:
            fh.write(self.to_text())
        with open(tsv, "w") as fh:
            fh.write(self.to_tsv())
        return txt, tsv


def _text_cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def _tsv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _pad(cells, widths) -> str:
    out = []
    for i, (c, w) in enumerate(zip(cells, widths)):
        out.append(c.ljust(w) if i == 0 else c.rjust(w))
    return "  ".join(out).rstrip()


def _one_per_method(results):
    check_unique(results)
    by_method = {}
    for r in results:
        if r.method in by_method:
            raise ValueError(f"more than one row for method {r.method!r}")
        by_method[r.method] = r
    return by_method


def rank_table(results, floor: SeedSet, sigma: float | None = None,
               alpha: float = 0.05, q: float = 0.05,
               baseline_tag: str = "baseline") -> ReportTable:
    """Methods sorted by descending CLIMB-avg with delta/z/p_Bonf columns.

    The baseline row always shows the floor mean, so its delta and z are
    exactly zero and it carries no p-value (it is the reference, not a
    tested hypothesis).
    """
    by_method = _one_per_method(results)
    values = {tag: r.climb() for tag, r in by_method.items()}
    if baseline_tag in values:
        values[baseline_tag] = floor.mean
    report = stat_report(values, floor, sigma=sigma, alpha=alpha, q=q,
                         baseline_tag=baseline_tag)
    rows = [{"method": r["method"], "climb_avg": r["value"],
             "delta": r["delta"], "z": r["z"], "p_bonf": r["p_bonf"]}
            for r in report.rows]
    rejections = {
        "bonferroni": sorted(r["method"] for r in report.rows
                             if r["reject_bonferroni"]),
        "holm": sorted(r["method"] for r in report.rows if r["reject_holm"]),
        "bh": sorted(r["method"] for r in report.rows if r["bh_significant"]),
    }
    meta = {"sigma": report.sigma, "m": report.m, "alpha": alpha, "q": q,
            "floor_mean": report.floor_mean, "rejections": rejections,
            "stat_rows": report.rows}
    return ReportTable("rank", ["method", "climb_avg", "delta", "z", "p_bonf"],
                       rows, meta)


def flops_table(cfg, methods=None, batch_tokens: int | None = None,
                reference: dict | None = None) -> ReportTable:
    """Per-method parameter/FLOPs cost table as a ReportTable.

    Thin wrapper over the accounting delta table; the note column surfaces
    rows whose derived percentages disagree with an ingested published
    reference by more than 0.01 percentage points.
    """
    kwargs = {"batch_tokens": batch_tokens, "reference": reference}
    if methods is not None:
        kwargs["methods"] = methods
    rows = delta_table(cfg, **kwargs)
    meta = {"config": {"n_layers": cfg.n_layers, "d_model": cfg.d_model,
                       "n_heads": cfg.n_heads, "n_kv_heads": cfg.n_kv_heads,
                       "d_inter": cfg.d_inter, "context": cfg.context,
                       "vocab_size": cfg.vocab_size}}
    return ReportTable("flops",
                       ["method", "category", "params", "dp_pct", "df_pct",
                        "note"],
                       rows, meta)


def cross_scale_table(results_a, results_b,
                      baseline_tag: str = "baseline") -> ReportTable:
    """Two-scale comparison: values, delta at scale B, and rank movement.

    Methods missing at one scale stay in the table with an absence marker
    instead of being dropped. Ranks are positions within each scale's own
    result set (reference row included), descending by score.
    """
    a = _one_per_method(results_a)
    b = _one_per_method(results_b)
    scale_a = _single_scale(results_a)
    scale_b = _single_scale(results_b)
    if baseline_tag not in a or baseline_tag not in b:
        raise ValueError(f"both scales need a {baseline_tag!r} row")
    vals_a = {tag: r.climb() for tag, r in a.items()}
    vals_b = {tag: r.climb() for tag, r in b.items()}
    rank_a = _ranks(vals_a)
    rank_b = _ranks(vals_b)

    order = sorted(vals_b, key=lambda t: (-vals_b[t], t))
    order += sorted((t for t in vals_a if t not in vals_b),
                    key=lambda t: (-vals_a[t], t))
    rows = []
    for tag in order:
        va = vals_a.get(tag)
        vb = vals_b.get(tag)
        movement = (f"{rank_a[tag]}" if tag in rank_a else "-")
        movement += "→" + (f"{rank_b[tag]}" if tag in rank_b else "-")
        rows.append({"method": tag, "climb_a": va, "climb_b": vb,
                     "delta_b": (None if vb is None
                                 else vb - vals_b[baseline_tag]),
                     "rank_movement": movement})

    imp_total = imp_kept = fail_total = fail_kept = 0
    for tag in vals_a:
        if tag == baseline_tag or tag not in vals_b:
            continue
        da = vals_a[tag] - vals_a[baseline_tag]
        db = vals_b[tag] - vals_b[baseline_tag]
        if da > 0:
            imp_total += 1
            imp_kept += db > 0
        elif da < 0:
            fail_total += 1
            fail_kept += db < 0
    meta = {
        "scale_a": scale_a, "scale_b": scale_b,
        "baseline_a": vals_a[baseline_tag], "baseline_b": vals_b[baseline_tag],
        "sign_preservation": {
            "improvers_total": imp_total, "improvers_preserved": imp_kept,
            "failures_total": fail_total, "failures_preserved": fail_kept,
        },
        "summary": (f"sign preservation: {imp_kept}/{imp_total} improvers "
                    f"stay positive, {fail_kept}/{fail_total} failures "
                    f"stay negative"),
    }
    return ReportTable(
        "cross_scale",
        ["method", "climb_a", "climb_b", "delta_b", "rank_movement"],
        rows, meta)


def _single_scale(results) -> str:
    scales = {r.scale for r in results}
    if len(scales) != 1:
        raise ValueError(f"expected a single scale per side, got {sorted(scales)}")
    return scales.pop()


def _ranks(values: dict) -> dict:
    order = sorted(values, key=lambda t: (-values[t], t))
    return {tag: i for i, tag in enumerate(order, start=1)}


def per_task_delta_matrix(results, reference) -> ReportTable:
    """Methods x tasks matrix of per-task accuracy deltas vs the reference.

    Every row mean equals that method's CLIMB-avg delta (arithmetic
    identity); rows are ordered by descending CLIMB-avg. Requires per-task
    accuracies on the reference and on every ingested row.
    """
    if reference.per_task is None:
        raise ValueError("reference row needs per-task accuracies")
    by_method = _one_per_method(results)
    for tag, r in by_method.items():
        if r.per_task is None:
            raise ValueError(f"method {tag!r} has no per-task accuracies")
    order = sorted(by_method, key=lambda t: (-by_method[t].climb(), t))
    rows = []
    for tag in order:
        row = {"method": tag}
        for task in CLIMB_TASKS:
            row[task] = by_method[tag].per_task[task] - reference.per_task[task]
        rows.append(row)
    meta = {"reference": reference.method, "reference_scale": reference.scale,
            "reference_climb": reference.climb()}
    return ReportTable("per_task_delta", ["method", *CLIMB_TASKS], rows, meta)


def loss_vs_climb_table(results, floor: SeedSet, sigma: float | None = None,
                        baseline_tag: str = "baseline") -> ReportTable:
    """Final validation loss against CLIMB-avg, with the relative loss gap.

    The gap column is (loss - baseline loss) / baseline loss in percent;
    the z column scores CLIMB-avg against the noise floor, zero for the
    reference row by convention.
    """
    by_method = _one_per_method(results)
    for tag, r in by_method.items():
        if r.val_loss is None:
            raise ValueError(f"method {tag!r} has no val_loss")
    if baseline_tag not in by_method:
        raise ValueError(f"need a {baseline_tag!r} row for the loss gap")
    base_loss = by_method[baseline_tag].val_loss
    order = sorted(by_method, key=lambda t: (-by_method[t].climb(), t))
    rows = []
    for tag in order:
        r = by_method[tag]
        rows.append({
            "method": tag,
            "val_loss": r.val_loss,
            "climb_avg": r.climb(),
            "z": 0.0 if tag == baseline_tag else zscore(r.climb(), floor, sigma),
            "loss_gap_pct": 100.0 * (r.val_loss - base_loss) / base_loss,
        })
    meta = {"baseline_loss": base_loss,
            "sigma": sigma if sigma is not None else None}
    return ReportTable("loss_vs_climb",
                       ["method", "val_loss", "climb_avg", "z", "loss_gap_pct"],
                       rows, meta)
