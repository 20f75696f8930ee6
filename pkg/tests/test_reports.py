import numpy as np
import pytest

from modbench.model import SCALES
from modbench.refdata import (OPERATIONAL_SIGMA, PBONF_1P2B,
                              PBONF_BELOW_1E7, Z_1P2B, baseline_floor,
                              hardware_results, reference_results)
from modbench.reports import (ReportTable, cross_scale_table, flops_table,
                              loss_vs_climb_table, per_task_delta_matrix,
                              rank_table)
from modbench.results import CLIMB_TASKS, ResultsFile

FLOOR = baseline_floor()

BONF_SET = {"attnres", "hybrid_norm", "hyper", "layerscale", "sigmoid_attn",
            "softpick", "ssmax"}
BH_SET = BONF_SET | {"diff_attn", "qknorm", "relu_squared", "sandwich_norm"}


def _rank_1p2b():
    return rank_table(reference_results("1.2B"), FLOOR,
                      sigma=OPERATIONAL_SIGMA)


def test_rank_table_reproduces_published_z_scores():
    table = _rank_1p2b()
    for tag, z_pub in Z_1P2B.items():
        z = table.row(tag)["z"]
        tol = 0.3 if abs(z_pub) > 20 else 0.05
        assert z == pytest.approx(z_pub, abs=tol), tag


def test_rank_table_reproduces_published_p_values():
    table = _rank_1p2b()
    for tag, p_pub in PBONF_1P2B.items():
        assert table.row(tag)["p_bonf"] == pytest.approx(p_pub, rel=0.2), tag
    for tag in PBONF_BELOW_1E7:
        assert table.row(tag)["p_bonf"] < 1e-7, tag


def test_rank_table_rejection_sets():
    meta = _rank_1p2b().meta
    assert set(meta["rejections"]["bonferroni"]) == BONF_SET
    assert set(meta["rejections"]["holm"]) == BONF_SET
    assert set(meta["rejections"]["bh"]) == BH_SET
    assert meta["m"] == 19


def test_rank_table_baseline_is_the_reference_row():
    table = _rank_1p2b()
    row = table.row("baseline")
    assert row["climb_avg"] == FLOOR.mean
    assert row["delta"] == 0.0
    assert row["z"] == 0.0
    assert row["p_bonf"] is None


def test_rank_table_sorted_descending():
    table = _rank_1p2b()
    values = table.column("climb_avg")
    assert values == sorted(values, reverse=True)
    assert table.rows[0]["method"] == "softpick"
    assert table.rows[-1]["method"] == "sigmoid_attn"


def test_rank_table_rejects_duplicate_methods():
    rows = [ResultsFile(method="baseline", scale="1.2B", seed=s,
                        aggregate=0.48) for s in (42, 43)]
    with pytest.raises(ValueError, match="more than one"):
        rank_table(rows, FLOOR)


def test_rank_table_single_baseline_row():
    rows = [ResultsFile(method="baseline", scale="toy", seed=0,
                        aggregate=0.3)]
    table = rank_table(rows, FLOOR, sigma=OPERATIONAL_SIGMA)
    assert len(table.rows) == 1
    assert table.rows[0]["delta"] == 0.0
    assert table.rows[0]["z"] == 0.0


def test_cross_scale_published_rank_movements():
    table = cross_scale_table(reference_results("1.2B"),
                              reference_results("3B"))
    assert table.row("qknorm_geglu")["rank_movement"] == "7→1"
    assert table.row("baseline")["rank_movement"] == "13→8"
    assert table.row("sigmoid_attn")["rank_movement"] == "20→10"
    assert table.row("qknorm")["rank_movement"] == "3→2"
    assert table.row("selective_qknorm")["rank_movement"] == "10→3"
    assert table.row("selective_attn")["rank_movement"] == "6→4"
    # diverged at the larger scale: present on the left, absent marker right
    assert table.row("hybrid_norm")["rank_movement"] == "2→-"
    assert table.row("hybrid_norm")["climb_b"] is None
    assert table.row("qknorm_geglu")["delta_b"] == pytest.approx(0.0169,
                                                                 abs=1e-12)


def test_cross_scale_sign_preservation_counts():
    table = cross_scale_table(reference_results("1.2B"),
                              reference_results("3B"))
    sp = table.meta["sign_preservation"]
    assert sp["improvers_total"] == sp["improvers_preserved"] == 7
    assert sp["failures_total"] == sp["failures_preserved"] == 2
    assert "7/7" in table.meta["summary"]
    assert "2/2" in table.meta["summary"]


def test_cross_scale_identical_sides():
    rows = reference_results("1.2B")
    table = cross_scale_table(rows, rows)
    for row in table.rows:
        a, b = row["rank_movement"].split("→")
        assert a == b
        assert row["delta_b"] == pytest.approx(row["climb_b"] - FLOOR.values[0],
                                               abs=0.01)


def test_cross_scale_invariant_under_monotone_rescale():
    # a strictly increasing map of scores cannot flip any delta sign, so
    # preservation must be total
    vals = {"baseline": 0.48, "up": 0.50, "down": 0.45, "up2": 0.49}
    side_a = [ResultsFile(method=t, scale="1.2B", seed=0, aggregate=v)
              for t, v in vals.items()]
    side_b = [ResultsFile(method=t, scale="3B", seed=0,
                          aggregate=0.5 * v + 0.2)
              for t, v in vals.items()]
    sp = cross_scale_table(side_a, side_b).meta["sign_preservation"]
    assert sp["improvers_preserved"] == sp["improvers_total"] == 2
    assert sp["failures_preserved"] == sp["failures_total"] == 1


def test_cross_scale_requires_baseline_on_both_sides():
    a = [ResultsFile(method="baseline", scale="1.2B", seed=0, aggregate=0.5),
         ResultsFile(method="qknorm", scale="1.2B", seed=0, aggregate=0.5)]
    b = [ResultsFile(method="qknorm", scale="3B", seed=0, aggregate=0.5)]
    with pytest.raises(ValueError, match="baseline"):
        cross_scale_table(a, b)


def test_cross_scale_rejects_mixed_scales_per_side():
    a = [ResultsFile(method="baseline", scale="1.2B", seed=0, aggregate=0.5),
         ResultsFile(method="qknorm", scale="3B", seed=0, aggregate=0.5)]
    with pytest.raises(ValueError, match="single scale"):
        cross_scale_table(a, a)


def test_per_task_matrix_row_means_equal_aggregate_deltas():
    primary, a100 = hardware_results()
    table = per_task_delta_matrix([a100], primary)
    row = table.row("baseline_a100")
    deltas = [row[t] for t in CLIMB_TASKS]
    assert np.mean(deltas) == pytest.approx(a100.climb() - primary.climb(),
                                            abs=1e-12)


def test_per_task_matrix_winogrande_regression_value():
    # the one task that moved materially between accelerators
    primary, a100 = hardware_results()
    table = per_task_delta_matrix([a100], primary)
    delta = table.row("baseline_a100")["winogrande"]
    assert round(delta, 4) == -0.0214
    boolq = table.row("baseline_a100")["boolq"]
    assert round(boolq, 4) == 0.0293


def test_per_task_matrix_reference_against_itself_is_zero():
    primary, _ = hardware_results()
    clone = ResultsFile(method="clone", scale="1.2B", seed=42,
                        per_task=dict(primary.per_task))
    table = per_task_delta_matrix([clone], primary)
    assert all(table.row("clone")[t] == 0.0 for t in CLIMB_TASKS)
    assert table.meta["reference"] == "baseline"


def test_per_task_matrix_requires_per_task_scores():
    primary, a100 = hardware_results()
    agg = ResultsFile(method="agg_only", scale="1.2B", seed=0, aggregate=0.5)
    with pytest.raises(ValueError, match="agg_only"):
        per_task_delta_matrix([agg], primary)
    with pytest.raises(ValueError, match="reference"):
        per_task_delta_matrix([a100], agg)


def _loss_rows():
    return [r for r in reference_results("1.2B") if r.val_loss is not None]


def test_loss_vs_climb_gap_values():
    table = loss_vs_climb_table(_loss_rows(), FLOOR, sigma=OPERATIONAL_SIGMA)
    base = table.row("baseline")
    assert base["loss_gap_pct"] == 0.0
    assert base["z"] == 0.0
    sig = table.row("sigmoid_attn")
    assert sig["loss_gap_pct"] == pytest.approx(2.346, abs=0.01)
    attn = table.row("attnres")
    assert attn["loss_gap_pct"] == pytest.approx(13.16, abs=0.01)
    assert attn["val_loss"] - base["val_loss"] == pytest.approx(0.3275,
                                                                abs=1e-9)
    # the scatter's main story: tiny loss edge, large downstream swing
    soft = table.row("softpick")
    assert soft["loss_gap_pct"] < 0.0
    assert soft["z"] == pytest.approx(Z_1P2B["softpick"], abs=0.05)


def test_loss_vs_climb_requires_val_loss():
    rows = _loss_rows() + [ResultsFile(method="geglu_ffn", scale="1.2B",
                                       seed=42, aggregate=0.4834)]
    with pytest.raises(ValueError, match="geglu_ffn"):
        loss_vs_climb_table(rows, FLOOR)


def test_flops_table_wraps_accounting_rows():
    table = flops_table(SCALES["1.2B"])
    assert table.format == "flops"
    assert len(table.rows) == 20
    assert table.row("baseline")["dp_pct"] == 0.0
    assert table.meta["config"]["d_model"] == 2048
    sub = flops_table(SCALES["1.2B"], methods=["baseline", "gated_attn_qknorm"])
    assert [r["method"] for r in sub.rows] == ["baseline", "gated_attn_qknorm"]


def test_report_table_text_rendering():
    table = ReportTable("rank", ["method", "z", "p_bonf"],
                        [{"method": "a", "z": 1.234567891, "p_bonf": None}],
                        {"summary": "one row only"})
    text = table.to_text()
    assert "1.23457" in text  # 6 significant digits
    assert text.splitlines()[2].endswith("-")  # None renders as a dash
    assert text.rstrip().endswith("one row only")


def test_report_table_tsv_round_trips_floats():
    value = 0.1 + 0.2  # not exactly representable; repr must preserve it
    table = ReportTable("rank", ["method", "z"],
                        [{"method": "a", "z": value},
                         {"method": "b", "z": None}])
    lines = table.to_tsv().splitlines()
    assert lines[0] == "method\tz"
    assert float(lines[1].split("\t")[1]) == value
    assert lines[2].split("\t")[1] == ""


def test_report_table_write_creates_both_files(tmp_path):
    table = _rank_1p2b()
    txt, tsv = table.write(str(tmp_path), "rank_1.2B")
    assert txt.endswith("rank_1.2B.txt") and tsv.endswith("rank_1.2B.tsv")
    body = open(txt).read()
    assert "softpick" in body


def test_report_table_rejects_unknown_format():
    with pytest.raises(ValueError, match="unknown table format"):
        ReportTable("scatterplot", ["a"])


def test_report_table_row_lookup_missing():
    with pytest.raises(KeyError):
        _rank_1p2b().row("nonexistent")


PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_heatmap_renders_png(tmp_path):
    from modbench.figures import save_heatmap
    primary, a100 = hardware_results()
    table = per_task_delta_matrix([a100], primary)
    path = str(tmp_path / "per_task.png")
    save_heatmap(table, path)
    assert open(path, "rb").read(8) == PNG_MAGIC


def test_loss_scatter_renders_png(tmp_path):
    from modbench.figures import save_loss_vs_climb
    table = loss_vs_climb_table(_loss_rows(), FLOOR, sigma=OPERATIONAL_SIGMA)
    path = str(tmp_path / "loss_vs_climb.png")
    save_loss_vs_climb(table, path)
    assert open(path, "rb").read(8) == PNG_MAGIC


def test_grad_norm_figure_renders_png(tmp_path):
    from modbench.figures import save_grad_norms
    from modbench.model import TOY
    from modbench.training import synthetic_corpus, toy_recipe, train_run
    corpus = synthetic_corpus(n_docs=16, max_len=48, seed=5)
    r = toy_recipe(total_steps=12, warmup_steps=2)
    ok = train_run(TOY, "baseline", r, corpus, seed=0)
    bad = train_run(TOY, "baseline", r, corpus, seed=1, inject_nan_step=8)
    path = str(tmp_path / "grad_norms.png")
    save_grad_norms([ok, bad], path)
    assert open(path, "rb").read(8) == PNG_MAGIC


def test_figures_reject_empty_inputs(tmp_path):
    from modbench.figures import save_grad_norms, save_heatmap
    with pytest.raises(ValueError):
        save_grad_norms([], str(tmp_path / "x.png"))
    empty = ReportTable("per_task_delta", ["method", *CLIMB_TASKS], [])
    with pytest.raises(ValueError):
        save_heatmap(empty, str(tmp_path / "y.png"))
