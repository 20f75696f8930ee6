"""Benchmark harness for single-component decoder modifications.

Twenty method variants over one shared recipe: a gradient-checkable
float64 decoder, exact parameter/FLOPs accounting, the multi-seed z-score
protocol with multiplicity corrections, desk-scale training with
divergence signatures, and report emission (tables plus figures).
"""

from .accounting import CostBreakdown, count_params, delta_table, step_flops
from .methods import (ATTENTION_TAGS, CATALOG, HARD_TAGS, METHOD_TAGS,
                      SOFT_TAGS, MethodSpec, classify_soft_hard,
                      default_mask_heads, get_method, mixing_transform)
from .model import (SCALES, TOY, DecoderModel, ModelConfig,
                    relu_squared_width, resolve_scale)
from .reports import (ReportTable, cross_scale_table, flops_table,
                      loss_vs_climb_table, per_task_delta_matrix, rank_table)
from .results import CLIMB_TASKS, ResultsFile, check_unique, climb_avg
from .stats import (SeedSet, StatReport, bonferroni_p, bootstrap_floor,
                    correct_multiplicity, holm_p, p_two_sided, sample_std,
                    spearman_rho, stat_report, stouffer_combine, welch_t,
                    zscore)
from .tensor import Parameter, Tensor, grad_check
from .training import (DivergenceSignal, PackingReport, RecipeConfig,
                       RunRecord, classify_signature, clip_grad, lr_at_step,
                       pack_corpus, synthetic_corpus, toy_recipe, train_run)

__version__ = "0.1.0"

__all__ = [
    "ATTENTION_TAGS", "CATALOG", "CLIMB_TASKS", "CostBreakdown",
    "DecoderModel", "DivergenceSignal", "HARD_TAGS", "METHOD_TAGS",
    "MethodSpec", "ModelConfig", "PackingReport", "Parameter",
    "RecipeConfig", "ReportTable", "ResultsFile", "RunRecord", "SCALES",
    "SOFT_TAGS", "SeedSet", "StatReport", "TOY", "Tensor", "bonferroni_p",
    "bootstrap_floor", "check_unique", "classify_signature",
    "classify_soft_hard", "climb_avg", "clip_grad", "correct_multiplicity",
    "count_params", "cross_scale_table", "default_mask_heads", "delta_table",
    "flops_table", "get_method", "grad_check", "holm_p", "loss_vs_climb_table",
    "lr_at_step", "mixing_transform", "p_two_sided", "pack_corpus",
    "per_task_delta_matrix", "rank_table", "relu_squared_width",
    "resolve_scale", "sample_std", "spearman_rho", "stat_report",
    "step_flops", "stouffer_combine", "synthetic_corpus", "toy_recipe",
    "train_run", "welch_t", "zscore",
]
