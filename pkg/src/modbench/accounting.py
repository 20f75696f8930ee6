"""Exact integer parameter and FLOPs accounting for every method.

Parameter counts follow the published per-component arithmetic (tied
embeddings; selective attention charged V and O shares per masked query
head). FLOPs use the three per-layer terms: attention scores 2*s^2*d,
attention projections 2*(2d^2 + 2*d*d_kv), FFN 2*k*d*d_inter, summed over
layers, times 3 for the backward pass, scaled to the tokens per step.
Method deltas enter FLOPs only through the FFN term (two-matrix ReLU^2 at
1.5x width has the same matrix area as the three-matrix families).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .methods import METHOD_TAGS, default_mask_heads, get_method
from .model import ModelConfig, relu_squared_width

CATEGORIES = {
    "baseline": "ref",
    "softpick": "attention", "qknorm": "attention", "selective_attn": "attention",
    "selective_qknorm": "attention", "value_residual": "attention",
    "diff_attn": "attention", "sigmoid_attn": "attention", "ssmax": "attention",
    "softmax_cap": "attention", "gated_attn_qknorm": "attention",
    "geglu_ffn": "ffn", "qknorm_geglu": "ffn", "relu_squared": "ffn",
    "sandwich_norm": "norm", "hybrid_norm": "norm",
    "denseformer": "residual", "layerscale": "residual", "hyper": "residual",
    "attnres": "residual",
}


@dataclass
class CostBreakdown:
    params_by_component: dict = field(default_factory=dict)
    flops_by_term: dict = field(default_factory=dict)

    @property
    def total_params(self) -> int:
        return sum(self.params_by_component.values())

    @property
    def flops_per_step(self) -> int:
        return sum(self.flops_by_term.values())


def count_params(cfg: ModelConfig, method="baseline") -> CostBreakdown:
    """Exact parameter count, split into embeddings/attention/ffn/norms/extras.

    The attention component is the baseline projection area; every
    method-specific addition or saving lands in "extras" so that
    extras == total - baseline total by construction.
    """
    m = get_method(method)
    d, dh = cfg.d_model, cfg.d_head
    h, hkv, L = cfg.n_heads, cfg.n_kv_heads, cfg.n_layers

    out = CostBreakdown()
    p = out.params_by_component
    p["embeddings"] = cfg.vocab_size * d
    p["attention"] = L * (2 * h * dh * d + 2 * hkv * dh * d)
    if m.ffn == "relu_squared":
        p["ffn"] = L * 2 * d * relu_squared_width(cfg.d_inter)
    else:
        p["ffn"] = L * 3 * d * cfg.d_inter
    p["norms"] = (2 * L + 1) * d

    extras = 0
    if m.norm == "sandwich":
        extras += 2 * L * d
    elif m.norm == "hybrid":
        extras += L * d
    if m.qk_norm:
        extras += L * 2 * dh
    if m.mixing == "sigmoid":
        extras += L
    if m.mixing == "ssmax":
        extras += L * h
    if m.structure == "selective":
        # V and O shares per masked query head
        extras -= L * 2 * default_mask_heads(h) * dh * d
    if m.structure == "diff":
        extras += L * (1 + h * dh)          # lambda + per-head groupnorm scales
    if m.structure == "value_residual":
        extras += L - 1
    if m.structure == "gated":
        extras += L * d * h
    if m.residual == "denseformer":
        extras += L * (L + 1) // 2
    if m.residual == "layerscale":
        extras += 2 * L * d
    if m.residual == "hyper":
        extras += 2 * L
    if m.residual == "attnres":
        extras += L * d
    p["extras"] = extras
    return out


def step_flops(cfg: ModelConfig, method="baseline", batch_tokens: int | None = None) -> CostBreakdown:
    """Training FLOPs for one optimizer step (forward x3), exact integers."""
    m = get_method(method)
    s, d, L = cfg.context, cfg.d_model, cfg.n_layers
    if batch_tokens is None:
        batch_tokens = s
    if batch_tokens % s != 0:
        raise ValueError("batch_tokens must be a whole number of sequences")
    n_seq = batch_tokens // s

    f_score = 2 * s * s * d
    f_proj = 2 * (2 * d * d + 2 * d * cfg.d_kv)
    if m.ffn == "relu_squared":
        f_ffn = 2 * 2 * d * relu_squared_width(cfg.d_inter)
    else:
        f_ffn = 2 * 3 * d * cfg.d_inter

    out = CostBreakdown()
    t = out.flops_by_term
    t["attn_score"] = 3 * n_seq * L * f_score
    t["attn_proj"] = 3 * n_seq * L * s * f_proj
    t["ffn"] = 3 * n_seq * L * s * f_ffn
    return out


def delta_table(cfg: ModelConfig, methods=METHOD_TAGS, batch_tokens: int | None = None,
                reference: dict | None = None) -> list[dict]:
    """Per-method cost rows: tag, category, params, dP%/dF% vs baseline.

    `reference` optionally maps tag -> (dP%, dF%) from an ingested published
    table; rows whose derived percentages disagree with the reference by
    more than 0.01pp get a note instead of silent agreement.
    """
    base_p = count_params(cfg, "baseline").total_params
    base_f = step_flops(cfg, "baseline", batch_tokens).flops_per_step
    rows = []
    for tag in methods:
        params = count_params(cfg, tag).total_params
        flops = step_flops(cfg, tag, batch_tokens).flops_per_step
        dp = 100.0 * (params - base_p) / base_p
        df = 100.0 * (flops - base_f) / base_f
        note = ""
        if reference and tag in reference:
            ref_dp, ref_df = reference[tag]
            gaps = []
            if abs(dp - ref_dp) > 0.01:
                gaps.append(f"reference dP {ref_dp:+.2f}%")
            if abs(df - ref_df) > 0.01:
                gaps.append(f"reference dF {ref_df:+.2f}%")
            note = "; ".join(gaps)
        rows.append({
            "method": tag,
            "category": CATEGORIES[tag],
            "params": params,
            "dp_pct": dp,
            "df_pct": df,
            "note": note,
        })
    return rows
