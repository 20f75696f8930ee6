"""Catalog of the 20 decoder modifications and their interchangeable parts.

Each method is a combination over five slots: the mixing function that turns
attention logits into weights, the attention structure, whether q/k are
RMS-normalized, the FFN family, the norm placement, and the residual wiring.
The mixing transforms live here as pure graph ops; structure variants that
need projection weights are assembled in model.py.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, concat, softmax_rows

MIXINGS = ("softmax", "softpick", "sigmoid", "ssmax", "cap")
STRUCTURES = ("plain", "selective", "diff", "value_residual", "gated")
FFNS = ("swiglu", "geglu", "relu_squared")
NORMS = ("pre", "sandwich", "hybrid")
RESIDUALS = ("identity", "denseformer", "layerscale", "hyper", "attnres")


@dataclass(frozen=True)
class MethodSpec:
    """How one method maps onto the five interchange slots."""

    tag: str
    mixing: str = "softmax"
    structure: str = "plain"
    qk_norm: bool = False
    ffn: str = "swiglu"
    norm: str = "pre"
    residual: str = "identity"

    def __post_init__(self):
        if self.mixing not in MIXINGS:
            raise ValueError(f"unknown mixing {self.mixing!r}")
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}")
        if self.ffn not in FFNS:
            raise ValueError(f"unknown ffn {self.ffn!r}")
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.residual not in RESIDUALS:
            raise ValueError(f"unknown residual {self.residual!r}")


CATALOG: dict[str, MethodSpec] = {
    "baseline": MethodSpec("baseline"),
    "softpick": MethodSpec("softpick", mixing="softpick"),
    "qknorm": MethodSpec("qknorm", qk_norm=True),
    "selective_attn": MethodSpec("selective_attn", structure="selective"),
    "selective_qknorm": MethodSpec("selective_qknorm", structure="selective", qk_norm=True),
    "value_residual": MethodSpec("value_residual", structure="value_residual"),
    "diff_attn": MethodSpec("diff_attn", structure="diff"),
    "sigmoid_attn": MethodSpec("sigmoid_attn", mixing="sigmoid"),
    "ssmax": MethodSpec("ssmax", mixing="ssmax"),
    "softmax_cap": MethodSpec("softmax_cap", mixing="cap"),
    "gated_attn_qknorm": MethodSpec("gated_attn_qknorm", structure="gated", qk_norm=True),
    "geglu_ffn": MethodSpec("geglu_ffn", ffn="geglu"),
    "qknorm_geglu": MethodSpec("qknorm_geglu", qk_norm=True, ffn="geglu"),
    "relu_squared": MethodSpec("relu_squared", ffn="relu_squared"),
    "sandwich_norm": MethodSpec("sandwich_norm", norm="sandwich"),
    "hybrid_norm": MethodSpec("hybrid_norm", norm="hybrid"),
    "denseformer": MethodSpec("denseformer", residual="denseformer"),
    "layerscale": MethodSpec("layerscale", residual="layerscale"),
    "hyper": MethodSpec("hyper", residual="hyper"),
    "attnres": MethodSpec("attnres", residual="attnres"),
}

METHOD_TAGS = tuple(CATALOG)

# The ten methods that touch the attention computation itself, with their
# documented mixing-weight character: soft keeps row-stochastic weights,
# hard does not (rows may not sum to 1 or entries may go negative).
ATTENTION_TAGS = (
    "softpick", "qknorm", "selective_attn", "selective_qknorm", "value_residual",
    "diff_attn", "sigmoid_attn", "ssmax", "softmax_cap", "gated_attn_qknorm",
)
SOFT_TAGS = frozenset({
    "qknorm", "selective_attn", "selective_qknorm", "softmax_cap",
    "ssmax", "value_residual", "gated_attn_qknorm",
})
HARD_TAGS = frozenset({"sigmoid_attn", "softpick", "diff_attn"})

DEFAULT_CAP = 50.0


def get_method(method) -> MethodSpec:
    if isinstance(method, MethodSpec):
        return method
    if method not in CATALOG:
        raise KeyError(f"unknown method tag {method!r}; known: {sorted(CATALOG)}")
    return CATALOG[method]


def default_mask_heads(n_heads: int) -> int:
    """Masking-head count for selective attention: one eighth, at least one."""
    return max(1, n_heads // 8)


def causal_visible(s: int) -> np.ndarray:
    return np.tril(np.ones((s, s), dtype=bool))


def ssmax_scale(s_logit: Tensor) -> Tensor:
    """Per-head scale s = softplus(s_logit) + 0.5 (init s_logit=0 -> ~1.1931)."""
    return (s_logit.exp() + 1.0).log() + 0.5


def mixing_transform(kind: str, scores: Tensor, visible: np.ndarray, *,
                     n_fixed: int | None = None, b: Tensor | None = None,
                     s_logit: Tensor | None = None, cap: float = DEFAULT_CAP):
    """Turn scaled attention logits into mixing weights.

    scores: (..., s, s) logits already scaled by 1/sqrt(d_head); visible is
    the boolean causal mask over the trailing two axes. Returns (weights,
    empty) where empty flags rows with no visible key (all-zero weights,
    never NaN).

      softmax   plain row softmax over visible keys
      softpick  relu(softmax - 1/n) with n = the row's visible-key count
      sigmoid   sigmoid(z + b) / n_fixed, n_fixed = training sequence length
      ssmax     softmax of z * s * ln(n_visible), s = softplus(s_logit)+0.5
      cap       softmax of z clamped to [-cap, +cap] before masking
    """
    s = scores.data.shape[-1]
    vis = np.asarray(visible, dtype=bool)
    n_vis = vis.sum(axis=-1).astype(np.float64)  # (s,)
    empty_rows = n_vis == 0.0

    if kind == "softmax":
        return softmax_rows(scores, vis)

    if kind == "cap":
        return softmax_rows(scores.clip(-cap, cap), vis)

    if kind == "ssmax":
        if s_logit is None:
            raise ValueError("ssmax needs its per-head s_logit parameter")
        log_n = np.log(np.where(empty_rows, 1.0, n_vis))[:, None]  # (s, 1)
        shape = (-1,) + (1,) * (scores.data.ndim - 1)
        s_head = ssmax_scale(s_logit).reshape(shape)
        return softmax_rows(scores * s_head * Tensor(log_n), vis)

    if kind == "softpick":
        w, empty = softmax_rows(scores, vis)
        inv_n = np.where(empty_rows, 0.0, 1.0 / np.where(empty_rows, 1.0, n_vis))
        return (w - Tensor(inv_n[:, None])).relu(), empty

    if kind == "sigmoid":
        if n_fixed is None or b is None:
            raise ValueError("sigmoid mixing needs n_fixed and its bias parameter")
        gate = (scores + b).sigmoid() * Tensor(vis.astype(np.float64))
        return gate * (1.0 / float(n_fixed)), empty_rows

    raise ValueError(f"unknown mixing kind {kind!r}")


def selective_mask(scores_masking: Tensor, visible: np.ndarray) -> Tensor:
    """Accumulated distraction mask from the masking heads' scores.

    scores_masking: (m, s, s) scaled logits of the masking heads. ReLU'd,
    zeroed on the diagonal (no self-masking), in column 0 (the first token
    stays visible), and at causally invisible positions, then summed over
    the masking heads to give one (s, s) penalty subtracted from every
    attention head's logits before the softmax.
    """
    s = scores_masking.data.shape[-1]
    keep = np.asarray(visible, dtype=np.float64).copy()
    np.fill_diagonal(keep, 0.0)
    keep[:, 0] = 0.0
    return (scores_masking.relu() * Tensor(keep)).sum(axis=0)


def value_residual_mix(v: Tensor, v_first: Tensor, lam: Tensor) -> Tensor:
    """(1 - lambda) * V_l + lambda * V_first; lambda a learnable scalar."""
    return v * (1.0 - lam) + v_first * lam


def gated_output(attn_heads: Tensor, x: Tensor, w_g: Tensor) -> Tensor:
    """Per-head sigmoid gate on head outputs before the output projection.

    attn_heads: (H, s, d_head); x: (s, d) the sublayer input; w_g: (d, H).
    W_g = 0 gives a gate of exactly 0.5 on every head.
    """
    gate = (x @ w_g).sigmoid()           # (s, H)
    return attn_heads * gate.swapaxes(0, 1).reshape(gate.shape[1], gate.shape[0], 1)


def attn_residual_mix(current: Tensor, history: list[Tensor], w: Tensor,
                      eps: float = 1e-5) -> Tensor:
    """Attention over the layer axis replacing the post-attention residual.

    Candidates are the stream values in `history` (embedding stream plus
    previous block outputs) and the current attention contribution. Each
    candidate is keyed per position by w . RMSNorm(v) / sqrt(d); the output
    mixes the raw candidate values with those softmax weights. w = 0 gives
    the plain mean of the candidates.
    """
    if not history:
        raise ValueError("attn_residual_mix needs a non-empty history")
    cands = list(history) + [current]
    d = current.data.shape[-1]
    scale = 1.0 / np.sqrt(d)
    logits = []
    for v in cands:
        ms = (v * v).mean(axis=-1, keepdims=True)
        normed = v * (ms + eps) ** -0.5
        logits.append((normed @ w.reshape(d, 1)) * scale)   # (s, 1)
    alpha, _ = softmax_rows(concat(logits, axis=1))          # (s, n_cands)
    out = cands[0] * alpha[:, 0:1]
    for i, v in enumerate(cands[1:], start=1):
        out = out + v * alpha[:, i:i + 1]
    return out


def classify_soft_hard(tag: str, trials: int = 8, seed: int = 0,
                       s: int = 6, n_heads: int = 4) -> str:
    """Empirically label an attention method soft or hard.

    Draws random scaled logits, computes the effective weights the method
    applies to values, and checks row-stochasticity (entries >= 0, visible
    rows summing to 1 within 1e-6) across all trials. Any violation makes
    the method hard.
    """
    if tag not in ATTENTION_TAGS:
        raise ValueError(f"{tag!r} does not modify the attention weights")
    spec = get_method(tag)
    rng = np.random.default_rng(seed)
    vis = causal_visible(s)
    for _ in range(trials):
        z = Tensor(rng.normal(0.0, 1.0, size=(n_heads, s, s)))
        if spec.structure == "selective":
            pen = selective_mask(z[n_heads - 1:n_heads], vis)
            w, _ = softmax_rows(z[0:n_heads - 1] - pen, vis)
        elif spec.structure == "diff":
            z2 = Tensor(rng.normal(0.0, 1.0, size=(n_heads, s, s)))
            w1, _ = softmax_rows(z, vis)
            w2, _ = softmax_rows(z2, vis)
            w = w1 - w2 * 0.2
        elif spec.mixing != "softmax":
            params = {}
            if spec.mixing == "sigmoid":
                params = dict(n_fixed=s, b=Tensor(0.0))
            elif spec.mixing == "ssmax":
                params = dict(s_logit=Tensor(np.zeros(n_heads)))
            w, _ = mixing_transform(spec.mixing, z, vis, **params)
        else:
            # value_residual / gated / qk-norm variants leave the weights alone
            w, _ = softmax_rows(z, vis)
        if not _row_stochastic(w.data, vis):
            return "hard"
    return "soft"


def _row_stochastic(w: np.ndarray, visible: np.ndarray) -> bool:
    if (w < -1e-9).any():
        return False
    sums = w.sum(axis=-1)
    nonempty = visible.sum(axis=-1) > 0
    return bool(np.all(np.abs(sums[..., nonempty] - 1.0) <= 1e-6))
