"""Small pre-norm decoder with grouped-query attention, assembled per method.

Baseline: token embedding (tied with the output head), RMSNorm pre-norm
blocks of GQA attention + SwiGLU FFN, RoPE on q/k, final norm. A MethodSpec
swaps mixing function, attention structure, q/k normalization, FFN family,
norm placement, and residual wiring. All math runs through the float64
autodiff engine so every variant is gradient-checkable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .methods import (MethodSpec, attn_residual_mix, causal_visible,
                      default_mask_heads, gated_output, get_method,
                      mixing_transform, selective_mask, value_residual_mix)
from .tensor import (Parameter, Tensor, cross_entropy, gather, rmsnorm,
                     rope_apply, softmax_rows)


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    n_kv_heads: int = 2
    d_inter: int = 176
    vocab_size: int = 257
    context: int = 32
    rope_base: float = 10000.0
    rms_eps: float = 1e-5
    init_std: float = 0.02

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must divide evenly into heads")
        if self.n_heads % self.n_kv_heads != 0:
            raise ValueError("n_heads must be a multiple of n_kv_heads")
        if (self.d_model // self.n_heads) % 2 != 0:
            raise ValueError("head dim must be even for rotary pairs")
        for f in ("d_model", "n_layers", "n_heads", "n_kv_heads", "d_inter",
                  "vocab_size", "context"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def d_kv(self) -> int:
        return self.n_kv_heads * self.d_head


# Toy config is the dataclass default: ratio-matched to the full model
# (d_inter/d_model = 2.75, 4:1 query-to-kv grouping).
TOY = ModelConfig()

SCALES = {
    "toy": TOY,
    "1.2B": ModelConfig(d_model=2048, n_layers=24, n_heads=32, n_kv_heads=8,
                        d_inter=5632, vocab_size=65664, context=1024),
    "3B": ModelConfig(d_model=3072, n_layers=28, n_heads=32, n_kv_heads=8,
                      d_inter=8448, vocab_size=65664, context=1024),
}


def resolve_scale(tag: str) -> ModelConfig:
    for name, cfg in SCALES.items():
        if name.lower() == str(tag).lower():
            return cfg
    raise KeyError(f"unknown scale tag {tag!r}; known: {sorted(SCALES)}")


def relu_squared_width(d_inter: int) -> int:
    """Iso-parameter width for the two-matrix ReLU^2 FFN (1.5x the 3-matrix one)."""
    return round(1.5 * d_inter)


class DecoderModel:
    """One decoder instance: config + method + seed-replayable parameters."""

    def __init__(self, cfg: ModelConfig, method="baseline", seed: int = 0):
        self.cfg = cfg
        self.method = get_method(method)
        self.seed = int(seed)
        self.mask_heads = (default_mask_heads(cfg.n_heads)
                           if self.method.structure == "selective" else 0)
        self.params: list[Parameter] = []
        self._by_name: dict[str, Parameter] = {}
        self._build(np.random.default_rng(self.seed))

    # -- construction -------------------------------------------------------

    def _add(self, name: str, data, init_spec: str) -> Parameter:
        if name in self._by_name:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Parameter(name, data, init_spec)
        self.params.append(p)
        self._by_name[name] = p
        return p

    def _normal(self, name, shape, rng):
        std = self.cfg.init_std
        self._add(name, rng.normal(0.0, std, size=shape), f"normal(0,{std})")

    def _const(self, name, shape, value):
        self._add(name, np.full(shape, float(value)), f"constant({value})")

    def _build(self, rng):
        cfg, m = self.cfg, self.method
        d, dh = cfg.d_model, cfg.d_head
        h, hkv = cfg.n_heads, cfg.n_kv_heads
        h_att = h - self.mask_heads

        self._normal("embed", (cfg.vocab_size, d), rng)
        for i in range(cfg.n_layers):
            pre = f"layers.{i}."
            self._const(pre + "attn_norm.scale", (d,), 1.0)
            self._normal(pre + "attn.wq", (d, h * dh), rng)
            self._normal(pre + "attn.wk", (d, hkv * dh), rng)
            self._normal(pre + "attn.wv", (d, hkv * dh), rng)
            self._normal(pre + "attn.wo", (h_att * dh, d), rng)
            if m.qk_norm:
                self._const(pre + "attn.q_scale", (dh,), 1.0)
                self._const(pre + "attn.k_scale", (dh,), 1.0)
            if m.mixing == "sigmoid":
                self._const(pre + "attn.sig_b", (), 0.0)
            if m.mixing == "ssmax":
                self._const(pre + "attn.ssmax_logit", (h,), 0.0)
            if m.structure == "diff":
                lam0 = 0.8 - 0.6 * np.exp(-0.3 * i)  # layer index 1-based in the schedule
                self._const(pre + "attn.diff_lambda", (), lam0)
                self._const(pre + "attn.gn_scale", (h * dh,), 1.0)
            if m.structure == "value_residual" and i > 0:
                self._const(pre + "attn.vr_lambda", (), 0.5)
            if m.structure == "gated":
                self._normal(pre + "attn.wg", (d, h), rng)
            self._const(pre + "ffn_norm.scale", (d,), 1.0)
            if m.ffn == "relu_squared":
                w = relu_squared_width(cfg.d_inter)
                self._normal(pre + "ffn.w_up", (d, w), rng)
                self._normal(pre + "ffn.w_down", (w, d), rng)
            else:
                self._normal(pre + "ffn.w_gate", (d, cfg.d_inter), rng)
                self._normal(pre + "ffn.w_up", (d, cfg.d_inter), rng)
                self._normal(pre + "ffn.w_down", (cfg.d_inter, d), rng)
            if m.norm == "sandwich":
                self._const(pre + "attn_post.scale", (d,), 1.0)
                self._const(pre + "ffn_post.scale", (d,), 1.0)
            if m.norm == "hybrid":
                self._const(pre + "ffn_post.scale", (d,), 1.0)
            if m.residual == "layerscale":
                self._const(pre + "ls_attn", (d,), 1e-4)
                self._const(pre + "ls_ffn", (d,), 1e-4)
            if m.residual == "hyper":
                self._const(pre + "hyper_alpha", (), 0.0)
                self._const(pre + "hyper_beta_logit", (), -2.2)
            if m.residual == "attnres":
                self._normal(pre + "attnres_w", (d,), rng)
            if m.residual == "denseformer":
                dwa = np.zeros(i + 1)
                dwa[i] = 1.0
                self._add(pre + "dwa", dwa, "identity")
        self._const("final_norm.scale", (d,), 1.0)

    # -- lookups ---------------------------------------------------------------

    def param(self, name: str) -> Parameter:
        return self._by_name[name]

    def _t(self, layer: int, name: str) -> Tensor:
        return self._by_name[f"layers.{layer}.{name}"].tensor

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    # -- forward ---------------------------------------------------------------

    def forward(self, tokens) -> Tensor:
        """Token ids -> logits (s, vocab). Causal; tied output head."""
        t = np.asarray(tokens, dtype=np.int64)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("tokens must be a non-empty 1-D id sequence")
        if t.size > self.cfg.context:
            raise ValueError(f"sequence length {t.size} exceeds context {self.cfg.context}")
        if (t < 0).any() or (t >= self.cfg.vocab_size).any():
            raise ValueError("token id out of vocabulary range")

        embed = self._by_name["embed"].tensor
        x = gather(embed, t)
        state = self._fresh_state(x)
        pos = np.arange(t.size)
        vis = causal_visible(t.size)
        for i in range(self.cfg.n_layers):
            x = self._block(x, i, pos, vis, state)
        x = rmsnorm(x, self._by_name["final_norm.scale"].tensor, self.cfg.rms_eps)
        return x @ embed.swapaxes(0, 1)

    def loss(self, tokens) -> Tensor:
        """Mean next-token cross-entropy (nats) over a single sequence."""
        t = np.asarray(tokens, dtype=np.int64)
        if t.size < 2:
            raise ValueError("need at least 2 tokens for a next-token loss")
        logits = self.forward(t[:-1])
        return cross_entropy(logits, t[1:])

    def _fresh_state(self, x0: Tensor) -> dict:
        state = {"v_first": None, "ema": None}
        if self.method.residual == "attnres":
            state["attnres_hist"] = [x0]
        if self.method.residual == "denseformer":
            state["raw_outs"] = []
        return state

    def _block(self, x: Tensor, i: int, pos, vis, state) -> Tensor:
        m = self.method
        eps = self.cfg.rms_eps

        a_in = rmsnorm(x, self._t(i, "attn_norm.scale"), eps)
        a_out = self.attention(a_in, i, pos, vis, state)
        if m.norm == "sandwich":
            a_out = rmsnorm(a_out, self._t(i, "attn_post.scale"), eps)
        x = self._combine(x, a_out, i, "attn", state)

        f_in = rmsnorm(x, self._t(i, "ffn_norm.scale"), eps)
        f_out = self.ffn(f_in, i)
        if m.norm == "sandwich":
            f_out = rmsnorm(f_out, self._t(i, "ffn_post.scale"), eps)
        if m.norm == "hybrid":
            # post-norm on the FFN sublayer only; attention stays pre-norm
            x = rmsnorm(x + f_out, self._t(i, "ffn_post.scale"), eps)
        else:
            x = self._combine(x, f_out, i, "ffn", state)

        if m.residual == "attnres":
            state["attnres_hist"].append(x)
        if m.residual == "denseformer":
            state["raw_outs"].append(x)
            dwa = self._t(i, "dwa")
            mixed = state["raw_outs"][0] * dwa[0]
            for j in range(1, i + 1):
                mixed = mixed + state["raw_outs"][j] * dwa[j]
            x = mixed
        return x

    def _combine(self, x: Tensor, f: Tensor, i: int, which: str, state) -> Tensor:
        m = self.method
        if m.residual == "layerscale":
            return x + f * self._t(i, f"ls_{which}")
        if m.residual == "hyper":
            beta = self._t(i, "hyper_beta_logit").sigmoid()
            ema = state["ema"]
            if ema is None:
                ema = Tensor(np.zeros_like(f.data))
            ema = ema * (1.0 - beta) + f * beta
            state["ema"] = ema
            return x + f + ema * self._t(i, "hyper_alpha")
        if m.residual == "attnres" and which == "attn":
            return attn_residual_mix(f, state["attnres_hist"],
                                     self._t(i, "attnres_w"), self.cfg.rms_eps)
        # identity; denseformer mixes whole block outputs, in-block stays standard
        return x + f

    def attention(self, a_in: Tensor, i: int, pos, vis, state=None) -> Tensor:
        """Attention sublayer on a normalized input (s, d) -> (s, d)."""
        cfg, m = self.cfg, self.method
        if state is None:
            state = self._fresh_state(a_in)
        s = a_in.data.shape[0]
        h, hkv, dh = cfg.n_heads, cfg.n_kv_heads, cfg.d_head

        q = (a_in @ self._t(i, "attn.wq")).reshape(s, h, dh).transpose((1, 0, 2))
        k = (a_in @ self._t(i, "attn.wk")).reshape(s, hkv, dh).transpose((1, 0, 2))
        v = (a_in @ self._t(i, "attn.wv")).reshape(s, hkv, dh).transpose((1, 0, 2))
        if m.qk_norm:
            q = rmsnorm(q, self._t(i, "attn.q_scale"), cfg.rms_eps)
            k = rmsnorm(k, self._t(i, "attn.k_scale"), cfg.rms_eps)
        q = rope_apply(q, pos, cfg.rope_base)
        k = rope_apply(k, pos, cfg.rope_base)

        if m.structure == "value_residual":
            if i == 0:
                state["v_first"] = v
            elif state["v_first"] is not None:
                v = value_residual_mix(v, state["v_first"], self._t(i, "attn.vr_lambda"))

        group = np.repeat(np.arange(hkv), h // hkv)
        kx = gather(k, group)
        vx = gather(v, group)

        if m.structure == "diff":
            half = dh // 2
            sc = 1.0 / np.sqrt(half)
            s1 = (q[:, :, :half] @ kx[:, :, :half].swapaxes(-1, -2)) * sc
            s2 = (q[:, :, half:] @ kx[:, :, half:].swapaxes(-1, -2)) * sc
            w1, _ = softmax_rows(s1, vis)
            w2, _ = softmax_rows(s2, vis)
            out = (w1 - w2 * self._t(i, "attn.diff_lambda")) @ vx
            mu = out.mean(axis=-1, keepdims=True)
            c = out - mu
            var = (c * c).mean(axis=-1, keepdims=True)
            out = c * (var + cfg.rms_eps) ** -0.5
            heads = out.transpose((1, 0, 2)).reshape(s, h * dh) * self._t(i, "attn.gn_scale")
            return heads @ self._t(i, "attn.wo")

        scores = (q @ kx.swapaxes(-1, -2)) * (1.0 / np.sqrt(dh))

        if m.structure == "selective":
            h_att = h - self.mask_heads
            pen = selective_mask(scores[h_att:], vis)
            w, _ = softmax_rows(scores[:h_att] - pen, vis)
            out = w @ vx[:h_att]
            heads = out.transpose((1, 0, 2)).reshape(s, h_att * dh)
            return heads @ self._t(i, "attn.wo")

        kwargs = {}
        if m.mixing == "sigmoid":
            kwargs = dict(n_fixed=cfg.context, b=self._t(i, "attn.sig_b"))
        elif m.mixing == "ssmax":
            kwargs = dict(s_logit=self._t(i, "attn.ssmax_logit"))
        w, _ = mixing_transform(m.mixing, scores, vis, **kwargs)
        out = w @ vx
        if m.structure == "gated":
            out = gated_output(out, a_in, self._t(i, "attn.wg"))
        heads = out.transpose((1, 0, 2)).reshape(s, h * dh)
        return heads @ self._t(i, "attn.wo")

    def ffn(self, f_in: Tensor, i: int) -> Tensor:
        """FFN sublayer on a normalized input (s, d) -> (s, d)."""
        m = self.method
        if m.ffn == "relu_squared":
            a = (f_in @ self._t(i, "ffn.w_up")).relu()
            return (a * a) @ self._t(i, "ffn.w_down")
        gate = f_in @ self._t(i, "ffn.w_gate")
        act = gate.silu() if m.ffn == "swiglu" else gate.gelu()
        return (act * (f_in @ self._t(i, "ffn.w_up"))) @ self._t(i, "ffn.w_down")

    # -- checkpointing ------------------------------------------------------------

    def save(self, prefix: str) -> None:
        """Write <prefix>.npz (flat named arrays) and <prefix>.manifest.json."""
        np.savez(prefix + ".npz", **{p.name: p.data for p in self.params})
        manifest = {
            "config": asdict(self.cfg),
            "method": self.method.tag,
            "seed": self.seed,
            "params": [{"name": p.name, "shape": list(p.data.shape),
                        "init_spec": p.init_spec} for p in self.params],
        }
        with open(prefix + ".manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=1)

    @classmethod
    def load(cls, prefix: str) -> "DecoderModel":
        with open(prefix + ".manifest.json") as fh:
            manifest = json.load(fh)
        model = cls(ModelConfig(**manifest["config"]), manifest["method"],
                    manifest["seed"])
        with np.load(prefix + ".npz") as arrays:
            for p in model.params:
                stored = arrays[p.name]
                if stored.shape != p.data.shape:
                    raise ValueError(f"shape mismatch for {p.name}")
                p.data = stored
        return model


def decoder_forward(tokens, cfg: ModelConfig, method="baseline", seed: int = 0) -> Tensor:
    """Convenience: build a fresh model and run one forward pass."""
    return DecoderModel(cfg, method, seed).forward(tokens)


def swiglu_ffn(x: Tensor, w_gate: Tensor, w_up: Tensor, w_down: Tensor) -> Tensor:
    """silu(x W_gate) * (x W_up) W_down."""
    return ((x @ w_gate).silu() * (x @ w_up)) @ w_down
