"""Training loop at desk scale: AdamW, warmup+cosine, clipping, packing,
and the grad-norm divergence monitor.

One recipe is shared across all methods; the per-run seed controls only
model initialization. Runs that hit NaN are recorded as diverged with the
step and a qualitative signature, never discarded.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import DecoderModel, ModelConfig


@dataclass(frozen=True)
class RecipeConfig:
    lr_peak: float = 3e-4
    betas: tuple = (0.9, 0.95)
    weight_decay: float = 0.1
    clip_norm: float = 1.0
    warmup_steps: int = 2000
    total_steps: int = 44000
    final_lr_fraction: float = 0.1
    tokens_per_step: int = 1048576
    adam_eps: float = 1e-8
    log_every: int = 1

    def __post_init__(self):
        if not (0 < self.warmup_steps < self.total_steps):
            raise ValueError("need 0 < warmup_steps < total_steps")
        for f in ("lr_peak", "weight_decay", "clip_norm", "final_lr_fraction",
                  "tokens_per_step"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")


def toy_recipe(total_steps: int = 200, tokens_per_step: int = 32,
               warmup_steps: int = 20) -> RecipeConfig:
    return RecipeConfig(warmup_steps=warmup_steps, total_steps=total_steps,
                        tokens_per_step=tokens_per_step)


def lr_at_step(step: int, r: RecipeConfig) -> float:
    """Linear 0 -> lr_peak over warmup, cosine to final_lr_fraction at the end."""
    if not 0 <= step <= r.total_steps:
        raise ValueError(f"step {step} outside [0, {r.total_steps}]")
    if step <= r.warmup_steps:
        return r.lr_peak * step / r.warmup_steps
    lr_final = r.lr_peak * r.final_lr_fraction
    frac = (step - r.warmup_steps) / (r.total_steps - r.warmup_steps)
    return float(lr_final + (r.lr_peak - lr_final) * 0.5 * (1.0 + np.cos(np.pi * frac)))


class DivergenceSignal(Exception):
    """Raised when NaN/inf enters the loss or gradients."""

    def __init__(self, nan_step: int, window=None, signature: str = "none"):
        super().__init__(f"non-finite values at step {nan_step} ({signature})")
        self.nan_step = nan_step
        self.grad_norm_window = list(window or [])
        self.signature = signature


def clip_grad(grads: dict, max_norm: float):
    """Global-L2 clip over all gradients; returns (clipped, pre_clip_norm)."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    sq = 0.0
    for g in grads.values():
        sq += float((g * g).sum())
    pre = float(np.sqrt(sq))
    if pre <= max_norm:
        return dict(grads), pre
    scale = max_norm / pre
    return {k: g * scale for k, g in grads.items()}, pre


def adamw_init(params) -> dict:
    return {"t": 0,
            "m": {p.name: np.zeros_like(p.data) for p in params},
            "v": {p.name: np.zeros_like(p.data) for p in params}}


def adamw_step(params, grads: dict, state: dict, lr: float, r: RecipeConfig) -> dict:
    """One decoupled-decay AdamW update; raises DivergenceSignal on NaN grads."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceSignal(state["t"] + 1)
    b1, b2 = r.betas
    state = {"t": state["t"] + 1,
             "m": dict(state["m"]), "v": dict(state["v"])}
    t = state["t"]
    for p in params:
        g = grads.get(p.name)
        if g is None:
            continue
        # decay is decoupled and applied before the update direction
        new = p.data * (1.0 - lr * r.weight_decay)
        m = b1 * state["m"][p.name] + (1.0 - b1) * g
        v = b2 * state["v"][p.name] + (1.0 - b2) * g * g
        state["m"][p.name] = m
        state["v"][p.name] = v
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p.data = new - lr * m_hat / (np.sqrt(v_hat) + r.adam_eps)
    return state


# -- corpus packing ---------------------------------------------------------------


@dataclass
class PackingReport:
    seq_len: int
    n_docs: int = 0
    raw_tokens: int = 0
    separators: int = 0
    n_sequences: int = 0
    discarded_tokens: int = 0
    n_shards: int = 1

    @property
    def n_tokens(self) -> int:
        return self.raw_tokens + self.separators

    @property
    def discard_fraction(self) -> float:
        return self.discarded_tokens / self.n_tokens if self.n_tokens else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_tokens"] = self.n_tokens
        d["discard_fraction"] = self.discard_fraction
        return d

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def pack_corpus(docs, seq_len: int, separator: int = 0,
                shuffle_seed: int | None = 0):
    """Concatenate docs with a separator after each, chunk, drop the tail.

    Returns (sequences (n, seq_len) int array, PackingReport). The shuffle
    seed orders the finished sequences deterministically; None keeps stream
    order. Token conservation: kept + discarded = raw + separators.
    """
    if seq_len < 2:
        raise ValueError("seq_len must be at least 2")
    report = PackingReport(seq_len=seq_len)
    stream = []
    for doc in docs:
        d = np.asarray(doc, dtype=np.int64)
        stream.append(d)
        stream.append(np.array([separator], dtype=np.int64))
        report.n_docs += 1
        report.raw_tokens += int(d.size)
        report.separators += 1
    if not stream:
        return np.zeros((0, seq_len), dtype=np.int64), report
    flat = np.concatenate(stream)
    n_full = flat.size // seq_len
    report.n_sequences = int(n_full)
    report.discarded_tokens = int(flat.size - n_full * seq_len)
    seqs = flat[:n_full * seq_len].reshape(n_full, seq_len)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(n_full)
        seqs = seqs[order]
    return seqs, report


# -- divergence signatures -----------------------------------------------------------


DEFAULT_SIGNATURE_THRESHOLDS = {
    "spike_ratio": 4.0,        # last finite > 4x median -> single_step_spike
    "collapse_ratio": 1.5,     # NaN after a value within 1.5x median -> direct_collapse
    "rise_ratio": 10.0,        # strictly increasing suffix spanning > 10x -> monotone_rise
    "rise_min_len": 5,
    "inflation_ratio": 10.0,   # sustained_inflation: > 25% of window above 10x median
    "inflation_fraction": 0.25,
}


def classify_signature(window, thresholds: dict | None = None) -> str:
    """Qualitative grad-norm trajectory label from a trailing window.

    Checked in order: monotone_rise (long strictly-increasing suffix
    spanning more than rise_ratio); sustained_inflation (a quarter of the
    finite window above 10x the median, NaN tail or not); then, if the
    window ends in NaN, single_step_spike vs direct_collapse by the last
    finite value against the window median. Thresholds are artifact
    constants, exposed for tuning.
    """
    th = dict(DEFAULT_SIGNATURE_THRESHOLDS)
    if thresholds:
        th.update(thresholds)
    w = np.asarray(list(window), dtype=np.float64)
    finite = w[np.isfinite(w)]
    if finite.size < 2:
        raise ValueError("signature window needs >= 2 finite entries")
    has_nan = finite.size != w.size
    median = float(np.median(finite))

    run = 1
    for i in range(finite.size - 1, 0, -1):
        if finite[i] > finite[i - 1]:
            run += 1
        else:
            break
    if run >= th["rise_min_len"]:
        lo = finite[finite.size - run]
        if lo > 0 and finite[-1] / lo > th["rise_ratio"]:
            return "monotone_rise"

    inflated = np.count_nonzero(finite > th["inflation_ratio"] * median)
    if inflated > th["inflation_fraction"] * finite.size:
        return "sustained_inflation"

    last = float(finite[-1])
    if has_nan:
        if last > th["spike_ratio"] * median:
            return "single_step_spike"
        if last <= th["collapse_ratio"] * median:
            return "direct_collapse"
    return "none"


# -- run records ---------------------------------------------------------------------


@dataclass
class RunRecord:
    method: str
    seed: int
    model_config: dict
    recipe: dict
    steps: list = field(default_factory=list)  # (step, loss, grad_norm, lr)
    final_val_loss: float | None = None
    diverged: bool = False
    nan_step: int | None = None
    signature: str = "none"

    def to_text(self) -> str:
        """Metrics file: one TSV line per logged step plus a JSON footer."""
        buf = io.StringIO()
        buf.write("step\tloss\tgrad_norm_pre_clip\tlr\n")
        for step, loss, gn, lr in self.steps:
            buf.write(f"{step}\t{float(loss)!r}\t{float(gn)!r}\t{float(lr)!r}\n")
        footer = {"method": self.method, "seed": self.seed,
                  "model_config": self.model_config, "recipe": self.recipe,
                  "final_val_loss": self.final_val_loss,
                  "diverged": self.diverged, "nan_step": self.nan_step,
                  "signature": self.signature}
        buf.write("#footer " + json.dumps(footer, sort_keys=True) + "\n")
        return buf.getvalue()

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "RunRecord":
        lines = [ln for ln in text.strip().splitlines() if ln]
        footer = json.loads(lines[-1].removeprefix("#footer "))
        steps = []
        for ln in lines[1:-1]:
            s, loss, gn, lr = ln.split("\t")
            steps.append((int(s), float(loss), float(gn), float(lr)))
        return cls(method=footer["method"], seed=footer["seed"],
                   model_config=footer["model_config"], recipe=footer["recipe"],
                   steps=steps, final_val_loss=footer["final_val_loss"],
                   diverged=footer["diverged"], nan_step=footer["nan_step"],
                   signature=footer["signature"])


def train_run(cfg: ModelConfig, method, r: RecipeConfig, corpus,
              seed: int = 0, val_sequences: int = 2,
              inject_nan_step: int | None = None,
              signature_thresholds: dict | None = None,
              window_size: int = 50) -> RunRecord:
    """Train one model on a packed corpus for r.total_steps optimizer steps.

    corpus: either raw docs (list of token lists, packed here at the model
    context length) or a pre-packed (n, seq_len) array. The trailing
    val_sequences sequences are held out for the final validation loss.
    inject_nan_step poisons the gradients at that step (fault injection).
    """
    if isinstance(corpus, np.ndarray) and corpus.ndim == 2:
        seqs = corpus
    else:
        seqs, _ = pack_corpus(corpus, cfg.context)
    if seqs.shape[0] <= val_sequences:
        raise ValueError("corpus too small for the requested validation holdout")
    train_seqs = seqs[:seqs.shape[0] - val_sequences]
    val_seqs = seqs[seqs.shape[0] - val_sequences:]

    model = DecoderModel(cfg, method, seed)
    spec = model.method
    state = adamw_init(model.params)
    n_per_step = max(1, r.tokens_per_step // cfg.context)

    record = RunRecord(method=spec.tag, seed=seed,
                       model_config=asdict(cfg), recipe=asdict(r))
    window: list = []
    cursor = 0
    try:
        for step in range(1, r.total_steps + 1):
            model.zero_grad()
            total = None
            for _ in range(n_per_step):
                seq = train_seqs[cursor % train_seqs.shape[0]]
                cursor += 1
                term = model.loss(seq)
                total = term if total is None else total + term
            loss = total * (1.0 / n_per_step)
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise DivergenceSignal(step)
            loss.backward()
            grads = {p.name: (np.zeros_like(p.data) if p.grad is None else p.grad)
                     for p in model.params}
            if inject_nan_step is not None and step == inject_nan_step:
                first = model.params[0].name
                grads[first] = np.full_like(grads[first], np.nan)
            clipped, pre_norm = clip_grad(grads, r.clip_norm)
            window.append(pre_norm)
            window[:] = window[-window_size:]
            lr = lr_at_step(step, r)
            state = adamw_step(model.params, clipped, state, lr, r)
            if step % r.log_every == 0:
                record.steps.append((step, loss_val, pre_norm, lr))
    except DivergenceSignal as sig:
        record.diverged = True
        record.nan_step = sig.nan_step
        probe = window + [np.nan]
        record.signature = (classify_signature(probe, signature_thresholds)
                            if len(window) >= 2 else "none")
        return record

    val = 0.0
    for seq in val_seqs:
        val += model.loss(seq).item()
    record.final_val_loss = val / val_seqs.shape[0]
    return record


def synthetic_corpus(n_docs: int = 64, vocab: int = 257, min_len: int = 8,
                     max_len: int = 96, seed: int = 1234) -> list:
    """Deterministic stand-in corpus: Zipf-ish random token documents."""
    rng = np.random.default_rng(seed)
    docs = []
    for _ in range(n_docs):
        length = int(rng.integers(min_len, max_len + 1))
        ranks = rng.zipf(1.4, size=length)
        docs.append((ranks % vocab).astype(np.int64).tolist())
    return docs
