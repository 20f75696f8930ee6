import numpy as np
import pytest

from modbench.accounting import count_params
from modbench.methods import METHOD_TAGS, default_mask_heads
from modbench.model import (SCALES, TOY, DecoderModel, ModelConfig,
                            decoder_forward, relu_squared_width, resolve_scale)
from modbench.tensor import grad_check

# small enough that every test here stays fast
CFG = ModelConfig(d_model=16, n_layers=2, n_heads=4, n_kv_heads=2,
                  d_inter=44, vocab_size=31, context=8)
TOKS = (np.arange(8) * 3) % 31


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d_model=10, n_heads=3)
    with pytest.raises(ValueError):
        ModelConfig(n_heads=4, n_kv_heads=3)
    with pytest.raises(ValueError):
        ModelConfig(d_model=6, n_heads=2)  # odd head dim breaks rotary pairs
    assert TOY.d_head == 16
    assert TOY.d_kv == 32


def test_resolve_scale():
    assert resolve_scale("toy") is TOY
    assert resolve_scale("1.2b").d_model == 2048
    with pytest.raises(KeyError):
        resolve_scale("9T")


def test_relu_squared_width_ratio():
    assert relu_squared_width(176) == 264
    assert relu_squared_width(5632) == 8448


def test_forward_shapes_and_loss_all_methods():
    for tag in METHOD_TAGS:
        m = DecoderModel(CFG, tag, seed=0)
        logits = m.forward(TOKS)
        assert logits.shape == (8, 31), tag
        loss = m.loss(TOKS).item()
        assert np.isfinite(loss), tag
        # near-uniform predictions at init
        assert abs(loss - np.log(31)) < 0.5, tag


def test_forward_rejects_overlong_input():
    m = DecoderModel(CFG, "baseline", 0)
    with pytest.raises(ValueError):
        m.forward(np.zeros(CFG.context + 1, dtype=np.int64))


def test_loss_needs_two_tokens():
    m = DecoderModel(CFG, "baseline", 0)
    with pytest.raises(ValueError):
        m.loss([5])


def test_identity_at_init_exact():
    """Residual rewirings whose new weights start at the neutral point
    must reproduce the reference forward bit for bit."""
    ref = DecoderModel(CFG, "baseline", seed=7).forward(TOKS).data
    for tag in ("denseformer", "hyper", "softmax_cap"):
        out = DecoderModel(CFG, tag, seed=7).forward(TOKS).data
        assert np.array_equal(out, ref), tag


def test_value_residual_single_layer_is_plain():
    # the first layer never mixes, so a one-layer model matches exactly
    cfg = ModelConfig(d_model=16, n_layers=1, n_heads=4, n_kv_heads=2,
                      d_inter=44, vocab_size=31, context=8)
    ref = DecoderModel(cfg, "baseline", seed=7).forward(TOKS).data
    out = DecoderModel(cfg, "value_residual", seed=7).forward(TOKS).data
    assert np.array_equal(out, ref)


def test_value_residual_later_layers_mix():
    ref = DecoderModel(CFG, "baseline", seed=7).forward(TOKS).data
    out = DecoderModel(CFG, "value_residual", seed=7).forward(TOKS).data
    assert not np.array_equal(out, ref)


def test_layerscale_starts_near_zero_blocks():
    m = DecoderModel(CFG, "layerscale", seed=0)
    # with gamma = 1e-4 the blocks barely perturb the embedding stream
    emb = m.param("embed").data[TOKS]
    out = m.forward(TOKS)
    # compare pre-head stream indirectly: logits almost equal embed @ embed.T
    # after the final norm of the raw embeddings
    base = DecoderModel(CFG, "layerscale", seed=0)
    for p in base.params:
        if p.name.startswith(("ls_attn", "ls_ffn")) or ".ls_" in p.name:
            p.data = np.zeros_like(p.data)
    frozen = base.forward(TOKS)
    assert np.allclose(out.data, frozen.data, atol=1e-2)
    assert not np.array_equal(out.data, frozen.data)
    assert emb.shape == (8, 16)


def test_diff_lambda_schedule():
    cfg = ModelConfig(d_model=16, n_layers=4, n_heads=4, n_kv_heads=2,
                      d_inter=44, vocab_size=31, context=8)
    m = DecoderModel(cfg, "diff_attn", seed=0)
    for i in range(4):
        lam = float(m.param(f"layers.{i}.attn.diff_lambda").data)
        assert lam == pytest.approx(0.8 - 0.6 * np.exp(-0.3 * i))
    assert float(m.param("layers.0.attn.diff_lambda").data) == pytest.approx(0.2)


def test_selective_model_shrinks_output_projection():
    m = DecoderModel(CFG, "selective_attn", seed=0)
    assert m.mask_heads == default_mask_heads(CFG.n_heads) == 1
    h_att = CFG.n_heads - 1
    assert m.param("layers.0.attn.wo").data.shape == (h_att * CFG.d_head,
                                                      CFG.d_model)


def test_param_count_matches_accounting():
    """The analytic accounting equals the instantiated model for every
    method except the selective pair, whose published count also charges
    the V projection share that grouped KV heads cannot actually drop."""
    for tag in METHOD_TAGS:
        acct = count_params(CFG, tag).total_params
        model = DecoderModel(CFG, tag, seed=0).param_count()
        if tag in ("selective_attn", "selective_qknorm"):
            gap = CFG.n_layers * default_mask_heads(CFG.n_heads) * \
                CFG.d_head * CFG.d_model
            assert model - acct == gap, tag
        else:
            assert model == acct, tag


def test_qknorm_adds_per_head_scales():
    m = DecoderModel(CFG, "qknorm", seed=0)
    assert m.param("layers.0.attn.q_scale").data.shape == (CFG.d_head,)
    assert m.param("layers.1.attn.k_scale").data.shape == (CFG.d_head,)


def test_relu_squared_uses_widened_two_matrix_ffn():
    m = DecoderModel(CFG, "relu_squared", seed=0)
    w = relu_squared_width(CFG.d_inter)
    assert m.param("layers.0.ffn.w_up").data.shape == (CFG.d_model, w)
    with pytest.raises(KeyError):
        m.param("layers.0.ffn.w_gate")


def test_sigmoid_attention_normalizer_is_training_length():
    # halving the context halves the fixed normalizer, changing the output
    short = ModelConfig(d_model=16, n_layers=2, n_heads=4, n_kv_heads=2,
                        d_inter=44, vocab_size=31, context=16)
    a = DecoderModel(CFG, "sigmoid_attn", seed=7).forward(TOKS).data
    b = DecoderModel(short, "sigmoid_attn", seed=7).forward(TOKS).data
    assert not np.allclose(a, b)


def test_determinism_same_seed():
    a = DecoderModel(CFG, "attnres", seed=11).forward(TOKS).data
    b = DecoderModel(CFG, "attnres", seed=11).forward(TOKS).data
    assert np.array_equal(a, b)
    c = DecoderModel(CFG, "attnres", seed=12).forward(TOKS).data
    assert not np.array_equal(a, c)


def test_save_load_round_trip(tmp_path):
    m = DecoderModel(CFG, "gated_attn_qknorm", seed=5)
    before = m.loss(TOKS).item()
    prefix = str(tmp_path / "ckpt")
    m.save(prefix)
    loaded = DecoderModel.load(prefix)
    assert loaded.method.tag == "gated_attn_qknorm"
    assert loaded.loss(TOKS).item() == before
    for p, q in zip(m.params, loaded.params):
        assert p.name == q.name
        assert np.array_equal(p.data, q.data)


def test_decoder_forward_helper():
    out = decoder_forward(TOKS, CFG, "baseline", seed=0)
    assert out.shape == (8, 31)


def test_grad_check_every_method_small_config():
    for tag in METHOD_TAGS:
        m = DecoderModel(CFG, tag, seed=3)
        err = grad_check(lambda: m.loss(TOKS), m.params, n_sample=2, seed=1)
        assert err < 1e-5, f"{tag}: {err}"
