import numpy as np
import pytest

from modbench.tensor import (Parameter, Tensor, concat, cross_entropy, gather,
                             grad_check, rmsnorm, rope_apply, rotate_pairs,
                             softmax_rows)


def test_add_mul_broadcast_grads():
    a = Tensor(np.ones((3, 4)), requires_grad=True)
    b = Tensor(np.arange(4.0), requires_grad=True)
    out = (a * b + b).sum()
    out.backward()
    assert np.allclose(a.grad, np.tile(np.arange(4.0), (3, 1)))
    # b receives the broadcast sum: 3 rows of a plus 3 ones
    assert np.allclose(b.grad, 3.0 * np.ones(4) + 3.0)


def test_matmul_grads_match_manual():
    rng = np.random.default_rng(0)
    a = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    b = Tensor(rng.normal(size=(5, 2)), requires_grad=True)
    (a @ b).sum().backward()
    g = np.ones((3, 2))
    assert np.allclose(a.grad, g @ b.data.T)
    assert np.allclose(b.grad, a.data.T @ g)


def test_pow_div_neg():
    x = Tensor(np.array([2.0, 4.0]), requires_grad=True)
    y = (1.0 / x - x ** 2).sum()
    y.backward()
    assert np.allclose(x.grad, -1.0 / x.data ** 2 - 2.0 * x.data)
    with pytest.raises(TypeError):
        x ** Tensor(2.0)


def test_backward_needs_scalar_without_seed():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        (x * 2.0).backward()


def test_grad_accumulates_over_reuse():
    x = Tensor(np.array(3.0), requires_grad=True)
    (x * x + x).backward()
    assert x.grad == pytest.approx(2.0 * 3.0 + 1.0)


def test_clip_gradient_gate():
    x = Tensor(np.array([-2.0, 0.0, 2.0]), requires_grad=True)
    x.clip(-1.0, 1.0).sum().backward()
    # gradient flows only strictly inside the interval
    assert np.allclose(x.grad, [0.0, 1.0, 0.0])


def test_gather_scatter_adds_duplicates():
    x = Tensor(np.eye(3), requires_grad=True)
    out = gather(x, [0, 0, 2])
    out.sum().backward()
    assert np.allclose(x.grad[0], [2.0, 2.0, 2.0])
    assert np.allclose(x.grad[1], 0.0)
    assert np.allclose(x.grad[2], 1.0)


def test_concat_splits_gradient():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    b = Tensor(np.ones((3, 2)), requires_grad=True)
    out = concat([a, b], axis=0)
    (out * np.arange(10.0).reshape(5, 2)).sum().backward()
    assert np.allclose(a.grad, [[0, 1], [2, 3]])
    assert np.allclose(b.grad, [[4, 5], [6, 7], [8, 9]])


def test_softmax_rows_masked():
    z = Tensor(np.zeros((2, 3)))
    vis = np.array([[True, True, False], [True, True, True]])
    w, empty = softmax_rows(z, vis)
    assert np.allclose(w.data[0], [0.5, 0.5, 0.0])
    assert np.allclose(w.data[1], [1 / 3] * 3)
    assert not empty.any()


def test_softmax_rows_empty_row_is_exact_zero():
    z = Tensor(np.array([[5.0, 5.0], [1.0, 2.0]]))
    vis = np.array([[False, False], [True, True]])
    w, empty = softmax_rows(z, vis)
    assert empty.tolist() == [True, False]
    assert (w.data[0] == 0.0).all()
    assert w.data[1].sum() == pytest.approx(1.0)


def test_softmax_rows_handles_huge_logits():
    z = Tensor(np.array([[1e4, -1e4, 0.0]]))
    w, _ = softmax_rows(z, np.ones((1, 3), dtype=bool))
    assert np.isfinite(w.data).all()
    assert w.data[0, 0] == pytest.approx(1.0)


def test_cross_entropy_matches_manual():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(4, 7))
    targets = np.array([1, 0, 6, 3])
    out = cross_entropy(Tensor(logits), targets)
    lse = np.log(np.exp(logits).sum(axis=1))
    manual = (lse - logits[np.arange(4), targets]).mean()
    assert out.item() == pytest.approx(manual, rel=1e-12)


def test_cross_entropy_gradient():
    rng = np.random.default_rng(2)
    p = Parameter("logits", rng.normal(size=(3, 5)), "normal")
    err = grad_check(lambda: cross_entropy(p.tensor, [0, 2, 4]), [p])
    assert err < 1e-6


def test_rope_position_zero_is_identity():
    x = Tensor(np.random.default_rng(3).normal(size=(4, 8)))
    out = rope_apply(x, [0, 1, 2, 3])
    assert np.allclose(out.data[0], x.data[0])
    assert not np.allclose(out.data[1], x.data[1])


def test_rope_preserves_pair_norms():
    x = np.random.default_rng(4).normal(size=(6, 10))
    out = rope_apply(Tensor(x), np.arange(6)).data
    assert np.allclose((out ** 2).sum(-1), (x ** 2).sum(-1))


def test_rope_rejects_odd_dim():
    with pytest.raises(ValueError):
        rope_apply(Tensor(np.zeros((2, 3))), [0, 1])


def test_rotate_pairs_backward_is_inverse_rotation():
    rng = np.random.default_rng(5)
    p = Parameter("x", rng.normal(size=(3, 6)), "normal")
    cos = np.cos(rng.normal(size=(3, 3)))
    sin = np.sin(np.arccos(cos))
    err = grad_check(lambda: (rotate_pairs(p.tensor, cos, sin) ** 2.0).sum(), [p])
    assert err < 1e-6


def test_rmsnorm_unit_scale():
    x = np.array([[3.0, 4.0]])
    out = rmsnorm(Tensor(x), np.ones(2), eps=0.0)
    rms = np.sqrt((9 + 16) / 2)
    assert np.allclose(out.data, x / rms)


def test_rmsnorm_gradcheck():
    rng = np.random.default_rng(6)
    p = Parameter("x", rng.normal(size=(2, 8)), "normal")
    s = Parameter("scale", rng.normal(size=8), "normal")
    err = grad_check(lambda: (rmsnorm(p.tensor, s.tensor) ** 2.0).sum(), [p, s])
    assert err < 1e-6


def test_grad_check_composite_ops():
    """One graph touching most op backward paths at once."""
    rng = np.random.default_rng(7)
    a = Parameter("a", rng.normal(size=(4, 6)), "normal")
    b = Parameter("b", rng.normal(size=(6, 4)), "normal")

    def build():
        h = (a.tensor @ b.tensor).gelu()
        g = h.sigmoid() * h.relu() + h.silu()
        w, _ = softmax_rows(g, np.tril(np.ones((4, 4), dtype=bool)))
        return (w @ b.tensor.swapaxes(0, 1)).exp().mean() + \
            (g ** 2.0 + 1.0).log().sum()

    assert grad_check(build, [a, b], n_sample=6, seed=0) < 1e-6


def test_parameter_data_replacement():
    p = Parameter("w", np.zeros(3), "constant(0)")
    p.data = [1.0, 2.0, 3.0]
    assert p.tensor.data.dtype == np.float64
    assert p.data[1] == 2.0
    p.zero_grad()
    assert p.grad is None
