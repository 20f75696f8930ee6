"""Dense float64 reverse-mode autodiff on numpy arrays.

Every op returns a fresh Tensor holding a newly allocated ndarray plus a
closure that routes the output gradient to the op's inputs. backward()
seeds the output, walks the graph once in reverse topological order and
accumulates into .grad. Node values are never mutated in place after
creation; perturbation (e.g. for gradient checks) replaces the .data
reference with a new array instead.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to `shape`, reversing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """One node in the computation graph, wrapping a float64 ndarray."""

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        # parents are kept only for the topological walk
        self._parents = tuple(p for p in parents if p.requires_grad)
        self._backward = backward

    # -- graph plumbing ----------------------------------------------------

    def _accum(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + g

    def backward(self, grad=None) -> None:
        """Reverse-mode sweep from this node. Scalar outputs seed with 1."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        self._accum(_as_array(grad))

        # iterative topo sort; recursion depth scales with graph depth otherwise
        order, seen, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data + other.data, parents=(self, other))

        def bw(g):
            self._accum(_unbroadcast(g, self.data.shape))
            other._accum(_unbroadcast(g, other.data.shape))

        out._backward = bw
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, parents=(self,))
        out._backward = lambda g: self._accum(-g)
        return out

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def __rsub__(self, other):
        return Tensor(other) + (-self)

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data * other.data, parents=(self, other))

        def bw(g):
            self._accum(_unbroadcast(g * other.data, self.data.shape))
            other._accum(_unbroadcast(g * self.data, other.data.shape))

        out._backward = bw
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self * other ** -1.0

    def __rtruediv__(self, other):
        return Tensor(other) * self ** -1.0

    def __pow__(self, p: float):
        if isinstance(p, Tensor):
            raise TypeError("only constant exponents are supported")
        out = Tensor(self.data ** p, parents=(self,))
        out._backward = lambda g: self._accum(g * p * self.data ** (p - 1.0))
        return out

    def __matmul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data @ other.data, parents=(self, other))

        def bw(g):
            self._accum(_unbroadcast(g @ np.swapaxes(other.data, -1, -2), self.data.shape))
            other._accum(_unbroadcast(np.swapaxes(self.data, -1, -2) @ g, other.data.shape))

        out._backward = bw
        return out

    # -- elementwise nonlinearities -------------------------------------------

    def exp(self):
        out = Tensor(np.exp(self.data), parents=(self,))
        out._backward = lambda g: self._accum(g * out.data)
        return out

    def log(self):
        out = Tensor(np.log(self.data), parents=(self,))
        out._backward = lambda g: self._accum(g / self.data)
        return out

    def relu(self):
        out = Tensor(np.maximum(self.data, 0.0), parents=(self,))
        out._backward = lambda g: self._accum(g * (self.data > 0.0))
        return out

    def sigmoid(self):
        out = Tensor(1.0 / (1.0 + np.exp(-self.data)), parents=(self,))
        out._backward = lambda g: self._accum(g * out.data * (1.0 - out.data))
        return out

    def silu(self):
        return self * self.sigmoid()

    def gelu(self):
        """Exact erf-based GELU."""
        x = self.data
        cdf = 0.5 * (1.0 + _erf(x / np.sqrt(2.0)))
        out = Tensor(x * cdf, parents=(self,))
        pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        out._backward = lambda g: self._accum(g * (cdf + x * pdf))
        return out

    def clip(self, lo: float, hi: float):
        """Clamp values; gradient passes only through the open interval."""
        out = Tensor(np.clip(self.data, lo, hi), parents=(self,))
        inside = (self.data > lo) & (self.data < hi)
        out._backward = lambda g: self._accum(g * inside)
        return out

    # -- reductions ------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), parents=(self,))

        def bw(g):
            if axis is None:
                self._accum(np.broadcast_to(g, self.data.shape))
                return
            if not keepdims:
                g = np.expand_dims(g, axis)
            self._accum(np.broadcast_to(g, self.data.shape))

        out._backward = bw
        return out

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            n = self.data.size
        else:
            n = self.data.shape[axis] if isinstance(axis, int) else int(
                np.prod([self.data.shape[a] for a in axis]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- shape ops ---------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor(self.data.reshape(shape), parents=(self,))
        out._backward = lambda g: self._accum(g.reshape(self.data.shape))
        return out

    def transpose(self, axes):
        inv = np.argsort(axes)
        out = Tensor(np.transpose(self.data, axes), parents=(self,))
        out._backward = lambda g: self._accum(np.transpose(g, inv))
        return out

    def swapaxes(self, a: int, b: int):
        out = Tensor(np.swapaxes(self.data, a, b), parents=(self,))
        out._backward = lambda g: self._accum(np.swapaxes(g, a, b))
        return out

    def __getitem__(self, key):
        out = Tensor(self.data[key], parents=(self,))

        def bw(g):
            full = np.zeros_like(self.data)
            full[key] += g
            self._accum(full)

        out._backward = bw
        return out


# -- module-level ops ------------------------------------------------------------


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t._accum(piece)

    out._backward = bw
    return out


def gather(x: Tensor, indices) -> Tensor:
    """Row lookup along axis 0; backward scatter-adds into duplicate rows."""
    idx = np.asarray(indices, dtype=np.int64)
    out = Tensor(x.data[idx], parents=(x,))

    def bw(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        x._accum(full)

    out._backward = bw
    return out


def softmax_rows(z: Tensor, visible: np.ndarray | None = None):
    """Row softmax over the last axis with an optional visibility mask.

    Returns (weights, empty) where empty marks rows with no visible entry;
    such rows come back as exact zeros rather than NaN. Masked entries are
    excluded via a -inf shift before exponentiation, so finite visible
    logits can never produce NaN.
    """
    zd = z.data
    if visible is not None:
        vis = np.broadcast_to(np.asarray(visible, dtype=bool), zd.shape)
        zd = np.where(vis, zd, -np.inf)
    rowmax = np.max(zd, axis=-1, keepdims=True)
    rowmax = np.where(np.isfinite(rowmax), rowmax, 0.0)
    e = np.exp(zd - rowmax)
    denom = e.sum(axis=-1, keepdims=True)
    empty = denom[..., 0] == 0.0
    w = e / np.where(denom == 0.0, 1.0, denom)
    out = Tensor(w, parents=(z,))

    def bw(g):
        gz = out.data * (g - (g * out.data).sum(axis=-1, keepdims=True))
        z._accum(gz)

    out._backward = bw
    return out, empty


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean next-token NLL in nats. logits (s, v), targets (s,) int."""
    t = np.asarray(targets, dtype=np.int64)
    zd = logits.data
    m = zd.max(axis=-1, keepdims=True)
    lse = m[..., 0] + np.log(np.exp(zd - m).sum(axis=-1))
    rows = np.arange(zd.shape[0])
    losses = lse - zd[rows, t]
    out = Tensor(losses.mean(), parents=(logits,))

    def bw(g):
        p = np.exp(zd - m)
        p /= p.sum(axis=-1, keepdims=True)
        p[rows, t] -= 1.0
        logits._accum(g * p / zd.shape[0])

    out._backward = bw
    return out


def rotate_pairs(x: Tensor, cos: np.ndarray, sin: np.ndarray) -> Tensor:
    """Rotate channel pairs (x[..., 2j], x[..., 2j+1]) by constant angles.

    cos/sin broadcast against the pair view (..., d/2). The backward pass is
    the inverse rotation applied to the gradient.
    """
    a = x.data[..., 0::2]
    b = x.data[..., 1::2]
    rot = np.empty_like(x.data)
    rot[..., 0::2] = a * cos - b * sin
    rot[..., 1::2] = a * sin + b * cos
    out = Tensor(rot, parents=(x,))

    def bw(g):
        ge = g[..., 0::2]
        go = g[..., 1::2]
        gx = np.empty_like(g)
        gx[..., 0::2] = ge * cos + go * sin
        gx[..., 1::2] = -ge * sin + go * cos
        x._accum(gx)

    out._backward = bw
    return out


def rmsnorm(x: Tensor, scale, eps: float = 1e-5) -> Tensor:
    """x / sqrt(mean(x^2) + eps) over the last axis, times a scale vector.

    scale may be a Tensor (learnable) or a plain array/scalar constant.
    """
    ms = (x * x).mean(axis=-1, keepdims=True)
    y = x * (ms + eps) ** -0.5
    if not isinstance(scale, Tensor):
        scale = Tensor(scale)
    return y * scale


def rope_apply(x: Tensor, positions, base: float = 10000.0) -> Tensor:
    """Rotary position encoding on the last axis (must be even).

    Channel pair j at position p is rotated by p * base**(-2j/d). Norms are
    preserved exactly; position 0 is the identity.
    """
    d = x.data.shape[-1]
    if d % 2 != 0:
        raise ValueError("rope needs an even channel count")
    pos = np.asarray(positions, dtype=np.float64)
    inv_freq = base ** (-2.0 * np.arange(d // 2) / d)
    angles = pos[:, None] * inv_freq[None, :]
    return rotate_pairs(x, np.cos(angles), np.sin(angles))


# -- parameters and gradient checking ----------------------------------------------


class Parameter:
    """Named leaf tensor plus a replayable record of how it was initialized."""

    def __init__(self, name: str, data, init_spec: str):
        self.name = name
        self.tensor = Tensor(data, requires_grad=True)
        self.init_spec = init_spec

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value) -> None:
        self.tensor.data = _as_array(value)

    @property
    def grad(self):
        return self.tensor.grad

    def zero_grad(self) -> None:
        self.tensor.grad = None

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape}, init={self.init_spec!r})"


def grad_check(build, params, h: float = 1e-5, n_sample: int = 4, seed: int = 0) -> float:
    """Compare backward gradients against central differences.

    build() must construct a fresh scalar-output graph from the parameters'
    current data. Up to n_sample coordinates per parameter are perturbed by
    replacing the .data array (never written in place). Returns the max
    relative error |a - n| / max(|a|, |n|, 1e-4) over all sampled coords.
    """
    out = build()
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-output graph")
    for p in params:
        p.zero_grad()
    out.backward()
    analytic = {p.name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for p in params}

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        k = flat.size
        coords = np.arange(k) if k <= n_sample else rng.choice(k, size=n_sample, replace=False)
        base = p.data
        for c in coords:
            for sgn in (+1.0, -1.0):
                bumped = base.copy().reshape(-1)
                bumped[c] += sgn * h
                p.data = bumped.reshape(base.shape)
                val = build().item()
                if sgn > 0:
                    f_plus = val
                else:
                    f_minus = val
            p.data = base
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = analytic[p.name].reshape(-1)[c]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-4)
            worst = max(worst, rel)
    return worst
