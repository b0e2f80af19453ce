"""Reverse-mode differentiation over a fixed set of array operations.

Only the operations the router and its losses need are provided: linear maps,
elementwise arithmetic, sigmoid/silu, softmax, row-wise cosine, reductions,
cross-entropy and KL, plus row gather/concatenation for token bookkeeping.
"""
import math

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, value, requires_grad=False, name=None, _parents=(), _backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, idx):
        return take(self, idx)

    def backward(self):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf requiring grad."""
        if self.value.size != 1:
            raise ValueError("backward() needs a scalar output")
        order = _topo_order(self)
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g


def _topo_order(root):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents, backward):
    if any(p.requires_grad for p in parents):
        return Tensor(value, requires_grad=True, _parents=parents, _backward=backward)
    return Tensor(value)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _node(a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _node(a.value - b.value, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b):
    """Elementwise product with numpy broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    return _node(av * bv, (a, b), lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value

    def backward(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv, g * av
        if av.ndim == 1:
            return bv @ g, np.outer(av, g)
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    return _node(av @ bv, (a, b), backward)


def reshape(a, shape):
    a = as_tensor(a)
    old = a.shape
    return _node(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a):
    a = as_tensor(a)
    return _node(a.value.T, (a,), lambda g: (g.T,))


def linear(x, w, b=None):
    """``x @ w.T + b`` with ``w`` stored as (out, in)."""
    x, w = as_tensor(x), as_tensor(w)
    xv, wv = x.value, w.value
    out = xv @ wv.T
    parents = (x, w)
    if b is not None:
        b = as_tensor(b)
        out = out + b.value
        parents = (x, w, b)

    def backward(g):
        if xv.ndim == 1:
            gx, gw, gb = g @ wv, np.outer(g, xv), g
        else:
            gx, gw, gb = g @ wv, g.T @ xv, g.sum(axis=0)
        return (gx, gw, gb) if b is not None else (gx, gw)

    return _node(out, parents, backward)


def sigmoid(a):
    a = as_tensor(a)
    s = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return _node(s, (a,), lambda g: (g * s * (1.0 - s),))


def silu(a):
    a = as_tensor(a)
    x = a.value
    s = 0.5 * (1.0 + np.tanh(0.5 * x))
    return _node(x * s, (a,), lambda g: (g * (s + x * s * (1.0 - s)),))


def softmax(a, axis=-1):
    a = as_tensor(a)
    z = np.exp(a.value - np.max(a.value, axis=axis, keepdims=True))
    s = z / np.sum(z, axis=axis, keepdims=True)
    return _node(s, (a,), lambda g: (s * (g - np.sum(g * s, axis=axis, keepdims=True)),))


def sum_(a, axis=None):
    a = as_tensor(a)
    shape = a.shape

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _node(np.sum(a.value, axis=axis), (a,), backward)


def mean(a, axis=None):
    a = as_tensor(a)
    n = a.value.size if axis is None else a.shape[axis]
    return mul(sum_(a, axis=axis), 1.0 / n)


def take(a, idx):
    """Gather along the first axis (integer index, slice or index array)."""
    a = as_tensor(a)
    shape = a.shape
    if isinstance(idx, (int, np.integer)):
        idx_arr = int(idx)
    elif isinstance(idx, slice):
        idx_arr = np.arange(shape[0])[idx]
    else:
        idx_arr = np.asarray(idx, dtype=np.intp)

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, idx_arr, g)
        return (out,)

    return _node(a.value[idx_arr], (a,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    return _node(
        np.concatenate([t.value for t in tensors], axis=axis),
        tuple(tensors),
        lambda g: tuple(np.split(g, bounds, axis=axis)),
    )


def stack(tensors):
    """Stack 1-D tensors into the rows of a matrix."""
    tensors = [as_tensor(t) for t in tensors]
    return _node(
        np.stack([t.value for t in tensors]),
        tuple(tensors),
        lambda g: tuple(g[i] for i in range(len(tensors))),
    )


def cosine_rows(a, b, fallback=1.0):
    """Row-wise cosine of two (n, d) matrices, clamped to [-1, 1].

    Rows where either side has zero norm take the constant ``fallback``.
    """
    a, b = as_tensor(a), as_tensor(b)
    av, bv = np.atleast_2d(a.value), np.atleast_2d(b.value)
    dot = np.sum(av * bv, axis=-1)
    na2 = np.sum(av * av, axis=-1)
    nb2 = np.sum(bv * bv, axis=-1)
    ok = (na2 > 0) & (nb2 > 0)
    denom = np.sqrt(np.where(ok, na2 * nb2, 1.0))
    c = np.where(ok, np.clip(dot / denom, -1.0, 1.0), fallback)
    raw = np.where(ok, dot / denom, 0.0)
    vector_in = a.value.ndim == 1

    def backward(g):
        g = np.atleast_1d(g)
        scale = np.where(ok, g / denom, 0.0)[:, None]
        ga = scale * bv - (np.where(ok, g * raw / np.where(ok, na2, 1.0), 0.0))[:, None] * av
        gb = scale * av - (np.where(ok, g * raw / np.where(ok, nb2, 1.0), 0.0))[:, None] * bv
        if vector_in:
            return ga[0], gb[0]
        return ga, gb

    out = c[0] if vector_in else c
    return _node(out, (a, b), backward)


def cross_entropy(logits, index):
    """-log softmax(logits)[index] for a single logit vector."""
    logits = as_tensor(logits)
    z = logits.value - np.max(logits.value)
    lse = math.log(np.sum(np.exp(z)))
    p = np.exp(z - lse)

    def backward(g):
        d = p.copy()
        d[index] -= 1.0
        return (g * d,)

    return _node(lse - z[index], (logits,), backward)


def kl_div(p, q):
    """KL(p || q) where ``p`` is a constant distribution and ``q`` a tensor.

    Returns +inf (with no gradient) when ``q`` lacks support where ``p > 0``.
    """
    p = np.asarray(p.value if isinstance(p, Tensor) else p, dtype=np.float64)
    q = as_tensor(q)
    mask = p > 0
    qv = q.value
    if np.any(qv[mask] <= 0):
        return Tensor(math.inf)
    val = float(np.sum(p[mask] * (np.log(p[mask]) - np.log(qv[mask]))))

    def backward(g):
        d = np.zeros_like(qv)
        d[mask] = -p[mask] / qv[mask]
        return (g * d,)

    return _node(val, (q,), backward)


class DiffTape:
    """A re-evaluable scalar computation over named parameter arrays.

    ``fn`` receives a dict of leaf :class:`Tensor` objects (one per parameter)
    and returns either a scalar :class:`Tensor` or a sequence of scalar
    tensors whose sum is the objective. Returning the terms separately lets
    finite-difference checks difference each term on its own scale.
    """

    def __init__(self, fn, params, trainable=None):
        self.fn = fn
        self.params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
        self.trainable = list(self.params) if trainable is None else list(trainable)

    def _leaves(self, params):
        keep = set(self.trainable)
        return {k: Tensor(v, requires_grad=k in keep, name=k) for k, v in params.items()}

    def _terms(self, leaves):
        out = self.fn(leaves)
        terms = [out] if isinstance(out, Tensor) else list(out)
        if not terms or any(t.value.size != 1 for t in terms):
            raise ValueError("tape output must be scalar")
        return terms

    def value_terms(self, params=None):
        terms = self._terms(self._leaves(self.params if params is None else params))
        return np.array([float(t.value) for t in terms])

    def value(self, params=None):
        return math.fsum(self.value_terms(params))

    def value_and_grad(self):
        leaves = self._leaves(self.params)
        terms = self._terms(leaves)
        out = terms[0]
        for t in terms[1:]:
            out = out + t
        out.backward()
        grads = {}
        for k in self.trainable:
            g = leaves[k].grad
            grads[k] = np.zeros_like(self.params[k]) if g is None else np.asarray(g).reshape(self.params[k].shape)
        return math.fsum(float(t.value) for t in terms), grads
