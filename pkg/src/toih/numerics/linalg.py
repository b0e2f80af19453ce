"""Dense kernels on float64 numpy arrays.

These are the plain (non-recording) versions of the operations used by the
router. The differentiable counterparts live in :mod:`toih.numerics.tape`.
"""
import math

import numpy as np

from toih.validation import Undefined


class DegenerateVectorError(ValueError):
    """Raised when a cosine is requested for a zero-norm vector."""


def _as_matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def _as_vector(v, name):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    return v


def matmul(a, b):
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax(v, axis=-1):
    """Numerically stable softmax along ``axis``."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("softmax of an empty vector")
    z = np.exp(v - np.max(v, axis=axis, keepdims=True))
    return z / np.sum(z, axis=axis, keepdims=True)


def cosine(u, v):
    """Cosine similarity clamped to [-1, 1].

    The norm product is taken as ``sqrt(|u|^2 |v|^2)`` so that ``cosine(u, u)``
    is exactly 1.0 in IEEE arithmetic.
    """
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    nu = float(np.dot(u, u))
    nv = float(np.dot(v, v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine undefined for a zero vector")
    c = float(np.dot(u, v)) / math.sqrt(nu * nv)
    return min(1.0, max(-1.0, c))


def cross_attention(query, keys, values):
    """Single-head scaled dot-product attention for one query.

    Returns ``(weights, output)`` where ``weights = softmax(keys @ query / sqrt(d))``.
    """
    query = _as_vector(query, "query")
    keys = _as_matrix(keys, "keys")
    values = _as_matrix(values, "values")
    if keys.shape[0] != values.shape[0]:
        raise ValueError("keys and values must have the same number of rows")
    if keys.shape[1] != query.shape[0]:
        raise ValueError("query length must equal key width")
    weights = softmax(keys @ query / math.sqrt(query.shape[0]))
    return weights, weights @ values


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def silu(x):
    x = np.asarray(x, dtype=np.float64)
    return x * sigmoid(x)


def swiglu(x, w_gate, w_up, w_down):
    """``w_down @ (silu(w_gate @ x) * (w_up @ x))``; weights are (out, in)."""
    x = _as_vector(x, "x")
    w_gate = _as_matrix(w_gate, "w_gate")
    w_up = _as_matrix(w_up, "w_up")
    w_down = _as_matrix(w_down, "w_down")
    if w_gate.shape != w_up.shape or w_gate.shape[1] != x.shape[0]:
        raise ValueError("w_gate/w_up must both be (hidden, d)")
    if w_down.shape != (x.shape[0], w_gate.shape[0]):
        raise ValueError("w_down must be (d, hidden)")
    return w_down @ (silu(w_gate @ x) * (w_up @ x))


def kl_divergence(p, q):
    """KL(p || q) in nats. Returns ``inf`` when q lacks support where p > 0."""
    p = _as_vector(p, "p")
    q = _as_vector(q, "q")
    if p.shape != q.shape:
        raise ValueError("p and q must have equal length")
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return max(0.0, float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask])))))


def _is_integral(a):
    return bool(np.all(np.isfinite(a)) and np.all(a == np.round(a)) and np.all(np.abs(a) < 2**26))


def pearson(x, y):
    """Sample Pearson correlation, or :class:`Undefined` for zero variance.

    Integer-valued inputs (tiers, correctness flags) are handled in exact
    integer arithmetic so perfectly linear data gives exactly +/-1.
    """
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    if x.shape != y.shape:
        raise ValueError("x and y must have equal length")
    n = x.shape[0]
    if n < 2:
        raise ValueError("pearson needs at least two observations")
    if _is_integral(x) and _is_integral(y):
        xi = [int(v) for v in x]
        yi = [int(v) for v in y]
        sx, sy = sum(xi), sum(yi)
        num = n * sum(a * b for a, b in zip(xi, yi)) - sx * sy
        dx = n * sum(a * a for a in xi) - sx * sx
        dy = n * sum(b * b for b in yi) - sy * sy
        if dx == 0 or dy == 0:
            return Undefined("zero variance")
        if num * num == dx * dy:
            return 1.0 if num > 0 else -1.0
        return num / math.sqrt(dx * dy)
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0.0 or syy == 0.0:
        return Undefined("zero variance")
    r = float(np.dot(xc, yc)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def t_statistic(r, n):
    """t = r * sqrt((n - 2) / (1 - r^2)); signed infinity when |r| == 1."""
    if n < 3:
        raise ValueError("t statistic needs n >= 3")
    if abs(r) > 1.0:
        raise ValueError(f"|r| must be <= 1, got {r}")
    if abs(r) == 1.0:
        return math.copysign(math.inf, r)
    return r * math.sqrt((n - 2) / (1.0 - r * r))
