"""Differentiable building blocks of the conflict-aware router.

All functions accept numpy arrays or :class:`~toih.numerics.tape.Tensor`
objects and return tensors, so they serve both inference and training.
"""
from dataclasses import dataclass
import math

import numpy as np

from toih.numerics import tape as T
from toih.moe.params import EXPERTS, N_EXPERTS


def relevance_scores(q_vis, f_vis):
    """Attention weights of the question query over all visual patches."""
    q_vis, f_vis = T.as_tensor(q_vis), T.as_tensor(f_vis)
    if f_vis.shape[1] != q_vis.shape[0]:
        raise ValueError(f"query width {q_vis.shape[0]} != patch width {f_vis.shape[1]}")
    return T.softmax(T.matmul(f_vis, q_vis) * (1.0 / math.sqrt(q_vis.shape[0])))


def topk_select(scores, k):
    """Indices of the ``k`` highest scores, ties to the lower index, returned ascending."""
    s = np.asarray(scores.value if isinstance(scores, T.Tensor) else scores, dtype=np.float64)
    if not 0 <= k <= s.shape[0]:
        raise ValueError(f"k={k} out of range for {s.shape[0]} scores")
    order = np.argsort(-s, kind="stable")
    return sorted(int(i) for i in order[:k])


def condition_patch(patch, query_tokens, w_q, w_k, w_v):
    """Residual cross-attention from patch(es) onto the question tokens.

    ``patch`` may be one vector or a (K, d) block; each row attends
    independently.
    """
    patch, query_tokens = T.as_tensor(patch), T.as_tensor(query_tokens)
    if query_tokens.value.ndim != 2 or query_tokens.shape[0] == 0:
        raise ValueError("need at least one query token")
    d = query_tokens.shape[1]
    if patch.shape[-1] != d:
        raise ValueError("patch and query widths differ")
    q = T.linear(patch, w_q)
    k = T.linear(query_tokens, w_k)
    v = T.linear(query_tokens, w_v)
    attn = T.softmax(T.matmul(q, T.transpose(k)) * (1.0 / math.sqrt(d)))
    return patch + T.matmul(attn, v)


@dataclass
class PatchTriplet:
    vis: T.Tensor
    ocr: T.Tensor
    diff: T.Tensor


def build_three_token(f_vis_hat, f_ocr_hat):
    f_vis_hat, f_ocr_hat = T.as_tensor(f_vis_hat), T.as_tensor(f_ocr_hat)
    if f_vis_hat.shape != f_ocr_hat.shape:
        raise ValueError("visual and OCR features must have the same shape")
    return PatchTriplet(f_vis_hat, f_ocr_hat, f_ocr_hat - f_vis_hat)


def interleave(triplet):
    """(K, d) x 3 -> (3K, d) rows ordered vis_0, ocr_0, diff_0, vis_1, ..."""
    k = triplet.vis.shape[0]
    stacked = T.concat([triplet.vis, triplet.ocr, triplet.diff])
    perm = [j * k + i for i in range(k) for j in range(3)]
    return T.take(stacked, perm)


def backbone_forward(tokens, params, layers):
    """Token-wise residual layers ``h <- h + silu(h W + b)`` for each index in ``layers``."""
    h = T.as_tensor(tokens)
    for layer in layers:
        h = h + T.silu(T.linear(h, params[f"backbone.{layer}.w"], params[f"backbone.{layer}.b"]))
    return h


def consistency(h_vis, h_ocr):
    """Cosine between paired hidden states; a zero vector counts as consistent (1)."""
    return T.cosine_rows(h_vis, h_ocr, fallback=1.0)


def routing_logits(h, c, gate_w, gate_b, cls_w, cls_b):
    """``Gate(h) + (1 - c)/2 * softmax(Cls(h))`` for one token or a (T, d) block.

    Returns ``(g, gate_logits, classifier_probs, cw)``.
    """
    h, c = T.as_tensor(h), T.as_tensor(c)
    if np.any(c.value < -1.0) or np.any(c.value > 1.0):
        raise ValueError("consistency must lie in [-1, 1]")
    gate = T.linear(h, gate_w, gate_b)
    probs = T.softmax(T.linear(h, cls_w, cls_b))
    cw = (1.0 - c) * 0.5
    if h.value.ndim == 2:
        cw_col = T.reshape(cw, (-1, 1))
    else:
        cw_col = cw
    return gate + cw_col * probs, gate, probs, cw


def route_top1(g):
    """Index of the largest logit; ties go to the lower expert index."""
    g = np.asarray(g.value if isinstance(g, T.Tensor) else g)
    return np.argmax(g, axis=-1)


def swiglu_rows(x, w_gate, w_up, w_down):
    return T.linear(T.silu(T.linear(x, w_gate)) * T.linear(x, w_up), w_down)


@dataclass
class RoutingTrace:
    consistency: np.ndarray  # (T,)
    classifier_weight: np.ndarray  # (T,)
    gate_logits: np.ndarray  # (T, 4)
    classifier_probs: np.ndarray  # (T, 4)
    logits: T.Tensor  # combined routing logits g, (T, 4)
    expert: np.ndarray  # (T,) chosen expert per token

    @classmethod
    def from_logits(cls, g):
        """A trace for hand-built routing logits (consistency taken as 1)."""
        g = T.as_tensor(g)
        n = g.shape[0]
        return cls(
            consistency=np.ones(n),
            classifier_weight=np.zeros(n),
            gate_logits=np.array(g.value),
            classifier_probs=np.full((n, N_EXPERTS), 1.0 / N_EXPERTS),
            logits=g,
            expert=route_top1(g),
        )

    def __len__(self):
        return int(self.expert.shape[0])

    @property
    def routing_logits(self):
        return self.logits.value

    @property
    def counts(self):
        return np.bincount(self.expert, minlength=N_EXPERTS)

    @property
    def shares(self):
        return self.counts / max(1, len(self))

    @property
    def probs(self):
        g = self.logits.value
        z = np.exp(g - g.max(axis=1, keepdims=True))
        return z / z.sum(axis=1, keepdims=True)

    @property
    def mean_probs(self):
        return self.probs.mean(axis=0)

    @property
    def gate_only(self):
        return bool(np.all(self.classifier_weight == 0.0))

    def summary(self):
        return {
            "tokens": len(self),
            "expert_counts": dict(zip(EXPERTS, (int(x) for x in self.counts))),
            "expert_shares": dict(zip(EXPERTS, (float(x) for x in self.shares))),
            "mean_routing_probs": dict(zip(EXPERTS, (float(x) for x in self.mean_probs))),
            "min_consistency": float(self.consistency.min()),
            "gate_only": self.gate_only,
        }


def moe_layer(h, c, params):
    """Top-1 expert layer with residual fusion.

    ``h`` is (T, d); ``c`` holds one consistency value per token.
    """
    h, c = T.as_tensor(h), T.as_tensor(c)
    if c.shape != (h.shape[0],):
        raise ValueError("need one consistency value per token")
    g, gate, probs, cw = routing_logits(h, c, params["gate.w"], params["gate.b"], params["cls.w"], params["cls.b"])
    chosen = route_top1(g)
    out = None
    for e, name in enumerate(EXPERTS):
        mask = (chosen == e).astype(np.float64)[:, None]
        if not mask.any():
            continue
        y = swiglu_rows(h, params[f"experts.{name}.w_gate"], params[f"experts.{name}.w_up"], params[f"experts.{name}.w_down"])
        y = y * mask
        out = y if out is None else out + y
    trace = RoutingTrace(
        consistency=np.array(c.value),
        classifier_weight=np.array(cw.value),
        gate_logits=np.array(gate.value),
        classifier_probs=np.array(probs.value),
        logits=g,
        expert=chosen,
    )
    return h + out, trace


def attention_pool(hidden, video_mask, query):
    """Single-head attention pooling over the unmasked (video) rows only.

    Returns ``(pooled, weights)``; masked rows get weight exactly zero.
    """
    hidden = T.as_tensor(hidden)
    mask = np.asarray(video_mask, dtype=bool)
    if mask.shape != (hidden.shape[0],):
        raise ValueError("mask must have one entry per token")
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("attention_pool needs at least one unmasked token")
    rows = T.take(hidden, idx)
    w = T.softmax(T.matmul(rows, query) * (1.0 / math.sqrt(hidden.shape[1])))
    weights = np.zeros(hidden.shape[0])
    weights[idx] = w.value
    return T.matmul(w, rows), weights
