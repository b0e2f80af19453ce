"""End-to-end forward pass of the desk-scale router."""
from dataclasses import dataclass

import numpy as np

from toih.moe import layers
from toih.moe.params import MoEParams
from toih.numerics import tape as T


@dataclass
class ForwardResult:
    option_logits: T.Tensor
    trace: layers.RoutingTrace
    pooled_video_logits: T.Tensor
    selected: list
    relevance: np.ndarray
    pool_weights: np.ndarray

    def __iter__(self):
        # unpacks as (option_logits, trace, pooled_video_logits)
        return iter((self.option_logits, self.trace, self.pooled_video_logits))


def _leaves(params):
    if isinstance(params, MoEParams):
        return {k: T.Tensor(v, name=k) for k, v in params.arrays.items()}
    return {k: T.as_tensor(v) for k, v in params.items()}


def token_consistency(h, k):
    """Per-token consistency: patch ``i`` contributes rows 3i (vis) and 3i+1 (ocr).

    Both rows get that patch's cosine; difference and query tokens get 1.
    """
    h = T.as_tensor(h)
    vis = T.take(h, [3 * i for i in range(k)])
    ocr = T.take(h, [3 * i + 1 for i in range(k)])
    c_patch = layers.consistency(vis, ocr)
    n = h.shape[0]
    index = np.full(n, k, dtype=int)
    for i in range(k):
        index[3 * i] = index[3 * i + 1] = i
    return T.take(T.concat([c_patch, T.Tensor(np.ones(1))]), index), c_patch


def forward(config, params, f_vis, f_ocr, query_tokens):
    """Run the full pipeline.

    ``params`` may be a :class:`MoEParams` or a dict of tape leaves (used for
    training). The result unpacks as ``(option_logits, trace, pooled_video_logits)``.
    """
    p = _leaves(params)
    f_vis = np.asarray(f_vis, dtype=np.float64)
    f_ocr = np.asarray(f_ocr, dtype=np.float64)
    query_tokens = np.asarray(query_tokens, dtype=np.float64)
    expected = (config.n_patches, config.d)
    if f_vis.shape != expected or f_ocr.shape != expected:
        raise ValueError(f"features must be {expected}, got {f_vis.shape} and {f_ocr.shape}")
    if query_tokens.ndim != 2 or query_tokens.shape[1] != config.d:
        raise ValueError("query tokens must be (n, d)")

    scores = layers.relevance_scores(p["q_vis"], f_vis)
    idx = layers.topk_select(scores, config.k_select)
    k = len(idx)
    vis_hat = layers.condition_patch(
        f_vis[idx], query_tokens, p["cond_vis.w_q"], p["cond_vis.w_k"], p["cond_vis.w_v"]
    )
    ocr_hat = layers.condition_patch(
        f_ocr[idx], query_tokens, p["cond_ocr.w_q"], p["cond_ocr.w_k"], p["cond_ocr.w_v"]
    )
    tokens = T.concat([layers.interleave(layers.build_three_token(vis_hat, ocr_hat)), T.Tensor(query_tokens)])

    h = layers.backbone_forward(tokens, p, range(config.insert_layer))
    c, _ = token_consistency(h, k)
    video_mask = np.arange(h.shape[0]) < 3 * k
    pooled, pool_weights = layers.attention_pool(h, video_mask, p["pool.q"])
    pooled_logits = T.linear(pooled, p["cls.w"], p["cls.b"])

    h, trace = layers.moe_layer(h, c, p)
    h = layers.backbone_forward(h, p, range(config.insert_layer, config.depth))
    option_logits = T.linear(T.mean(h, axis=0), p["head.w"], p["head.b"])
    return ForwardResult(option_logits, trace, pooled_logits, idx, np.array(scores.value), pool_weights)
