"""The four training objectives and their weighted sum."""
from dataclasses import dataclass
import math

import numpy as np

from toih.moe.params import N_EXPERTS
from toih.numerics import tape as T
from toih.validation import check_simplex


@dataclass(frozen=True)
class LossWeights:
    lambda_cls: float = 1.1
    lambda_sft: float = 1.0
    lambda_aux: float = 0.01

    def __post_init__(self):
        for name in ("lambda_cls", "lambda_sft", "lambda_aux"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite value >= 0, got {v}")


@dataclass
class LossParts:
    lm: T.Tensor
    cls: T.Tensor
    sft: T.Tensor
    aux: T.Tensor

    def floats(self):
        return {
            "l_lm": float(self.lm.value),
            "l_cls": float(self.cls.value),
            "l_sft": float(self.sft.value),
            "l_aux": float(self.aux.value),
        }


def loss_lm(option_logits, answer_index):
    if not 0 <= int(answer_index) < 4:
        raise ValueError("answer index must be in 0..3")
    logits = T.as_tensor(option_logits)
    if logits.shape != (4,):
        raise ValueError("expected 4 option logits")
    return T.cross_entropy(logits, int(answer_index))


def loss_cls(pooled_video_logits, target):
    """KL(target || softmax(logits))."""
    target = check_simplex(target, "conflict target", length=4)
    return T.kl_div(target, T.softmax(T.as_tensor(pooled_video_logits)))


def _routing_logits(trace):
    g = trace.logits if hasattr(trace, "logits") else trace
    g = T.as_tensor(g)
    if g.value.ndim != 2 or g.shape[0] == 0:
        raise ValueError("routing trace is empty")
    return g


def loss_sft(trace, pi):
    """KL(pi || token-mean of softmax(g))."""
    pi = check_simplex(pi, "allocation target", length=N_EXPERTS)
    g = _routing_logits(trace)
    return T.kl_div(pi, T.mean(T.softmax(g, axis=1), axis=0))


def load_balance(f, p_bar):
    """E * sum_e f_e * p_bar_e on plain arrays."""
    f, p_bar = np.asarray(f, dtype=np.float64), np.asarray(p_bar, dtype=np.float64)
    return float(len(f) * np.dot(f, p_bar))


def loss_aux(trace):
    """Switch-style balance term; token fractions ``f`` carry no gradient."""
    g = _routing_logits(trace)
    chosen = np.argmax(g.value, axis=1)
    f = np.bincount(chosen, minlength=N_EXPERTS) / g.shape[0]
    p_bar = T.mean(T.softmax(g, axis=1), axis=0)
    return T.sum_(p_bar * (N_EXPERTS * f))


def total_loss(parts, weights=LossWeights()):
    """``lm + lambda_cls*cls + lambda_sft*sft + lambda_aux*aux``.

    ``parts`` is a :class:`LossParts` or a 4-sequence of tensors/floats.
    """
    if isinstance(parts, LossParts):
        parts = (parts.lm, parts.cls, parts.sft, parts.aux)
    lm, cls, sft, aux = (T.as_tensor(x) for x in parts)
    for name, x in zip(("lm", "cls", "sft", "aux"), (lm, cls, sft, aux)):
        if not np.all(np.isfinite(x.value)):
            raise ValueError(f"non-finite {name} loss: {float(x.value)}")
    return lm + cls * weights.lambda_cls + sft * weights.lambda_sft + aux * weights.lambda_aux
