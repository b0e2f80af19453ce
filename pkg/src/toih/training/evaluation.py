"""Held-out measurements of a trained router."""
from dataclasses import asdict, dataclass

import numpy as np

from toih.moe.model import forward
from toih.moe.params import N_EXPERTS


@dataclass
class RouterEvaluation:
    n: int
    classifier_accuracy: float  # pooled classifier argmax == conflict dimension
    dominant_expert_agreement: float  # per-sample max-share expert == conflict dimension
    max_expert_share: float  # over all tokens of all samples
    expert_shares: list
    answer_accuracy: float

    def to_dict(self):
        return asdict(self)


def evaluate_router(model_config, params, examples):
    examples = list(examples)
    if not examples:
        raise ValueError("no examples to evaluate")
    cls_hits = agree = ans_hits = 0
    counts = np.zeros(N_EXPERTS, dtype=np.int64)
    for ex in examples:
        res = forward(model_config, params, ex.f_vis, ex.f_ocr, ex.query)
        cls_hits += int(np.argmax(res.pooled_video_logits.value)) == ex.dimension
        # ties in per-sample counts go to the lower expert index
        agree += int(np.argmax(res.trace.counts)) == ex.dimension
        ans_hits += int(np.argmax(res.option_logits.value)) == ex.answer_index
        counts += res.trace.counts
    n = len(examples)
    shares = counts / counts.sum()
    return RouterEvaluation(
        n=n,
        classifier_accuracy=cls_hits / n,
        dominant_expert_agreement=agree / n,
        max_expert_share=float(shares.max()),
        expert_shares=[float(x) for x in shares],
        answer_accuracy=ans_hits / n,
    )
