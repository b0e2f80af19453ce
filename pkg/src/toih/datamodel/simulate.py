"""Seeded synthetic model responses for exercising the metric pipeline."""
from dataclasses import dataclass, field

import numpy as np

from toih.datamodel.schema import (
    DIMENSIONS,
    BenchmarkSample,
    Condition,
    EvaluationRecord,
    known_attributes,
)
from toih.validation import OPTION_LABELS, check_probability


@dataclass(frozen=True)
class BehaviorProfile:
    """Per-condition answer behaviour.

    ``p_correct[cond]`` is the chance of answering the ground truth and
    ``p_halluc`` the chance of answering the overlay's option on contradictory
    samples. Leftover mass is spread evenly over the remaining options.
    """

    p_correct: dict = field(default_factory=dict)
    p_halluc: float = 0.0
    with_probs: bool = False

    def __post_init__(self):
        for cond in Condition:
            p = check_probability(self.p_correct.get(cond, 0.0), f"p_correct[{cond.value}]")
            extra = self.p_halluc if cond is Condition.TEXT_CONTRADICTORY else 0.0
            if p + extra > 1.0 + 1e-12:
                raise ValueError(f"probabilities for {cond.value} sum to more than 1")
        check_probability(self.p_halluc, "p_halluc")

    @classmethod
    def uniform(cls, p_correct, p_halluc=0.0, **kw):
        """Same ``p_correct`` on free/congruent; contradictory gets ``p_correct`` too
        unless that would overflow with ``p_halluc``."""
        contra = min(p_correct, 1.0 - p_halluc)
        return cls(
            p_correct={
                Condition.TEXT_FREE: p_correct,
                Condition.TEXT_CONGRUENT: p_correct,
                Condition.TEXT_CONTRADICTORY: contra,
            },
            p_halluc=p_halluc,
            **kw,
        )


def _choice_probs(sample, profile):
    probs = np.zeros(4)
    y = OPTION_LABELS.index(sample.ground_truth)
    probs[y] = profile.p_correct.get(sample.condition, 0.0)
    taken = {y}
    if sample.is_contradictory:
        o = OPTION_LABELS.index(sample.hallucination_option)
        probs[o] = profile.p_halluc
        taken.add(o)
    rest = [i for i in range(4) if i not in taken]
    probs[rest] = max(0.0, 1.0 - probs.sum()) / len(rest)
    return probs / probs.sum()


def synthesize_responses(samples, profile, seed, model_id="simulated"):
    """One :class:`EvaluationRecord` per sample, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    out = []
    for s in samples:
        p = _choice_probs(s, profile)
        k = int(rng.choice(4, p=p))
        option_probs = None
        if profile.with_probs:
            # chosen option keeps the plurality of mass
            spread = rng.dirichlet(np.ones(4)) * 0.4
            spread[k] += 0.6
            option_probs = tuple(float(x) for x in spread / spread.sum())
        out.append(EvaluationRecord(s.sample_id, model_id, OPTION_LABELS[k], option_probs))
    return out


def synthesize_samples(n_groups, seed, conditions=tuple(Condition)):
    """A synthetic benchmark: ``n_groups`` video-questions, each present under
    every condition in ``conditions``."""
    rng = np.random.default_rng(seed)
    attrs = sorted(known_attributes())
    out = []
    for g in range(n_groups):
        dim = DIMENSIONS[int(rng.integers(4))]
        y, o = (OPTION_LABELS[int(i)] for i in rng.choice(4, size=2, replace=False))
        tier = int(rng.integers(1, 4))
        attribute = attrs[int(rng.integers(len(attrs)))]
        alloc = np.full(4, 0.1)
        alloc[dim.index] = 0.7
        scs = int(rng.integers(1, 6))
        for cond in conditions:
            contra = cond is Condition.TEXT_CONTRADICTORY
            out.append(BenchmarkSample(
                sample_id=f"g{g:05d}-{cond.value}",
                group_id=f"g{g:05d}",
                dimension=dim,
                attribute=attribute,
                tier=tier,
                condition=cond,
                options=tuple(f"option {lab}" for lab in OPTION_LABELS),
                ground_truth=y,
                allocation=tuple(float(a) for a in alloc),
                hallucination_option=o if contra else None,
                scs=scs if contra else None,
            ))
    return out
