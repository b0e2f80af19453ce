"""Synthetic conflict dataset for toy training."""
from dataclasses import dataclass

import numpy as np

from toih.moe.features import ConflictSpec, synth_features, synth_query
from toih.moe.params import EXPERTS, N_EXPERTS
from toih.validation import OPTION_LABELS, check_simplex


@dataclass(frozen=True, eq=False)
class TrainingExample:
    f_vis: np.ndarray
    f_ocr: np.ndarray
    query: np.ndarray
    answer: str
    conflict: np.ndarray  # target distribution over (T, A, O, S)
    pi: np.ndarray  # expert allocation target

    def __post_init__(self):
        if self.answer not in OPTION_LABELS:
            raise ValueError(f"answer must be one of {OPTION_LABELS}")
        object.__setattr__(self, "conflict", check_simplex(self.conflict, "conflict", length=N_EXPERTS, tol=1e-9))
        object.__setattr__(self, "pi", check_simplex(self.pi, "pi", length=N_EXPERTS, tol=1e-9))
        if self.f_vis.shape != self.f_ocr.shape:
            raise ValueError("feature streams differ in shape")

    @property
    def answer_index(self):
        return OPTION_LABELS.index(self.answer)

    @property
    def dimension(self):
        """Index of the dominant conflict dimension."""
        return int(np.argmax(self.conflict))

    def __eq__(self, other):
        if not isinstance(other, TrainingExample):
            return NotImplemented
        return self.answer == other.answer and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("f_vis", "f_ocr", "query", "conflict", "pi")
        )


def allocation_target(dim, dominant_mass=0.7):
    if not 0.0 <= dominant_mass <= 1.0:
        raise ValueError("dominant_mass must lie in [0, 1]")
    pi = np.full(N_EXPERTS, (1.0 - dominant_mass) / (N_EXPERTS - 1))
    pi[dim] = dominant_mass
    return pi


def gen_synthetic_dataset(n, config, seed, intensity=1.0, dominant_mass=0.7):
    """``n`` examples with conflict dimensions as balanced as possible (counts differ by <= 1).

    Each example's visual stream carries its answer and its OCR stream is
    shifted along the conflict dimension's direction. The question tokens are
    pure noise, so routing has to come from the two streams.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    dims = rng.permutation(np.arange(n) % N_EXPERTS)
    out = []
    for dim in dims:
        dim = int(dim)
        answer = int(rng.integers(4))
        feat_seed, query_seed = (int(x) for x in rng.integers(0, 2**63 - 1, size=2))
        f_vis, f_ocr = synth_features(config, feat_seed, ConflictSpec(EXPERTS[dim], intensity), answer=answer)
        conflict = np.zeros(N_EXPERTS)
        conflict[dim] = 1.0
        out.append(
            TrainingExample(
                f_vis=f_vis,
                f_ocr=f_ocr,
                query=synth_query(config, query_seed),
                answer=OPTION_LABELS[answer],
                conflict=conflict,
                pi=allocation_target(dim, dominant_mass),
            )
        )
    return out
