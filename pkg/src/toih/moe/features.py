"""Seeded stand-ins for the visual and OCR encoder outputs.

Fixed "world" directions are shared by every draw: one per conflict dimension
(how the OCR stream departs from the visual stream), one per answer option
(the visual evidence) and one per dimension for the question text.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from toih.moe.params import EXPERTS, N_EXPERTS

CONFLICTS = ("none",) + EXPERTS
_SHORT = {"t": "temporal", "a": "action", "o": "object", "s": "spatial"}


@lru_cache(maxsize=16)
def world_directions(d):
    """(conflict, answer, question) unit directions, each 4 x d.

    For d >= 12 all twelve are mutually orthonormal; smaller widths reuse
    columns cyclically.
    """
    rng = np.random.default_rng(20240917)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    cols = [q[:, i % d] for i in range(3 * N_EXPERTS)]
    basis = np.stack(cols)
    basis.setflags(write=False)
    return basis[:4], basis[4:8], basis[8:12]


@dataclass(frozen=True)
class ConflictSpec:
    dimension: str = "none"
    intensity: float = 1.0

    def __post_init__(self):
        dim = _SHORT.get(self.dimension.lower(), self.dimension.lower())
        if dim not in CONFLICTS:
            raise ValueError(f"conflict dimension must be one of {CONFLICTS}, got {self.dimension!r}")
        object.__setattr__(self, "dimension", dim)
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("intensity must lie in [0, 1]")

    @property
    def index(self):
        return None if self.dimension == "none" else EXPERTS.index(self.dimension)


def synth_features(config, seed, conflict=ConflictSpec(), answer=None):
    """Return ``(F_vis, F_ocr)``, each ``n_patches x d``.

    With no conflict (or zero intensity) ``F_ocr`` equals ``F_vis`` exactly.
    Otherwise every OCR patch is shifted along the conflict dimension's
    direction by ``intensity`` times a per-patch magnitude in [0.5, 1.5].
    """
    if not isinstance(conflict, ConflictSpec):
        conflict = ConflictSpec(*conflict)
    d, n = config.d, config.n_patches
    conflict_dirs, answer_dirs, _ = world_directions(d)
    rng = np.random.default_rng(seed)
    f_vis = rng.standard_normal((n, d)) / np.sqrt(d)
    if answer is not None:
        f_vis += rng.uniform(0.5, 1.5, size=(n, 1)) * answer_dirs[answer]
    magnitude = rng.uniform(0.5, 1.5, size=(n, 1))
    f_ocr = f_vis.copy()
    if conflict.index is not None and conflict.intensity > 0:
        f_ocr = f_vis + conflict.intensity * magnitude * conflict_dirs[conflict.index]
    return f_vis, f_ocr


def synth_query(config, seed, topic=None):
    """Question tokens; ``topic`` (an expert index) adds that dimension's direction."""
    _, _, question_dirs = world_directions(config.d)
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((config.n_query_tokens, config.d)) / np.sqrt(config.d)
    if topic is not None:
        q += question_dirs[topic]
    return q

