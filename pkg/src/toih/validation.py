"""Input validation helpers shared by the estimators, metrics and parsers."""
from dataclasses import dataclass
import math

import numpy as np

OPTION_LABELS = ("A", "B", "C", "D")
SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class Undefined:
    """Marker for a quantity whose defining population is empty or degenerate."""

    reason: str

    def __bool__(self):
        return False

    def __repr__(self):
        return f"Undefined({self.reason!r})"


def is_defined(x):
    return not isinstance(x, Undefined)


def check_simplex(v, name="vector", tol=SIMPLEX_TOL, length=None):
    """Return ``v`` as a float64 array after checking it lies on the simplex."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if length is not None and v.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    if np.any(v < 0) or np.any(v > 1 + tol):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if abs(float(v.sum()) - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1 (got {float(v.sum())!r})")
    return v


def check_probability(p, name="probability"):
    p = float(p)
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p


def check_option_label(label, name="option"):
    if label not in OPTION_LABELS:
        raise ValueError(f"{name} must be one of {OPTION_LABELS}, got {label!r}")
    return label


def option_index(label):
    return OPTION_LABELS.index(check_option_label(label))


def check_finite_matrix(a, name="matrix", shape=None):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if shape is not None and a.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a
