from toih.numerics.linalg import (
    DegenerateVectorError,
    cosine,
    cross_attention,
    kl_divergence,
    matmul,
    pearson,
    sigmoid,
    silu,
    softmax,
    swiglu,
    t_statistic,
)
from toih.numerics.tape import DiffTape, Tensor
from toih.numerics.gradcheck import GradReport, grad_check

__all__ = [
    "DegenerateVectorError",
    "DiffTape",
    "GradReport",
    "Tensor",
    "cosine",
    "cross_attention",
    "grad_check",
    "kl_divergence",
    "matmul",
    "pearson",
    "sigmoid",
    "silu",
    "softmax",
    "swiglu",
    "t_statistic",
]
