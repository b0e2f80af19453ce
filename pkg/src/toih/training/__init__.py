from toih.training.data import TrainingExample, allocation_target, gen_synthetic_dataset
from toih.training.losses import (
    LossParts,
    LossWeights,
    load_balance,
    loss_aux,
    loss_cls,
    loss_lm,
    loss_sft,
    total_loss,
)
from toih.training.evaluation import RouterEvaluation, evaluate_router
from toih.training.loop import (
    NonFiniteLossError,
    TrainConfig,
    batch_loss,
    example_loss,
    loss_tape,
    loss_terms,
    train,
    write_history,
)
from toih.training.optim import AdamW

__all__ = [
    "AdamW",
    "LossParts",
    "LossWeights",
    "NonFiniteLossError",
    "RouterEvaluation",
    "TrainConfig",
    "TrainingExample",
    "allocation_target",
    "batch_loss",
    "evaluate_router",
    "example_loss",
    "gen_synthetic_dataset",
    "load_balance",
    "loss_aux",
    "loss_cls",
    "loss_lm",
    "loss_sft",
    "loss_tape",
    "loss_terms",
    "total_loss",
    "train",
    "write_history",
]
