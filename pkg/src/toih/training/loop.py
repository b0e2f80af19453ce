"""Deterministic mini-batch training of the router."""
from dataclasses import asdict, dataclass
import json
import logging
import math

import numpy as np

from toih.moe.model import forward
from toih.moe.params import MoEParams, init_params, is_frozen
from toih.numerics.tape import DiffTape
from toih.training.losses import LossParts, LossWeights, loss_aux, loss_cls, loss_lm, loss_sft, total_loss
from toih.training.optim import AdamW

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-5
    epochs: int = 2
    warmup_steps: int = 80
    weight_decay: float = 0.01
    seed: int = 42
    batch_size: int = 5
    max_steps: int = None  # stop early after this many optimizer steps

    def __post_init__(self):
        # lr == 0 is accepted as an explicit no-op run
        if not (math.isfinite(self.lr) and self.lr >= 0):
            raise ValueError("lr must be a finite value >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.warmup_steps < 0 or self.weight_decay < 0:
            raise ValueError("warmup_steps and weight_decay must be >= 0")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")

    def steps_for(self, n_examples):
        per_epoch = math.ceil(n_examples / self.batch_size)
        total = per_epoch * self.epochs
        return total if self.max_steps is None else min(total, self.max_steps)

    def to_dict(self):
        return asdict(self)


class NonFiniteLossError(FloatingPointError):
    def __init__(self, step, detail):
        super().__init__(f"non-finite loss at step {step}: {detail}")
        self.step = step


def example_loss(config, leaves, example, weights):
    """Return ``(total, parts)`` for one example on tape leaves."""
    res = forward(config, leaves, example.f_vis, example.f_ocr, example.query)
    parts = LossParts(
        lm=loss_lm(res.option_logits, example.answer_index),
        cls=loss_cls(res.pooled_video_logits, example.conflict),
        sft=loss_sft(res.trace, example.pi),
        aux=loss_aux(res.trace),
    )
    return total_loss(parts, weights), parts


def batch_loss(config, leaves, batch, weights):
    """Mean total loss over ``batch`` (summed in index order) and mean parts."""
    total = None
    sums = {"l_lm": 0.0, "l_cls": 0.0, "l_sft": 0.0, "l_aux": 0.0}
    for ex in batch:
        t, parts = example_loss(config, leaves, ex, weights)
        total = t if total is None else total + t
        for k, v in parts.floats().items():
            sums[k] += v
    n = len(batch)
    return total * (1.0 / n), {k: v / n for k, v in sums.items()}


def loss_terms(config, leaves, batch, weights):
    """The mean total loss split into its weighted per-example, per-part terms."""
    terms = []
    scale = 1.0 / len(batch)
    lams = (1.0, weights.lambda_cls, weights.lambda_sft, weights.lambda_aux)
    for ex in batch:
        _, parts = example_loss(config, leaves, ex, weights)
        for lam, part in zip(lams, (parts.lm, parts.cls, parts.sft, parts.aux)):
            terms.append(part * (lam * scale))
    return terms


def loss_tape(config, params, examples, weights=LossWeights()):
    """A :class:`DiffTape` of the mean total loss, for gradient checking."""
    if isinstance(params, MoEParams):
        trainable, arrays = params.trainable, params.arrays
    else:
        arrays = params
        trainable = [k for k in params if not is_frozen(k)]
    return DiffTape(lambda leaves: loss_terms(config, leaves, examples, weights), arrays, trainable)


def train(train_config, model_config, dataset, weights=LossWeights(), params=None):
    """Train and return ``(params, history)``.

    ``history`` holds one dict per optimizer step with the four mean loss
    parts and the weighted total. Frozen parameters are never touched.
    """
    dataset = list(dataset)
    if not dataset:
        raise ValueError("dataset is empty")
    params = init_params(model_config) if params is None else params.copy()
    trainable = params.trainable
    n_steps = train_config.steps_for(len(dataset))
    opt = AdamW(
        {k: params[k] for k in trainable},
        lr=train_config.lr,
        weight_decay=train_config.weight_decay,
        warmup_steps=train_config.warmup_steps,
    )
    rng = np.random.default_rng(train_config.seed)
    history = []
    order = []
    bs = train_config.batch_size
    for step in range(n_steps):
        if not order:
            perm = rng.permutation(len(dataset))
            order = [perm[i:i + bs].tolist() for i in range(0, len(perm), bs)]
        batch = [dataset[i] for i in order.pop(0)]
        seen = {}

        def objective(leaves, batch=batch):
            total, seen["parts"] = batch_loss(model_config, leaves, batch, weights)
            return total

        tape = DiffTape(objective, params.arrays, trainable)
        try:
            value, grads = tape.value_and_grad()
        except ValueError as exc:
            raise NonFiniteLossError(step, str(exc)) from exc
        if not math.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise NonFiniteLossError(step, f"total={value}")
        lr = opt.step(params.arrays, grads)
        rec = {"step": step, "lr": lr, **seen["parts"], "total": value}
        history.append(rec)
        if step % 50 == 0:
            logger.info("step %d total %.4f", step, value)
    return params, history


def write_history(history, path):
    """One JSON object per line: step, lr, l_lm, l_cls, l_sft, l_aux, total."""
    with open(path, "w", encoding="utf-8") as f:
        for rec in history:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
