"""Adam with decoupled weight decay and linear warmup."""
import numpy as np

from toih.moe.params import is_bias


class AdamW:
    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0, warmup_steps=0):
        if lr < 0:
            raise ValueError("lr must be >= 0")
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.warmup_steps = warmup_steps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def current_lr(self):
        """Learning rate for the step about to be taken."""
        t = self.t + 1
        if self.warmup_steps > 0 and t < self.warmup_steps:
            return self.lr * t / self.warmup_steps
        return self.lr

    def step(self, params, grads):
        """Update ``params`` in place for every name in ``grads``."""
        lr = self.current_lr()
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, g in grads.items():
            m = self.m[name] = b1 * self.m[name] + (1 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            p = params[name]
            if self.weight_decay and not is_bias(name):
                p -= lr * self.weight_decay * p
            p -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return lr
