"""Central finite-difference verification of tape gradients."""
from dataclasses import dataclass, field
import math

import numpy as np


def param_group(name):
    """``experts.temporal.w_up`` -> ``experts.temporal``; ``q_vis`` -> ``q_vis``."""
    return name.rsplit(".", 1)[0] if "." in name else name


@dataclass
class GradReport:
    step: float
    tol_abs: float
    tol_rel: float
    value: float
    errors: dict = field(default_factory=dict)  # param name -> worst mixed error
    n_entries: int = 0

    @property
    def max_error(self):
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self):
        return self.max_error < self.tol_rel

    def by_group(self):
        out = {}
        for name, err in self.errors.items():
            g = param_group(name)
            out[g] = max(out.get(g, 0.0), err)
        return dict(sorted(out.items()))

    def failing_groups(self):
        return [g for g, e in self.by_group().items() if not e < self.tol_rel]


def grad_check(tape, step=1e-5, tol_abs=1e-6, tol_rel=1e-4, corrupt=None):
    """Compare the tape's analytic gradient against central differences.

    The mixed error per entry is ``|g_a - g_n| / max(tol_abs, |g_n|)``.
    When the tape returns several terms, each is differenced separately
    before summing, which keeps cancellation error proportional to the
    individual terms rather than their total.
    ``corrupt`` names a parameter group whose analytic gradient is perturbed
    before comparison; it exists to exercise the failure path.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    value, analytic = tape.value_and_grad()
    if corrupt is not None:
        hits = [k for k in analytic if param_group(k) == corrupt]
        if not hits:
            raise KeyError(f"no parameter group named {corrupt!r}")
        for k in hits:
            analytic[k] = analytic[k] + 1.0
    report = GradReport(step=step, tol_abs=tol_abs, tol_rel=tol_rel, value=value)
    params = {k: v.copy() for k, v in tape.params.items()}
    for name in tape.trainable:
        theta = params[name]
        flat = theta.reshape(-1)
        ga = analytic[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = tape.value_terms(params)
            flat[i] = orig - step
            f_minus = tape.value_terms(params)
            flat[i] = orig
            gn = math.fsum(f_plus - f_minus) / (2.0 * step)
            err = abs(ga[i] - gn) / max(tol_abs, abs(gn))
            worst = max(worst, err)
        report.errors[name] = worst
        report.n_entries += flat.size
    return report
