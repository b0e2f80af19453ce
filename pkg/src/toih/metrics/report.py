"""Aggregate metric report plus its JSON and text-table renderings."""
from dataclasses import dataclass, field
import json
import math

from toih.datamodel.grouping import group_conditions
from toih.datamodel.schema import DIMENSIONS, Condition
from toih.metrics import core
from toih.validation import Undefined, is_defined

# column order of the published robustness table
TABLE_COLUMNS = (
    "VYR", "TIHR", "WHR", "SCSI", "HRR", "HSR", "TIB", "ICR", "SGLI",
    "TLSR", "ASLSR", "AALSR", "SRLSR", "Overall",
)
# fractions shown as percentages; HSR is already a percentage
_PERCENT = {"VYR", "TIHR", "WHR", "HRR", "TIB", "ICR", "Overall"}


@dataclass
class MetricReport:
    overall: object
    layer1: dict  # HRR, VYR, HAR, ICR, SGLI, TIHR, TIB
    layer2: dict  # SCSI, WHR, HSR, HRC
    layer3: dict  # TLSR.. -> LoadSensitivity
    accuracy_by_dimension: dict
    accuracy_by_dimension_condition: dict
    accuracy_by_scs: dict
    prob_shift: core.ShiftSummary
    n_samples: int = 0
    n_groups: int = 0
    notes: list = field(default_factory=list)

    def scalar(self, column):
        if column == "Overall":
            return self.overall
        if column in self.layer1:
            return self.layer1[column]
        if column in self.layer2:
            return self.layer2[column]
        return self.layer3[column].r

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "n_groups": self.n_groups,
            "overall": _enc(self.overall),
            "layer1": {k: _enc(v) for k, v in self.layer1.items()},
            "layer2": {
                k: ({str(lvl): _enc(x) for lvl, x in v.items()} if k == "HRC" else _enc(v))
                for k, v in self.layer2.items()
            },
            "layer3": {
                k: {"r": _enc(v.r), "t": _enc(v.t), "n": v.n} for k, v in self.layer3.items()
            },
            "accuracy_by_dimension": {k: _enc(v) for k, v in self.accuracy_by_dimension.items()},
            "accuracy_by_dimension_condition": {
                k: {c: _enc(x) for c, x in v.items()}
                for k, v in self.accuracy_by_dimension_condition.items()
            },
            "accuracy_by_scs": {str(k): _enc(v) for k, v in self.accuracy_by_scs.items()},
            "prob_shift": {
                "regime_counts": self.prob_shift.counts(),
                "mean_delta_y": _enc(self.prob_shift.mean_delta_y()),
                "mean_delta_o": _enc(self.prob_shift.mean_delta_o()),
                "n_pairs": len(self.prob_shift.shifts),
                "n_skipped_missing_probs": self.prob_shift.n_skipped,
                "n_unpaired_groups": self.prob_shift.n_unpaired,
            },
            "notes": list(self.notes),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self, label="model"):
        cells = [_fmt(c, self.scalar(c)) for c in TABLE_COLUMNS]
        widths = [max(len(c), len(v)) for c, v in zip(TABLE_COLUMNS, cells)]
        name_w = max(len("Model"), len(label))
        head = "Model".ljust(name_w) + "  " + "  ".join(c.rjust(w) for c, w in zip(TABLE_COLUMNS, widths))
        row = label.ljust(name_w) + "  " + "  ".join(v.rjust(w) for v, w in zip(cells, widths))
        return head + "\n" + row + "\n"


def _enc(x):
    if isinstance(x, Undefined):
        return {"value": None, "undefined": x.reason}
    if isinstance(x, float) and math.isinf(x):
        return {"value": None, "infinite": "+inf" if x > 0 else "-inf"}
    return x


def _fmt(column, x):
    if not is_defined(x):
        return "—"
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if column in _PERCENT:
        return f"{100.0 * x:.1f}"
    if column == "HSR":
        return f"{x:.1f}"
    return f"{x:.3f}"


def _acc(rows, reason):
    return core._ratio(sum(e.C for e in rows), len(rows), reason)


def full_report(evaluated, groups=None):
    """Compute every metric. Never raises on partial data; gaps become Undefined."""
    evaluated = list(evaluated)
    if groups is None:
        groups = group_conditions(evaluated)
    contra = [e for e in evaluated if e.sample.condition is Condition.TEXT_CONTRADICTORY]
    by_dim = {
        d.value: _acc([e for e in evaluated if e.sample.dimension is d], f"no {d.value} samples")
        for d in DIMENSIONS
    }
    by_dim_cond = {
        d.value: {
            c.value: _acc(
                [e for e in evaluated if e.sample.dimension is d and e.sample.condition is c],
                f"no {d.value}/{c.value} samples",
            )
            for c in Condition
        }
        for d in DIMENSIONS
    }
    by_scs = {k: _acc([e for e in contra if e.sample.scs == k], f"no samples at SCS {k}") for k in range(1, 6)}
    notes = []
    if not evaluated:
        notes.append("no evaluated samples; every metric is undefined")
    return MetricReport(
        overall=core.overall_accuracy(evaluated),
        layer1={
            "HRR": core.hrr(evaluated),
            "VYR": core.vyr(groups),
            "HAR": core.har(evaluated),
            "ICR": core.icr(groups),
            "SGLI": core.sgli(groups),
            "TIHR": core.tihr(evaluated),
            "TIB": core.tib(evaluated),
        },
        layer2={
            "SCSI": core.scsi(evaluated),
            "WHR": core.whr(evaluated),
            "HSR": core.hsr(evaluated),
            "HRC": core.hrc(evaluated),
        },
        layer3={name: core.load_sensitive(evaluated, dim) for name, dim in core.LOAD_METRICS.items()},
        accuracy_by_dimension=by_dim,
        accuracy_by_dimension_condition=by_dim_cond,
        accuracy_by_scs=by_scs,
        prob_shift=core.prob_shift(groups),
        n_samples=len(evaluated),
        n_groups=len(groups),
        notes=notes,
    )
