"""Resistance, escalation and cognitive-load metrics over evaluated samples.

Every rate is a fraction in [0, 1]. A metric whose denominator population is
empty returns :class:`~toih.validation.Undefined` carrying the reason.
"""
from dataclasses import dataclass, field

from toih.datamodel.schema import Condition, Dimension
from toih.numerics.linalg import pearson, t_statistic
from toih.validation import OPTION_LABELS, Undefined, is_defined

FREE = Condition.TEXT_FREE
CONG = Condition.TEXT_CONGRUENT
CONTRA = Condition.TEXT_CONTRADICTORY

WEAK_CONFLICT = (1, 2)
STRONG_CONFLICT = (4, 5)

LOAD_METRICS = {
    "TLSR": Dimension.TEMPORAL,
    "ASLSR": Dimension.ACTION,
    "AALSR": Dimension.OBJECT,
    "SRLSR": Dimension.SPATIAL,
}


def _ratio(num, den, reason):
    return num / den if den else Undefined(reason)


def _contra(evaluated):
    return [e for e in evaluated if e.sample.condition is CONTRA]


def overall_accuracy(evaluated):
    return _ratio(sum(e.C for e in evaluated), len(evaluated), "no evaluated samples")


def hrr(evaluated):
    """Accuracy on text-contradictory samples."""
    contra = _contra(evaluated)
    return _ratio(sum(e.C for e in contra), len(contra), "no text_contradictory samples")


def har(evaluated):
    """Fraction of contradictory samples answered with the overlay's option."""
    contra = _contra(evaluated)
    return _ratio(sum(e.H for e in contra), len(contra), "no text_contradictory samples")


def tihr(evaluated):
    """Fraction of contradictory answers that match the injected text's option.

    Counted from the raw prediction rather than the hallucination flag; with
    option-label answers it must agree with :func:`har`.
    """
    n = hits = 0
    for e in evaluated:
        if e.sample.condition is CONTRA:
            n += 1
            hits += e.record.prediction == e.sample.hallucination_option
    return _ratio(hits, n, "no text_contradictory samples")


def tib(evaluated):
    """Among wrong contradictory answers, the share that picked the overlay's option."""
    wrong = [e for e in _contra(evaluated) if not e.C]
    return _ratio(sum(e.H for e in wrong), len(wrong), "no incorrect text_contradictory samples")


def scsi(evaluated):
    """Mean conflict score of the contradictory samples that hallucinated."""
    contra = _contra(evaluated)
    hits = sum(e.H for e in contra)
    return _ratio(sum(e.sample.scs * e.H for e in contra), hits, "no hallucinations")


def whr(evaluated):
    contra = _contra(evaluated)
    return _ratio(
        sum(e.sample.scs * e.H for e in contra),
        sum(e.sample.scs for e in contra),
        "no text_contradictory samples",
    )


def hsr(evaluated):
    """Relative change (in percent) of TIB from weak to strong conflicts."""
    contra = _contra(evaluated)
    weak = tib([e for e in contra if e.sample.scs in WEAK_CONFLICT])
    strong = tib([e for e in contra if e.sample.scs in STRONG_CONFLICT])
    if not is_defined(weak):
        return Undefined(f"weak-conflict TIB undefined: {weak.reason}")
    if weak == 0:
        return Undefined("weak-conflict TIB is zero")
    if not is_defined(strong):
        return Undefined(f"strong-conflict TIB undefined: {strong.reason}")
    return (strong - weak) / weak * 100.0


def hrc(evaluated):
    """Hallucination rate per conflict score level 1..5."""
    out = {}
    contra = _contra(evaluated)
    for k in range(1, 6):
        level = [e for e in contra if e.sample.scs == k]
        out[k] = _ratio(sum(e.H for e in level), len(level), f"no samples at SCS {k}")
    return out


def _paired_accuracy(groups, conditions):
    usable = [g for g in groups if g.has(*conditions)]
    if not usable:
        return None, len(groups)
    acc = {c: sum(g.get(c).C for g in usable) / len(usable) for c in conditions}
    return acc, len(groups) - len(usable)


def vyr(groups):
    """Text-free minus text-contradictory accuracy over groups holding both."""
    acc, _ = _paired_accuracy(groups, (FREE, CONTRA))
    if acc is None:
        return Undefined("no group has both text_free and text_contradictory samples")
    return acc[FREE] - acc[CONTRA]


def icr(groups):
    acc, _ = _paired_accuracy(groups, (FREE, CONTRA))
    if acc is None:
        return Undefined("no group has both text_free and text_contradictory samples")
    if acc[FREE] == 0:
        return Undefined("text_free accuracy is zero")
    return 1.0 - acc[CONTRA] / acc[FREE]


def sgli(groups):
    acc, _ = _paired_accuracy(groups, (FREE, CONG, CONTRA))
    if acc is None:
        return Undefined("no group has all three conditions")
    if acc[FREE] == 0:
        return Undefined("text_free accuracy is zero")
    return (acc[CONG] - acc[CONTRA]) / acc[FREE]


@dataclass(frozen=True)
class LoadSensitivity:
    r: object
    t: object
    n: int


def load_sensitive(evaluated, dimension):
    """Pearson correlation between cognitive tier and correctness, plus its t."""
    dimension = Dimension(dimension)
    rows = [e for e in _contra(evaluated) if e.sample.dimension is dimension]
    n = len(rows)
    if n < 3:
        why = Undefined(f"only {n} text_contradictory {dimension.value} samples (need 3)")
        return LoadSensitivity(why, why, n)
    r = pearson([e.sample.tier for e in rows], [e.C for e in rows])
    if not is_defined(r):
        return LoadSensitivity(r, r, n)
    return LoadSensitivity(r, t_statistic(r, n), n)


REGIME_I = "I"  # right without text, misled onto the overlay option
REGIME_II = "II"  # already wrong without text
REGIME_III = "III"  # right in both conditions
REGIME_OTHER = "other"  # right without text, wrong with it, but not on the overlay option
REGIMES = (REGIME_I, REGIME_II, REGIME_III, REGIME_OTHER)


@dataclass(frozen=True)
class ProbabilityShift:
    group_id: str
    delta_y: float
    delta_o: float
    regime: str


@dataclass
class ShiftSummary:
    shifts: list = field(default_factory=list)
    n_skipped: int = 0  # paired groups lacking option_probs
    n_unpaired: int = 0  # groups without both text_free and text_contradictory

    def counts(self):
        out = dict.fromkeys(REGIMES, 0)
        for s in self.shifts:
            out[s.regime] += 1
        return out

    def mean_delta_y(self):
        return _ratio(sum(s.delta_y for s in self.shifts), len(self.shifts), "no paired probabilities")

    def mean_delta_o(self):
        return _ratio(sum(s.delta_o for s in self.shifts), len(self.shifts), "no paired probabilities")


def regime(c_free, c_contra, h_contra):
    if not c_free:
        return REGIME_II
    if c_contra:
        return REGIME_III
    return REGIME_I if h_contra else REGIME_OTHER


def prob_shift(groups):
    """Per-group change in P(ground truth) and P(overlay option) from text-free
    to text-contradictory, with a behavioural regime label."""
    summary = ShiftSummary()
    for g in groups:
        free, contra = g.get(FREE), g.get(CONTRA)
        if free is None or contra is None:
            summary.n_unpaired += 1
            continue
        if free.record.option_probs is None or contra.record.option_probs is None:
            summary.n_skipped += 1
            continue
        y = OPTION_LABELS.index(contra.sample.ground_truth)
        o = OPTION_LABELS.index(contra.sample.hallucination_option)
        pf, pc = free.record.option_probs, contra.record.option_probs
        summary.shifts.append(ProbabilityShift(
            group_id=g.group_id,
            delta_y=pc[y] - pf[y],
            delta_o=pc[o] - pf[o],
            regime=regime(free.C, contra.C, contra.H),
        ))
    return summary
