from collections import Counter
from dataclasses import dataclass, field

from toih.datamodel.schema import Condition, EvaluatedSample


class JoinError(ValueError):
    pass


@dataclass(frozen=True)
class Coverage:
    n_samples: int
    n_evaluated: int

    @property
    def n_missing(self):
        return self.n_samples - self.n_evaluated


@dataclass
class ConditionGroup:
    group_id: str
    members: dict = field(default_factory=dict)  # Condition -> EvaluatedSample

    def get(self, condition):
        return self.members.get(condition)

    def has(self, *conditions):
        return all(c in self.members for c in conditions)

    @property
    def complete(self):
        return self.has(*Condition)


def join(samples, records, model_id):
    """Attach ``model_id``'s responses to their samples.

    Returns ``(evaluated, coverage)``. Samples without a response are left out
    of ``evaluated`` and counted in ``coverage``. Responses pointing at unknown
    samples, or duplicated responses, raise :class:`JoinError`.
    """
    by_id = {}
    for s in samples:
        if s.sample_id in by_id:
            raise JoinError(f"duplicate sample_id {s.sample_id!r}")
        by_id[s.sample_id] = s
    mine = [r for r in records if r.model_id == model_id]
    dangling = sorted({r.sample_id for r in mine if r.sample_id not in by_id})
    if dangling:
        shown = ", ".join(dangling[:20])
        raise JoinError(f"{len(dangling)} responses reference unknown sample_ids: {shown}")
    dupes = sorted(k for k, n in Counter(r.sample_id for r in mine).items() if n > 1)
    if dupes:
        raise JoinError(f"multiple responses for sample_ids: {', '.join(dupes[:20])}")
    rec = {r.sample_id: r for r in mine}
    evaluated = [EvaluatedSample(s, rec[s.sample_id]) for s in samples if s.sample_id in rec]
    return evaluated, Coverage(n_samples=len(by_id), n_evaluated=len(evaluated))


def group_conditions(evaluated):
    groups = {}
    for e in evaluated:
        g = groups.setdefault(e.sample.group_id, ConditionGroup(e.sample.group_id))
        cond = e.sample.condition
        if cond in g.members:
            raise ValueError(f"group {g.group_id!r} has more than one {cond.value} sample")
        g.members[cond] = e
    return list(groups.values())


def tier_from_similarity(s):
    """Map a verb-embedding cosine similarity in [0, 1] to an ordinal tier.

    Below 0.5 is distal (1), [0.5, 0.8) medial (2), 0.8 and above proximal (3).
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"similarity must lie in [0, 1], got {s}")
    if s < 0.5:
        return 1
    if s < 0.8:
        return 2
    return 3
