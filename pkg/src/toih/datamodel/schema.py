"""Benchmark sample and model response records, and their JSONL encoding.

One JSON object per line. Every line carries ``"schema_version": "1"``.
Unknown fields are ignored with a logged warning.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
import io
import json
import logging
import math

from toih.validation import OPTION_LABELS, SIMPLEX_TOL

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
PROBS_TOL = 1e-6


class Dimension(str, Enum):
    TEMPORAL = "temporal"
    ACTION = "action"
    OBJECT = "object"
    SPATIAL = "spatial"

    @property
    def index(self):
        return DIMENSIONS.index(self)


# canonical (T, A, O, S) order shared by allocation vectors and experts
DIMENSIONS = (Dimension.TEMPORAL, Dimension.ACTION, Dimension.OBJECT, Dimension.SPATIAL)


class Condition(str, Enum):
    TEXT_FREE = "text_free"
    TEXT_CONGRUENT = "text_congruent"
    TEXT_CONTRADICTORY = "text_contradictory"


class SchemaError(ValueError):
    """A record violated the schema. ``line`` is 1-based; ``field`` may be None."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)


@dataclass(frozen=True)
class BenchmarkSample:
    sample_id: str
    group_id: str
    dimension: Dimension
    attribute: str
    tier: int
    condition: Condition
    options: tuple
    ground_truth: str
    allocation: tuple
    hallucination_option: str = None
    scs: int = None
    allocation_sum: float = 1.0

    @property
    def is_contradictory(self):
        return self.condition is Condition.TEXT_CONTRADICTORY


@dataclass(frozen=True)
class EvaluationRecord:
    sample_id: str
    model_id: str
    prediction: str
    option_probs: tuple = None


@dataclass(frozen=True)
class EvaluatedSample:
    sample: BenchmarkSample
    record: EvaluationRecord
    correct: int = field(init=False)
    hallucinated: int = field(init=False)

    def __post_init__(self):
        s, r = self.sample, self.record
        object.__setattr__(self, "correct", int(r.prediction == s.ground_truth))
        object.__setattr__(
            self, "hallucinated", int(s.is_contradictory and r.prediction == s.hallucination_option)
        )

    # shorthands used throughout the metric code
    @property
    def C(self):
        return self.correct

    @property
    def H(self):
        return self.hallucinated


@lru_cache(maxsize=1)
def known_attributes():
    """The 88 reference attribute labels, lower-cased."""
    text = resources.files("toih.datamodel").joinpath("attributes.json").read_text("utf-8")
    return frozenset(row["attribute"].lower() for row in json.loads(text)["attributes"])


_SAMPLE_FIELDS = {
    "schema_version", "sample_id", "group_id", "dimension", "attribute", "tier",
    "condition", "options", "ground_truth", "hallucination_option", "scs",
    "allocation", "allocation_sum",
}
_RECORD_FIELDS = {"schema_version", "sample_id", "model_id", "prediction", "option_probs"}


def _require(obj, key, line):
    if key not in obj or obj[key] is None:
        raise SchemaError("missing required field", line, key)
    return obj[key]


def _nonempty_str(obj, key, line):
    v = _require(obj, key, line)
    if not isinstance(v, str) or not v.strip():
        raise SchemaError("must be a non-empty string", line, key)
    return v


def _label(obj, key, line):
    v = _require(obj, key, line)
    if v not in OPTION_LABELS:
        raise SchemaError(f"must be one of {', '.join(OPTION_LABELS)}, got {v!r}", line, key)
    return v


def _enum(cls, obj, key, line):
    v = _require(obj, key, line)
    try:
        return cls(v)
    except ValueError:
        allowed = "|".join(m.value for m in cls)
        raise SchemaError(f"must be one of {allowed}, got {v!r}", line, key) from None


def _int(obj, key, line, lo, hi):
    v = _require(obj, key, line)
    if isinstance(v, bool) or not isinstance(v, int) or not lo <= v <= hi:
        raise SchemaError(f"must be an integer in [{lo}, {hi}], got {v!r}", line, key)
    return v


def _float_list(obj, key, line, length):
    v = _require(obj, key, line)
    if not isinstance(v, list) or len(v) != length:
        raise SchemaError(f"must be a list of {length} numbers", line, key)
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise SchemaError("entries must be finite numbers", line, key)
        if x < 0:
            raise SchemaError("entries must be nonnegative", line, key)
        out.append(float(x))
    return out


def _check_version(obj, line):
    v = _require(obj, "schema_version", line)
    if str(v) != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {v!r}", line, "schema_version")


def _warn_unknown(obj, allowed, line):
    extra = sorted(set(obj) - allowed)
    if extra:
        logger.warning("line %s: ignoring unknown fields %s", line, ", ".join(extra))


def sample_from_dict(obj, line=None):
    """Build a validated :class:`BenchmarkSample` from one decoded JSON object."""
    if not isinstance(obj, dict):
        raise SchemaError("record must be a JSON object", line)
    _check_version(obj, line)
    _warn_unknown(obj, _SAMPLE_FIELDS, line)
    sample_id = _nonempty_str(obj, "sample_id", line)
    group_id = _nonempty_str(obj, "group_id", line)
    dimension = _enum(Dimension, obj, "dimension", line)
    attribute = _nonempty_str(obj, "attribute", line)
    if attribute.lower() not in known_attributes():
        logger.warning("line %s: attribute %r is not in the reference list", line, attribute)
    tier = _int(obj, "tier", line, 1, 3)
    condition = _enum(Condition, obj, "condition", line)
    options = _require(obj, "options", line)
    if (not isinstance(options, list) or len(options) != 4
            or not all(isinstance(o, str) for o in options)):
        raise SchemaError("must be a list of exactly 4 strings (A-D)", line, "options")
    ground_truth = _label(obj, "ground_truth", line)

    contradictory = condition is Condition.TEXT_CONTRADICTORY
    halluc = obj.get("hallucination_option")
    scs = obj.get("scs")
    if contradictory:
        halluc = _label(obj, "hallucination_option", line)
        if halluc == ground_truth:
            raise SchemaError("must differ from ground_truth", line, "hallucination_option")
        scs = _int(obj, "scs", line, 1, 5)
    else:
        if halluc is not None:
            raise SchemaError("only allowed for text_contradictory samples", line, "hallucination_option")
        if scs is not None:
            raise SchemaError("only allowed for text_contradictory samples", line, "scs")

    raw = _float_list(obj, "allocation", line, 4)
    total = math.fsum(raw)
    if total <= 0:
        raise SchemaError("must have positive mass", line, "allocation")
    if total > 1 + SIMPLEX_TOL:
        raise SchemaError(f"entries sum to {total!r} > 1", line, "allocation")
    if abs(total - 1.0) <= SIMPLEX_TOL:
        allocation = tuple(raw)
        allocation_sum = obj.get("allocation_sum", total)
        if isinstance(allocation_sum, bool) or not isinstance(allocation_sum, (int, float)):
            raise SchemaError("must be a number", line, "allocation_sum")
        allocation_sum = float(allocation_sum)
    else:
        allocation = tuple(x / total for x in raw)
        allocation_sum = total

    return BenchmarkSample(
        sample_id=sample_id,
        group_id=group_id,
        dimension=dimension,
        attribute=attribute,
        tier=tier,
        condition=condition,
        options=tuple(options),
        ground_truth=ground_truth,
        allocation=allocation,
        hallucination_option=halluc,
        scs=scs,
        allocation_sum=allocation_sum,
    )


def sample_to_dict(s):
    obj = {
        "schema_version": SCHEMA_VERSION,
        "sample_id": s.sample_id,
        "group_id": s.group_id,
        "dimension": s.dimension.value,
        "attribute": s.attribute,
        "tier": s.tier,
        "condition": s.condition.value,
        "options": list(s.options),
        "ground_truth": s.ground_truth,
        "allocation": list(s.allocation),
        "allocation_sum": s.allocation_sum,
    }
    if s.hallucination_option is not None:
        obj["hallucination_option"] = s.hallucination_option
    if s.scs is not None:
        obj["scs"] = s.scs
    return obj


def record_from_dict(obj, line=None):
    if not isinstance(obj, dict):
        raise SchemaError("record must be a JSON object", line)
    _check_version(obj, line)
    _warn_unknown(obj, _RECORD_FIELDS, line)
    probs = obj.get("option_probs")
    if probs is not None:
        probs = _float_list(obj, "option_probs", line, 4)
        if abs(math.fsum(probs) - 1.0) > PROBS_TOL:
            raise SchemaError("must sum to 1", line, "option_probs")
        probs = tuple(probs)
    return EvaluationRecord(
        sample_id=_nonempty_str(obj, "sample_id", line),
        model_id=_nonempty_str(obj, "model_id", line),
        prediction=_label(obj, "prediction", line),
        option_probs=probs,
    )


def record_to_dict(r):
    obj = {
        "schema_version": SCHEMA_VERSION,
        "sample_id": r.sample_id,
        "model_id": r.model_id,
        "prediction": r.prediction,
    }
    if r.option_probs is not None:
        obj["option_probs"] = list(r.option_probs)
    return obj


def _lines(stream):
    if isinstance(stream, (bytes, bytearray)):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for lineno, raw in enumerate(stream, 1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if raw.strip():
            yield lineno, raw


def _decode(raw, lineno):
    try:
        return json.loads(raw)
    except json.JSONDecodeError as e:
        raise SchemaError(f"malformed JSON ({e.msg})", lineno) from None


def iter_validate(stream, builder):
    """Yield ``(lineno, item_or_error)`` for each non-blank line."""
    for lineno, raw in _lines(stream):
        try:
            yield lineno, builder(_decode(raw, lineno), lineno)
        except SchemaError as e:
            yield lineno, e


def parse_samples(stream):
    """Parse JSONL samples; raises :class:`SchemaError` at the first bad line."""
    return [sample_from_dict(_decode(raw, n), n) for n, raw in _lines(stream)]


def parse_records(stream):
    return [record_from_dict(_decode(raw, n), n) for n, raw in _lines(stream)]


def _dumps(obj):
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def serialize_samples(samples):
    return "".join(_dumps(sample_to_dict(s)) + "\n" for s in samples)


def serialize_records(records):
    return "".join(_dumps(record_to_dict(r)) + "\n" for r in records)
