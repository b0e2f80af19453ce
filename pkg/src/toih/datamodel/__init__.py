from toih.datamodel.schema import (
    DIMENSIONS,
    SCHEMA_VERSION,
    BenchmarkSample,
    Condition,
    Dimension,
    EvaluatedSample,
    EvaluationRecord,
    SchemaError,
    iter_validate,
    known_attributes,
    parse_records,
    parse_samples,
    record_from_dict,
    sample_from_dict,
    serialize_records,
    serialize_samples,
)
from toih.datamodel.grouping import (
    ConditionGroup,
    Coverage,
    JoinError,
    group_conditions,
    join,
    tier_from_similarity,
)
from toih.datamodel.simulate import BehaviorProfile, synthesize_responses, synthesize_samples

__all__ = [
    "DIMENSIONS",
    "SCHEMA_VERSION",
    "BehaviorProfile",
    "BenchmarkSample",
    "Condition",
    "ConditionGroup",
    "Coverage",
    "Dimension",
    "EvaluatedSample",
    "EvaluationRecord",
    "JoinError",
    "SchemaError",
    "group_conditions",
    "iter_validate",
    "join",
    "known_attributes",
    "parse_records",
    "parse_samples",
    "record_from_dict",
    "sample_from_dict",
    "serialize_records",
    "serialize_samples",
    "synthesize_responses",
    "synthesize_samples",
    "tier_from_similarity",
]
