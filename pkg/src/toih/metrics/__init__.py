from toih.metrics.core import (
    LOAD_METRICS,
    REGIMES,
    LoadSensitivity,
    ProbabilityShift,
    ShiftSummary,
    har,
    hrc,
    hrr,
    hsr,
    icr,
    load_sensitive,
    overall_accuracy,
    prob_shift,
    regime,
    scsi,
    sgli,
    tib,
    tihr,
    vyr,
    whr,
)
from toih.metrics.report import TABLE_COLUMNS, MetricReport, full_report

__all__ = [
    "LOAD_METRICS",
    "REGIMES",
    "TABLE_COLUMNS",
    "LoadSensitivity",
    "MetricReport",
    "ProbabilityShift",
    "ShiftSummary",
    "full_report",
    "har",
    "hrc",
    "hrr",
    "hsr",
    "icr",
    "load_sensitive",
    "overall_accuracy",
    "prob_shift",
    "regime",
    "scsi",
    "sgli",
    "tib",
    "tihr",
    "vyr",
    "whr",
]
