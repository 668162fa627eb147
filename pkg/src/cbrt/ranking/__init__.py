"""SBFL metric ranking."""

from cbrt.ranking.sbfl import (
    FuzzySystem,
    SbflReport,
    TriangularTerm,
    fuzzy_weight,
    fuzzy_weights,
    node_utilities,
    prioritize,
    rank_table,
    relative_variance,
    relative_variances,
    rule_count,
    sbfl_report,
    variance,
)
from cbrt.ranking.table import MetricTable, Orientation

__all__ = [
    "FuzzySystem",
    "MetricTable",
    "Orientation",
    "SbflReport",
    "TriangularTerm",
    "fuzzy_weight",
    "fuzzy_weights",
    "node_utilities",
    "prioritize",
    "rank_table",
    "relative_variance",
    "relative_variances",
    "rule_count",
    "sbfl_report",
    "variance",
]
