"""Semiparametric specification tools for DOFC models."""

from .dimension import DimensionResult, dimension_test, lag_covariances, multivariate_ljung_box, whiten
from .doc import DocResult, cross_correlation_statistic, doc_rotation
from .grouping import GroupingResult, contiguous_partitions, memory_grouping, wald_equal_memory
from .starting import (
    SpecificationReport,
    assign_components,
    fit_ar,
    initial_params,
    lower_triangular_rotation,
    specify,
    starting_values,
)
from .whittle import MemoryEstimate, default_bandwidth, elw_estimate, elw_objective

__all__ = [
    "MemoryEstimate",
    "elw_estimate",
    "elw_objective",
    "default_bandwidth",
    "DimensionResult",
    "dimension_test",
    "lag_covariances",
    "multivariate_ljung_box",
    "whiten",
    "DocResult",
    "doc_rotation",
    "cross_correlation_statistic",
    "GroupingResult",
    "memory_grouping",
    "contiguous_partitions",
    "wald_equal_memory",
    "SpecificationReport",
    "fit_ar",
    "lower_triangular_rotation",
    "starting_values",
    "assign_components",
    "initial_params",
    "specify",
]
