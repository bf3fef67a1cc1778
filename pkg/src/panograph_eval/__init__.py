"""
PanoGraph Evaluation

Rigid alignment, ATE/ARE per panorama and summary statistics.
"""

from .alignment import AlignedErrors, align_2d, evaluate  # noqa: F401
from .metrics import MetricSummary, summarize  # noqa: F401

__all__ = ["AlignedErrors", "MetricSummary", "align_2d", "evaluate", "summarize"]
