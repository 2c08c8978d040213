"""Evaluation statistics and result serialization."""

from src.metrics.evaluation import (
    AccuracyDifference,
    accuracy_difference,
    fairness_std,
    forgetting_delta,
    mean_forgetting_over,
    summarize_round,
)
from src.metrics.outputs import read_rounds_csv, write_aggregate, write_outputs

__all__ = [
    'AccuracyDifference',
    'accuracy_difference',
    'fairness_std',
    'forgetting_delta',
    'mean_forgetting_over',
    'read_rounds_csv',
    'summarize_round',
    'write_aggregate',
    'write_outputs',
]
