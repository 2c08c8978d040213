"""Data models for the simulator."""

from src.models.records import ClientRoundMetrics, FinalEvaluation, RoundAggregates, RoundRecord

__all__ = [
    'ClientRoundMetrics',
    'FinalEvaluation',
    'RoundAggregates',
    'RoundRecord',
]
