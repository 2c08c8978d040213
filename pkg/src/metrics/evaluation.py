"""Accuracy, fairness and forgetting statistics."""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.models.records import ClientRoundMetrics, RoundAggregates, RoundRecord
from src.utils.errors import InvalidArgumentError


def forgetting_delta(pre: float, post: float) -> float:
    """Accuracy lost when the local model is overwritten (positive = forgetting)."""
    return pre - post


def fairness_std(accs: Sequence[float]) -> float:
    """Population standard deviation of per-client accuracies."""
    values = np.asarray(accs, dtype=np.float64)
    if values.size < 2:
        raise InvalidArgumentError(f"fairness_std needs at least 2 clients, got {values.size}")
    return float(values.std())


@dataclass
class AccuracyDifference:
    """Per-client accuracy deltas of one method over another."""

    deltas: List[float]
    win_fraction: float


def accuracy_difference(accs_a: Sequence[float], accs_b: Sequence[float]) -> AccuracyDifference:
    """Elementwise ``a - b`` and the share of clients where ``a`` strictly wins."""
    if len(accs_a) != len(accs_b):
        raise InvalidArgumentError(f"client counts differ: {len(accs_a)} vs {len(accs_b)}")
    if not accs_a:
        raise InvalidArgumentError("accuracy_difference needs at least one client")
    deltas = (np.asarray(accs_a, dtype=np.float64) - np.asarray(accs_b, dtype=np.float64)).tolist()
    wins = sum(1 for d in deltas if d > 0)
    return AccuracyDifference(deltas=deltas, win_fraction=wins / len(deltas))


def mean_and_std(values: Sequence[Optional[float]]) -> "tuple[Optional[float], Optional[float]]":
    """Mean and population std over the non-missing values (std 0 for one value)."""
    present = [v for v in values if v is not None]
    if not present:
        return None, None
    std = fairness_std(present) if len(present) >= 2 else 0.0
    return float(np.mean(present)), std


def summarize_round(round_number: int, clients: List[ClientRoundMetrics],
                    global_mean_acc: Optional[float] = None) -> RoundRecord:
    """Build a RoundRecord with participant aggregates."""
    mean_acc, std_acc = mean_and_std([c.post_train_acc for c in clients])
    deltas = [
        forgetting_delta(c.pre_update_acc, c.post_update_acc)
        for c in clients
        if c.pre_update_acc is not None and c.post_update_acc is not None
    ]
    return RoundRecord(
        round=round_number,
        clients=clients,
        aggregates=RoundAggregates(
            mean_acc=mean_acc,
            std_acc=std_acc,
            mean_forgetting=float(np.mean(deltas)) if deltas else None,
            global_mean_acc=global_mean_acc,
        ),
    )


def mean_forgetting_over(records: Sequence[RoundRecord], first_round: int = 1,
                         last_round: Optional[int] = None) -> Optional[float]:
    """Average of the per-round mean forgetting over an inclusive round window."""
    values = [
        r.aggregates.mean_forgetting
        for r in records
        if r.round >= first_round
        and (last_round is None or r.round <= last_round)
        and r.aggregates.mean_forgetting is not None
    ]
    return float(np.mean(values)) if values else None
