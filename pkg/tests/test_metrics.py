from __future__ import annotations

import numpy as np
import pytest

from src.metrics.evaluation import (
    accuracy_difference,
    fairness_std,
    forgetting_delta,
    mean_and_std,
    mean_forgetting_over,
    summarize_round,
)
from src.models.records import ClientRoundMetrics
from src.utils.errors import InvalidArgumentError


def metrics(client_id: int, pre, post, trained, loss: float = 0.5) -> ClientRoundMetrics:
    return ClientRoundMetrics(
        client_id=client_id,
        pre_update_acc=pre,
        post_update_acc=post,
        post_train_acc=trained,
        train_loss=loss,
        lambda_t=0.0,
    )


def test_forgetting_delta() -> None:
    assert forgetting_delta(0.8, 0.5) == pytest.approx(0.3)
    assert forgetting_delta(0.7, 0.7) == 0.0
    assert forgetting_delta(0.4, 0.6) == pytest.approx(-0.2)


def test_fairness_std() -> None:
    assert fairness_std([0.5, 0.5, 0.5]) == 0.0
    assert fairness_std([0.0, 1.0]) == pytest.approx(0.5)
    assert fairness_std([0.2, 0.4, 0.6]) == pytest.approx(0.1633, abs=1e-4)


def test_fairness_std_scales_with_the_accuracies() -> None:
    accs = np.random.default_rng(5).uniform(0.0, 1.0, size=12)
    base = fairness_std(accs)
    for c in (0.5, -2.0, 3.0):
        assert fairness_std(c * accs) == pytest.approx(abs(c) * base, rel=1e-12)


def test_fairness_std_needs_two_clients() -> None:
    with pytest.raises(InvalidArgumentError):
        fairness_std([0.9])


def test_accuracy_difference() -> None:
    same = accuracy_difference([0.5, 0.6], [0.5, 0.6])
    assert same.deltas == [0.0, 0.0]
    assert same.win_fraction == 0.0

    a = [0.9] * 17 + [0.1] * 3
    b = [0.5] * 20
    assert accuracy_difference(a, b).win_fraction == pytest.approx(0.85)

    swapped = accuracy_difference([0.7, 0.3], [0.3, 0.7])
    assert swapped.deltas[0] == pytest.approx(-swapped.deltas[1])
    assert swapped.win_fraction == 0.5


def test_accuracy_difference_length_mismatch() -> None:
    with pytest.raises(InvalidArgumentError):
        accuracy_difference([0.5], [0.5, 0.6])


def test_mean_and_std_skips_missing_values() -> None:
    assert mean_and_std([None, None]) == (None, None)
    assert mean_and_std([0.4]) == (pytest.approx(0.4), 0.0)
    mean, std = mean_and_std([0.2, None, 0.6])
    assert mean == pytest.approx(0.4)
    assert std == pytest.approx(0.2)


def test_summarize_round_aggregates_participants() -> None:
    record = summarize_round(3, [
        metrics(0, 0.8, 0.5, 0.9),
        metrics(1, None, 0.4, 0.7),
        metrics(2, 0.6, 0.6, 0.5),
    ], global_mean_acc=0.55)
    assert record.round == 3
    assert record.aggregates.mean_acc == pytest.approx(0.7)
    assert record.aggregates.std_acc == pytest.approx(fairness_std([0.9, 0.7, 0.5]))
    # client 1 has no stored model yet and is left out of the forgetting mean
    assert record.aggregates.mean_forgetting == pytest.approx(0.15)
    assert record.aggregates.global_mean_acc == 0.55
    assert 0.0 <= record.aggregates.mean_acc <= 1.0


def test_mean_forgetting_over_window() -> None:
    records = [
        summarize_round(1, [metrics(0, None, 0.5, 0.6)]),
        summarize_round(2, [metrics(0, 0.6, 0.4, 0.7)]),
        summarize_round(3, [metrics(0, 0.7, 0.3, 0.8)]),
    ]
    assert mean_forgetting_over(records) == pytest.approx(0.3)
    assert mean_forgetting_over(records, first_round=3) == pytest.approx(0.4)
    assert mean_forgetting_over(records, first_round=1, last_round=1) is None
