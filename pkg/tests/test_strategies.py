from __future__ import annotations

import numpy as np
import pytest

from src.fl.strategies import (
    AnnealSchedule,
    StrategyKind,
    StrategySpec,
    anneal_lambda,
    fedprox_loss_backward,
    local_update,
    local_update_fedavg,
    local_update_fedckd,
    local_update_fedprox,
    local_update_pfedsd,
)
from src.nn.core import combined_loss_backward
from src.nn.params import ModelParams
from src.utils.errors import InvalidArgumentError
from tests.conftest import assert_models_equal, make_client, random_model
from tests.test_nn_core import FD_TOLERANCE, far_from_kinks, max_relative_error, numeric_gradient


def _toy_data(rng: np.random.Generator, n: int = 12, dim: int = 3, classes: int = 3):
    x = rng.normal(size=(n, dim))
    y = rng.integers(0, classes, size=n)
    return x, y


def _distance(a: ModelParams, b: ModelParams) -> float:
    return float(np.linalg.norm(a.flatten() - b.flatten()))


# -- annealing -------------------------------------------------------------

def test_anneal_lambda_sequence() -> None:
    sched = AnnealSchedule(lambda0=0.5, gamma=0.99)
    assert anneal_lambda(sched, 0) == 0.5
    for t in range(101):
        assert anneal_lambda(sched, t) == pytest.approx(0.5 * 0.99 ** t, rel=1e-14)
    assert abs(anneal_lambda(sched, 50) - 0.5 * 0.99 ** 50) < 1e-12
    assert anneal_lambda(sched, 50) == pytest.approx(0.30253, abs=1e-4)


def test_anneal_lambda_is_strictly_decreasing() -> None:
    sched = AnnealSchedule(lambda0=0.5, gamma=0.9)
    values = [anneal_lambda(sched, t) for t in range(60)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_anneal_lambda_without_decay() -> None:
    assert anneal_lambda(AnnealSchedule(0.5, gamma=1.0), 77) == 0.5
    assert anneal_lambda(AnnealSchedule(0.5, gamma=0.5, enabled=False), 77) == 0.5


@pytest.mark.parametrize("lambda0,gamma", [(-0.1, 0.9), (0.5, 0.0), (0.5, 1.5)])
def test_anneal_schedule_validation(lambda0: float, gamma: float) -> None:
    with pytest.raises(InvalidArgumentError):
        AnnealSchedule(lambda0, gamma)


def test_strategy_spec_lambda_per_kind() -> None:
    assert StrategySpec(StrategyKind.FEDCKD, lambda0=0.5, gamma=0.99).lambda_at(2) == pytest.approx(0.5 * 0.99 ** 2)
    assert StrategySpec(StrategyKind.PFEDSD, lambda0=0.5, gamma=0.99).lambda_at(2) == 0.5
    assert StrategySpec(StrategyKind.FEDAVG).lambda_at(2) == 0.0
    assert StrategySpec(StrategyKind.FEDPROX).lambda_at(2) == 0.0


def test_strategy_spec_validation() -> None:
    with pytest.raises(InvalidArgumentError):
        StrategySpec(StrategyKind.FEDPROX, mu=-1.0)
    with pytest.raises(InvalidArgumentError):
        StrategySpec(StrategyKind.FEDCKD, tau=0.0)


def test_personalized_kinds() -> None:
    assert StrategyKind.FEDCKD.is_personalized and StrategyKind.PFEDSD.is_personalized
    assert not StrategyKind.FEDAVG.is_personalized and not StrategyKind.FEDPROX.is_personalized


# -- FedAvg ----------------------------------------------------------------

def test_fedavg_zero_lr_leaves_model_unchanged(rng: np.random.Generator) -> None:
    x, y = _toy_data(rng)
    model = random_model(rng, [3, 5, 3])
    client = make_client(model, x, y, lr=0.0, momentum=0.9)
    local_update_fedavg(client, epochs=3, batch_size=4)
    assert_models_equal(client.local_model, model)


def test_fedavg_single_sample_step_matches_hand_update(rng: np.random.Generator) -> None:
    x, y = _toy_data(rng, n=1)
    model = random_model(rng, [3, 4, 3])
    _, grads = combined_loss_backward(model, x, y)
    expected = model.flatten() - 0.1 * grads.flatten()

    client = make_client(model, x, y, lr=0.1)
    local_update_fedavg(client, epochs=1, batch_size=1)
    assert np.allclose(client.local_model.flatten(), expected, rtol=0, atol=1e-15)


def test_fedavg_descends_on_convex_toy(rng: np.random.Generator) -> None:
    x, y = _toy_data(rng, n=16)
    model = random_model(rng, [3, 3])
    before = combined_loss_backward(model, x, y)[0]
    client = make_client(model, x, y, lr=0.05)
    local_update_fedavg(client, epochs=20, batch_size=16)
    assert combined_loss_backward(client.local_model, x, y)[0] <= before


def test_fedavg_records_last_epoch_loss(rng: np.random.Generator) -> None:
    x, y = _toy_data(rng)
    client = make_client(random_model(rng, [3, 5, 3]), x, y)
    local_update_fedavg(client, epochs=2, batch_size=4)
    assert client.train_loss > 0.0


def test_zero_epochs_leaves_model_unchanged(rng: np.random.Generator) -> None:
    x, y = _toy_data(rng)
    model = random_model(rng, [3, 5, 3])
    client = make_client(model, x, y)
    local_update_fedavg(client, epochs=0, batch_size=4)
    assert_models_equal(client.local_model, model)
    assert client.train_loss == 0.0


def test_local_update_rejects_empty_training_set(rng: np.random.Generator) -> None:
    client = make_client(random_model(rng, [3, 3]), np.empty((0, 3)), np.empty(0))
    with pytest.raises(InvalidArgumentError):
        local_update_fedavg(client, epochs=1, batch_size=4)


# -- degenerations ---------------------------------------------------------

def _pair(rng: np.random.Generator, seed: int = 3):
    x, y = _toy_data(rng)
    model = random_model(rng, [3, 5, 3])
    return (make_client(model, x, y, momentum=0.9, seed=seed),
            make_client(model, x, y, momentum=0.9, seed=seed), model)


def test_fedprox_with_zero_mu_is_fedavg(rng: np.random.Generator) -> None:
    a, b, model = _pair(rng)
    local_update_fedavg(a, epochs=2, batch_size=4)
    local_update_fedprox(b, model, mu=0.0, epochs=2, batch_size=4)
    assert_models_equal(a.local_model, b.local_model)
    assert a.train_loss == b.train_loss


def test_pfedsd_without_history_is_fedavg(rng: np.random.Generator) -> None:
    a, b, _ = _pair(rng)
    local_update_fedavg(a, epochs=2, batch_size=4)
    local_update_pfedsd(b, epochs=2, batch_size=4, lam=0.5, tau=3.0)
    assert_models_equal(a.local_model, b.local_model)


def test_pfedsd_with_zero_lambda_is_fedavg(rng: np.random.Generator) -> None:
    a, b, _ = _pair(rng)
    b.historical_model = random_model(rng, [3, 5, 3])
    local_update_fedavg(a, epochs=2, batch_size=4)
    local_update_pfedsd(b, epochs=2, batch_size=4, lam=0.0, tau=3.0)
    assert_models_equal(a.local_model, b.local_model)


def test_fedckd_with_zero_lambda_is_fedavg(rng: np.random.Generator) -> None:
    a, b, _ = _pair(rng)
    b.historical_model = random_model(rng, [3, 5, 3])
    local_update_fedavg(a, epochs=2, batch_size=4)
    local_update_fedckd(b, random_model(rng, [3, 5, 3]), epochs=2, batch_size=4, lambda_t=0.0, tau=3.0)
    assert_models_equal(a.local_model, b.local_model)
    assert a.train_loss == b.train_loss


def test_fedckd_without_global_teacher_is_pfedsd(rng: np.random.Generator) -> None:
    a, b, _ = _pair(rng)
    history = random_model(rng, [3, 5, 3])
    a.historical_model = history
    b.historical_model = history
    local_update_pfedsd(a, epochs=2, batch_size=4, lam=0.5, tau=3.0)
    local_update_fedckd(b, random_model(rng, [3, 5, 3]), epochs=2, batch_size=4, lambda_t=0.5,
                        tau=3.0, use_global_teacher=False)
    assert_models_equal(a.local_model, b.local_model)


def test_fedckd_without_history_uses_global_teacher_only(rng: np.random.Generator) -> None:
    a, b, _ = _pair(rng)
    global_ref = random_model(rng, [3, 5, 3])
    local_update_fedckd(a, global_ref, epochs=1, batch_size=4, lambda_t=0.5, tau=3.0)

    # pFedSD with the global model as its only teacher trains identically
    b.historical_model = global_ref
    local_update_pfedsd(b, epochs=1, batch_size=4, lam=0.5, tau=3.0)
    assert_models_equal(a.local_model, b.local_model)


def test_teachers_equal_to_student_give_ce_first_step(rng: np.random.Generator) -> None:
    x, y = _toy_data(rng, n=4)
    model = random_model(rng, [3, 5, 3])

    plain = make_client(model, x, y)
    local_update_fedavg(plain, epochs=1, batch_size=4)

    self_distilled = make_client(model, x, y)
    self_distilled.historical_model = model.copy()
    local_update_pfedsd(self_distilled, epochs=1, batch_size=4, lam=0.5, tau=3.0)

    dual = make_client(model, x, y)
    dual.historical_model = model.copy()
    local_update_fedckd(dual, model.copy(), epochs=1, batch_size=4, lambda_t=0.5, tau=3.0)

    assert np.allclose(self_distilled.local_model.flatten(), plain.local_model.flatten(), rtol=0, atol=1e-15)
    assert np.allclose(dual.local_model.flatten(), plain.local_model.flatten(), rtol=0, atol=1e-15)


def test_teachers_are_not_modified(rng: np.random.Generator) -> None:
    x, y = _toy_data(rng)
    client = make_client(random_model(rng, [3, 5, 3]), x, y)
    history = random_model(rng, [3, 5, 3])
    global_ref = random_model(rng, [3, 5, 3])
    client.historical_model = history
    snapshot = (history.copy(), global_ref.copy())
    local_update_fedckd(client, global_ref, epochs=2, batch_size=4, lambda_t=0.5, tau=3.0)
    assert_models_equal(history, snapshot[0])
    assert_models_equal(global_ref, snapshot[1])


# -- FedProx ---------------------------------------------------------------

def test_fedprox_gradient_check(rng: np.random.Generator) -> None:
    while True:
        model = random_model(rng, [3, 5, 3])
        x, y = _toy_data(rng, n=4)
        if far_from_kinks(model, x):
            break
    global_ref = random_model(rng, [3, 5, 3])

    def loss_of(m: ModelParams) -> float:
        return fedprox_loss_backward(m, x, y, global_ref, 0.3)[0]

    _, grads = fedprox_loss_backward(model, x, y, global_ref, 0.3)
    assert max_relative_error(grads.flatten(), numeric_gradient(model, loss_of)) < FD_TOLERANCE


def test_fedprox_large_mu_pins_model_to_global(rng: np.random.Generator) -> None:
    x, y = _toy_data(rng, n=8)
    global_ref = random_model(rng, [3, 5, 3])
    start = random_model(rng, [3, 5, 3])
    client = make_client(start, x, y, lr=5e-7)
    local_update_fedprox(client, global_ref, mu=1e6, epochs=1, batch_size=2)
    assert _distance(client.local_model, global_ref) < 0.1 * _distance(start, global_ref)


# -- dispatch --------------------------------------------------------------

def test_local_update_dispatches_by_kind(rng: np.random.Generator) -> None:
    x, y = _toy_data(rng)
    model = random_model(rng, [3, 5, 3])
    global_ref = random_model(rng, [3, 5, 3])

    direct = make_client(model, x, y, seed=1)
    direct.historical_model = global_ref
    local_update_fedckd(direct, global_ref, epochs=1, batch_size=4, lambda_t=0.5 * 0.99 ** 3, tau=3.0)

    dispatched = make_client(model, x, y, seed=1)
    dispatched.historical_model = global_ref
    spec = StrategySpec(StrategyKind.FEDCKD, lambda0=0.5, gamma=0.99, tau=3.0)
    local_update(spec, dispatched, global_ref, round_t=3, epochs=1, batch_size=4)

    assert np.allclose(direct.local_model.flatten(), dispatched.local_model.flatten(), rtol=0, atol=1e-14)
