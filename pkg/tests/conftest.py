from __future__ import annotations

from typing import Any, List, Sequence

import numpy as np
import pytest

from config.config import ExperimentConfig
from src.data.synthetic import synth_blobs
from src.fl.state import ClientState
from src.nn.params import ModelParams, SgdState


def random_model(rng: np.random.Generator, sizes: Sequence[int], scale: float = 0.5) -> ModelParams:
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        layers.append((rng.normal(0.0, scale, (fan_in, fan_out)), rng.normal(0.0, scale, (1, fan_out))))
    return ModelParams(layers)


def make_client(model: ModelParams, x: np.ndarray, y: np.ndarray, *, lr: float = 0.05,
                momentum: float = 0.0, weight_decay: float = 0.0, seed: int = 0,
                client_id: int = 0) -> ClientState:
    y = np.asarray(y, dtype=np.int64)
    local = model.copy()
    return ClientState(
        id=client_id,
        local_model=local,
        optimizer=SgdState.for_model(local, lr, momentum, weight_decay),
        train_indices=np.arange(len(y), dtype=np.int64),
        test_indices=np.empty(0, dtype=np.int64),
        train_x=np.asarray(x, dtype=np.float64),
        train_y=y,
        test_x=np.empty((0, x.shape[1])),
        test_y=np.empty(0, dtype=np.int64),
        rng=np.random.default_rng(seed),
    )


def tiny_config(**overrides: Any) -> ExperimentConfig:
    """Small synthetic experiment that runs in well under a second."""
    values = dict(
        strategy="fedavg",
        synth_num_classes=4,
        synth_per_class=30,
        synth_dim=6,
        synth_spread=0.8,
        partition="dirichlet",
        alpha=0.5,
        n_clients=4,
        rounds=3,
        epochs=1,
        batch_size=16,
        hidden_sizes=[8],
        lr=0.05,
        master_seed=7,
    )
    values.update(overrides)
    return ExperimentConfig(**values)


def assert_models_equal(a: ModelParams, b: ModelParams) -> None:
    assert a.shapes == b.shapes
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa, pb)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def blobs():
    return synth_blobs(num_classes=10, per_class=60, dim=8, spread=1.0, seed=3)


@pytest.fixture
def small_batch(rng: np.random.Generator) -> List[np.ndarray]:
    x = rng.normal(size=(4, 3))
    y = np.array([0, 1, 2, 1])
    return [x, y]
