"""Client and server state for the round loop."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.data.dataset import IndexArray
from src.nn.params import DenseMatrix, ModelParams, SgdState


@dataclass
class ClientState:
    """Everything a simulated client keeps between rounds.

    ``historical_model`` is the model stored at the end of the client's last
    local training and is None until the client first trains.
    """

    id: int
    local_model: ModelParams
    optimizer: SgdState
    train_indices: IndexArray
    test_indices: IndexArray
    train_x: DenseMatrix
    train_y: np.ndarray
    test_x: DenseMatrix
    test_y: np.ndarray
    historical_model: Optional[ModelParams] = None
    lambda_current: float = 0.0
    train_loss: float = 0.0
    reset_momentum: bool = True
    rounds_trained: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    @property
    def num_train(self) -> int:
        return int(self.train_y.shape[0])

    @property
    def personalized_model(self) -> ModelParams:
        """Stored historical model, or the local model before any training."""
        return self.historical_model if self.historical_model is not None else self.local_model


@dataclass
class ServerState:
    """The global model and the number of completed rounds."""

    global_model: ModelParams
    round: int = 0
    rng_seed: int = 0
