"""Parameter containers for the dense network and its optimizer.

A ``DenseMatrix`` is a 2-D, C-contiguous ``float64`` numpy array. Biases are
stored as ``1 x out`` matrices so every parameter shares the same container.
"""

from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from src.utils.errors import InvalidArgumentError, ShapeError


DenseMatrix = npt.NDArray[np.float64]
Layer = Tuple[DenseMatrix, DenseMatrix]


def as_matrix(values: npt.ArrayLike) -> DenseMatrix:
    """Coerce array-like input into a 2-D float64 matrix."""
    matrix = np.ascontiguousarray(values, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.ndim != 2:
        raise ShapeError("matrix rank", 2, matrix.ndim)
    return matrix


@dataclass
class ModelParams:
    """Ordered (weight, bias) pairs of a rectifier MLP.

    Weights are ``in x out``; biases are ``1 x out``. The last layer emits raw
    logits.
    """

    layers: List[Layer]

    def __post_init__(self) -> None:
        if not self.layers:
            raise InvalidArgumentError("ModelParams needs at least one layer")
        checked: List[Layer] = []
        for index, (weight, bias) in enumerate(self.layers):
            weight = as_matrix(weight)
            bias = as_matrix(bias)
            if bias.shape != (1, weight.shape[1]):
                raise ShapeError(f"layer {index} bias shape", (1, weight.shape[1]), bias.shape)
            if checked and checked[-1][0].shape[1] != weight.shape[0]:
                raise ShapeError(
                    f"layer {index} input dim", checked[-1][0].shape[1], weight.shape[0]
                )
            checked.append((weight, bias))
        self.layers = checked

    def __iter__(self) -> Iterator[Layer]:
        return iter(self.layers)

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[1]

    @property
    def shapes(self) -> List[Tuple[Tuple[int, int], Tuple[int, int]]]:
        return [(w.shape, b.shape) for w, b in self.layers]

    @property
    def num_parameters(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)

    def parameters(self) -> Iterator[DenseMatrix]:
        """Yield every parameter matrix in canonical order (W0, b0, W1, b1, ...)."""
        for weight, bias in self.layers:
            yield weight
            yield bias

    def copy(self) -> "ModelParams":
        return ModelParams([(w.copy(), b.copy()) for w, b in self.layers])

    def zeros_like(self) -> "ModelParams":
        return ModelParams([(np.zeros_like(w), np.zeros_like(b)) for w, b in self.layers])

    def check_compatible(self, other: "ModelParams", what: str = "model") -> None:
        """Raise ShapeError unless ``other`` has exactly the same parameter shapes."""
        if self.shapes != other.shapes:
            raise ShapeError(f"{what} parameter shapes", self.shapes, other.shapes)

    def is_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.parameters())

    def flatten(self) -> npt.NDArray[np.float64]:
        """Concatenate all parameters into one vector."""
        return np.concatenate([p.ravel() for p in self.parameters()])

    def unflatten(self, vector: npt.ArrayLike) -> "ModelParams":
        """Build a model with this model's shapes from a flat vector."""
        flat = np.asarray(vector, dtype=np.float64)
        if flat.ndim != 1 or flat.size != self.num_parameters:
            raise ShapeError("flat parameter vector length", self.num_parameters, flat.shape)
        layers: List[Layer] = []
        offset = 0
        for weight, bias in self.layers:
            w = flat[offset:offset + weight.size].reshape(weight.shape).copy()
            offset += weight.size
            b = flat[offset:offset + bias.size].reshape(bias.shape).copy()
            offset += bias.size
            layers.append((w, b))
        return ModelParams(layers)


def init_mlp(sizes: Sequence[int], seed: int) -> ModelParams:
    """He-normal weights and zero biases for an MLP with the given layer sizes.

    Args:
        sizes: Layer widths including input and output, e.g. ``[20, 64, 10]``
        seed: Seed for the weight draw

    Returns:
        Freshly initialized model
    """
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise InvalidArgumentError(f"MLP sizes must have >= 2 positive entries, got {list(sizes)}")
    rng = np.random.default_rng(seed)
    layers: List[Layer] = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weight = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        layers.append((weight, np.zeros((1, fan_out))))
    return ModelParams(layers)


@dataclass
class SgdState:
    """Momentum SGD hyperparameters plus per-parameter momentum buffers."""

    lr: float
    momentum: float = 0.0
    weight_decay: float = 0.0
    buffers: List[DenseMatrix] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise InvalidArgumentError(f"lr must be non-negative, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidArgumentError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise InvalidArgumentError(f"weight_decay must be non-negative, got {self.weight_decay}")

    @classmethod
    def for_model(cls, model: ModelParams, lr: float, momentum: float = 0.0,
                  weight_decay: float = 0.0) -> "SgdState":
        state = cls(lr=lr, momentum=momentum, weight_decay=weight_decay)
        state.reset(model)
        return state

    def reset(self, model: ModelParams) -> None:
        """Zero the momentum buffers, shaped like ``model``."""
        self.buffers = [np.zeros_like(p) for p in model.parameters()]
