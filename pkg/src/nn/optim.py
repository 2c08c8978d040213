"""Momentum SGD with weight decay."""

from src.nn.params import ModelParams, SgdState
from src.utils.errors import ShapeError


def sgd_step(model: ModelParams, grads: ModelParams, state: SgdState) -> ModelParams:
    """Apply one classical-momentum SGD step in place and return ``model``.

    ``g' = g + weight_decay * w``; ``buf = momentum * buf + g'``; ``w -= lr * buf``.
    """
    model.check_compatible(grads, "gradient")
    params = list(model.parameters())
    if len(state.buffers) != len(params):
        state.reset(model)
    for index, (param, grad) in enumerate(zip(params, grads.parameters())):
        buffer = state.buffers[index]
        if buffer.shape != param.shape:
            raise ShapeError(f"momentum buffer {index} shape", param.shape, buffer.shape)
        step = grad + state.weight_decay * param if state.weight_decay else grad
        buffer *= state.momentum
        buffer += step
        param -= state.lr * buffer
    return model
