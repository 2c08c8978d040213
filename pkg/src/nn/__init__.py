"""From-scratch dense network: parameters, losses, gradients and SGD."""

from src.nn.core import (
    KL_STUDENT_TEACHER,
    KL_TEACHER_STUDENT,
    ForwardTrace,
    accuracy,
    backward,
    ce_loss,
    combined_loss_backward,
    forward,
    kl_loss,
    proximal_loss_backward,
    temp_softmax,
)
from src.nn.optim import sgd_step
from src.nn.params import DenseMatrix, ModelParams, SgdState, init_mlp

__all__ = [
    'DenseMatrix',
    'ForwardTrace',
    'KL_STUDENT_TEACHER',
    'KL_TEACHER_STUDENT',
    'ModelParams',
    'SgdState',
    'accuracy',
    'backward',
    'ce_loss',
    'combined_loss_backward',
    'forward',
    'init_mlp',
    'kl_loss',
    'proximal_loss_backward',
    'sgd_step',
    'temp_softmax',
]
