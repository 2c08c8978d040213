"""Dense network forward/backward pass and distillation losses.

All functions are pure apart from the explicit outputs they return. Gradients
are analytic; there is no autodiff graph.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from src.nn.params import DenseMatrix, ModelParams, as_matrix
from src.utils.errors import InvalidArgumentError, ShapeError


PROB_FLOOR = 1e-12

KL_TEACHER_STUDENT = "teacher_student"
KL_STUDENT_TEACHER = "student_teacher"
KL_DIRECTIONS = (KL_TEACHER_STUDENT, KL_STUDENT_TEACHER)

Labels = npt.NDArray[np.int64]


@dataclass
class ForwardTrace:
    """Everything the backward pass needs from a forward pass.

    ``inputs[i]`` is the input to layer ``i``; ``pre_activations[i]`` is that
    layer's affine output. The last pre-activation is the logits matrix.
    """

    inputs: List[DenseMatrix]
    pre_activations: List[DenseMatrix]

    @property
    def logits(self) -> DenseMatrix:
        return self.pre_activations[-1]


def temp_softmax(logits: npt.ArrayLike, tau: float = 1.0) -> DenseMatrix:
    """Row-wise softmax of ``logits / tau`` with max-subtraction."""
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")
    scaled = as_matrix(logits) / tau
    shifted = scaled - scaled.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _check_labels(labels: npt.ArrayLike, batch: int, num_classes: int) -> Labels:
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.shape[0] != batch:
        raise ShapeError("label count", batch, y.shape[0])
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise InvalidArgumentError(f"labels must lie in [0, {num_classes}), got range [{y.min()}, {y.max()}]")
    return y


def forward(model: ModelParams, batch: npt.ArrayLike) -> ForwardTrace:
    """Run the MLP on ``batch`` (rectifier between layers, raw logits out)."""
    x = as_matrix(batch)
    if x.shape[1] != model.in_dim:
        raise ShapeError("batch columns vs first-layer input dim", model.in_dim, x.shape[1])

    inputs: List[DenseMatrix] = []
    pre_activations: List[DenseMatrix] = []
    activation = x
    last = len(model) - 1
    for index, (weight, bias) in enumerate(model):
        inputs.append(activation)
        z = activation @ weight + bias
        pre_activations.append(z)
        if index < last:
            activation = np.maximum(z, 0.0)
    return ForwardTrace(inputs=inputs, pre_activations=pre_activations)


def backward(model: ModelParams, trace: ForwardTrace, grad_logits: DenseMatrix) -> ModelParams:
    """Backpropagate ``dL/dlogits`` through the network."""
    grads = []
    delta = grad_logits
    for index in range(len(model) - 1, -1, -1):
        weight, _ = model.layers[index]
        grad_w = trace.inputs[index].T @ delta
        grad_b = delta.sum(axis=0, keepdims=True)
        grads.append((grad_w, grad_b))
        if index > 0:
            delta = (delta @ weight.T) * (trace.pre_activations[index - 1] > 0.0)
    grads.reverse()
    return ModelParams(grads)


def ce_loss(probs: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """Mean negative log-likelihood of ``labels`` under row-stochastic ``probs``."""
    p = as_matrix(probs)
    y = _check_labels(labels, p.shape[0], p.shape[1])
    picked = np.maximum(p[np.arange(p.shape[0]), y], PROB_FLOOR)
    return float(-np.log(picked).mean())


def _xlogy_ratio(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    """Elementwise ``a * (log a - log b)`` with ``0 * log 0 := 0`` and ``b`` floored."""
    positive = a > 0.0
    log_a = np.log(np.where(positive, a, 1.0))
    log_b = np.log(np.maximum(b, PROB_FLOOR))
    return np.where(positive, a * (log_a - log_b), 0.0)


def kl_loss(teacher_probs: npt.ArrayLike, student_probs: npt.ArrayLike,
            direction: str = KL_TEACHER_STUDENT) -> float:
    """Batch-mean KL divergence between two row-stochastic matrices.

    ``direction="teacher_student"`` computes KL(teacher || student), the
    default; ``"student_teacher"`` computes KL(student || teacher).
    """
    t = as_matrix(teacher_probs)
    s = as_matrix(student_probs)
    if t.shape != s.shape:
        raise ShapeError("teacher vs student probability shape", t.shape, s.shape)
    if direction == KL_TEACHER_STUDENT:
        terms = _xlogy_ratio(t, s)
    elif direction == KL_STUDENT_TEACHER:
        terms = _xlogy_ratio(s, t)
    else:
        raise InvalidArgumentError(f"unknown KL direction '{direction}', expected one of {KL_DIRECTIONS}")
    return float(terms.sum(axis=1).mean())


def _kl_grad_logits(teacher: DenseMatrix, student: DenseMatrix, tau: float,
                    direction: str) -> DenseMatrix:
    """Gradient of the batch-mean KL w.r.t. student logits (student = softmax(z / tau))."""
    batch = student.shape[0]
    if direction == KL_TEACHER_STUDENT:
        return (student - teacher) / (tau * batch)
    log_ratio = np.log(np.maximum(student, PROB_FLOOR)) - np.log(np.maximum(teacher, PROB_FLOOR))
    row_kl = (student * log_ratio).sum(axis=1, keepdims=True)
    return student * (log_ratio - row_kl) / (tau * batch)


def combined_loss_backward(
    model: ModelParams,
    batch: npt.ArrayLike,
    labels: npt.ArrayLike,
    teachers: Sequence[ModelParams] = (),
    lam: float = 0.0,
    tau: float = 1.0,
    kl_direction: str = KL_TEACHER_STUDENT,
    tau_squared: bool = False,
) -> Tuple[float, ModelParams]:
    """Loss and exact gradients of CE plus weighted teacher KL terms.

    ``loss = CE(softmax(z), y) + lam * sum_t KL(softmax(z_t / tau) || softmax(z / tau))``

    Teachers are frozen: only their outputs are used. With no teachers or
    ``lam == 0`` the KL branch is skipped entirely, so the result is exactly the
    plain cross-entropy loss and gradient.

    Args:
        model: Student parameters
        batch: ``batch x in`` features
        labels: Hard class indices
        teachers: Zero or more teacher models with the student's in/out dims
        lam: Weight of each KL term
        tau: Distillation temperature for the KL terms (CE uses temperature 1)
        kl_direction: Argument order of the KL terms
        tau_squared: Multiply the KL terms by ``tau**2``

    Returns:
        Tuple of (loss, grads) where grads has the model's shapes
    """
    if lam < 0:
        raise InvalidArgumentError(f"lambda must be non-negative, got {lam}")
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")
    if kl_direction not in KL_DIRECTIONS:
        raise InvalidArgumentError(f"unknown KL direction '{kl_direction}', expected one of {KL_DIRECTIONS}")

    x = as_matrix(batch)
    trace = forward(model, x)
    logits = trace.logits
    n = logits.shape[0]
    y = _check_labels(labels, n, logits.shape[1])

    probs = temp_softmax(logits, 1.0)
    loss = ce_loss(probs, y)
    grad_logits = probs.copy()
    grad_logits[np.arange(n), y] -= 1.0
    grad_logits /= n

    if teachers and lam != 0.0:
        weight = lam * tau * tau if tau_squared else lam
        student_soft = temp_softmax(logits, tau)
        for index, teacher in enumerate(teachers):
            if teacher.in_dim != model.in_dim or teacher.out_dim != model.out_dim:
                raise ShapeError(
                    f"teacher {index} (in, out) dims",
                    (model.in_dim, model.out_dim),
                    (teacher.in_dim, teacher.out_dim),
                )
            teacher_soft = temp_softmax(forward(teacher, x).logits, tau)
            loss += weight * kl_loss(teacher_soft, student_soft, kl_direction)
            grad_logits = grad_logits + weight * _kl_grad_logits(teacher_soft, student_soft, tau, kl_direction)

    return loss, backward(model, trace, grad_logits)


def proximal_loss_backward(model: ModelParams, reference: ModelParams, mu: float) -> Tuple[float, ModelParams]:
    """``(mu / 2) * ||w - w_ref||^2`` and its gradient ``mu * (w - w_ref)``."""
    model.check_compatible(reference, "proximal reference")
    loss = 0.0
    grads = []
    for (w, b), (rw, rb) in zip(model, reference):
        dw, db = w - rw, b - rb
        loss += float((dw * dw).sum() + (db * db).sum())
        grads.append((mu * dw, mu * db))
    return 0.5 * mu * loss, ModelParams(grads)


def predict(model: ModelParams, batch: npt.ArrayLike) -> Labels:
    """Argmax class per row; ties go to the lowest class index."""
    return np.argmax(forward(model, batch).logits, axis=1)


def accuracy(model: ModelParams, batch: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """Fraction of rows whose argmax logit equals the label."""
    x = as_matrix(batch) if np.size(batch) else None
    if x is None or x.shape[0] == 0:
        raise InvalidArgumentError("accuracy needs a non-empty batch")
    y = _check_labels(labels, x.shape[0], model.out_dim)
    return float((predict(model, x) == y).mean())


def evaluate_or_none(model: ModelParams, batch: npt.ArrayLike, labels: npt.ArrayLike) -> Optional[float]:
    """Accuracy, or None when there is nothing to evaluate on."""
    if np.size(labels) == 0:
        return None
    return accuracy(model, batch, labels)
