"""Local-update rules: FedAvg, FedProx, pFedSD and FedCKD.

Each rule trains ``client.local_model`` in place for a number of epochs of
mini-batch momentum SGD and returns it; the mean training loss of the last
epoch is left in ``client.train_loss``. The rules differ only in the loss:

* FedAvg: cross-entropy.
* FedProx: cross-entropy plus ``(mu / 2) * ||w - w_g||^2``.
* pFedSD: cross-entropy plus ``lambda * KL`` against the historical model.
* FedCKD: cross-entropy plus ``lambda_t * KL`` against the global model and
  against the historical model, with ``lambda_t`` annealed per round.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.fl.state import ClientState
from src.nn.core import KL_TEACHER_STUDENT, combined_loss_backward, proximal_loss_backward
from src.nn.optim import sgd_step
from src.nn.params import DenseMatrix, ModelParams
from src.utils.errors import InvalidArgumentError
from src.utils.logger import log_debug


LossFn = Callable[[ModelParams, DenseMatrix, np.ndarray], Tuple[float, ModelParams]]


class StrategyKind(str, Enum):
    """Federated training strategies."""
    FEDAVG = "fedavg"
    FEDPROX = "fedprox"
    PFEDSD = "pfedsd"
    FEDCKD = "fedckd"

    @property
    def is_personalized(self) -> bool:
        """Whether clients are judged by their own stored models."""
        return self in (StrategyKind.PFEDSD, StrategyKind.FEDCKD)


@dataclass(frozen=True)
class AnnealSchedule:
    """Exponential decay of the distillation weight per global round."""

    lambda0: float
    gamma: float = 1.0
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.lambda0 < 0:
            raise InvalidArgumentError(f"lambda0 must be non-negative, got {self.lambda0}")
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidArgumentError(f"gamma must lie in (0, 1], got {self.gamma}")


def _power(base: float, exponent: int) -> float:
    """``base ** exponent`` by repeated squaring."""
    result = 1.0
    while exponent > 0:
        if exponent & 1:
            result *= base
        base *= base
        exponent >>= 1
    return result


def anneal_lambda(sched: AnnealSchedule, round_t: int) -> float:
    """``lambda0 * gamma ** round_t`` when enabled, else ``lambda0``."""
    if round_t < 0:
        raise InvalidArgumentError(f"round must be non-negative, got {round_t}")
    if not sched.enabled:
        return sched.lambda0
    return sched.lambda0 * _power(sched.gamma, round_t)


@dataclass(frozen=True)
class DistillOptions:
    """Knobs shared by the distillation strategies."""

    tau: float = 3.0
    kl_direction: str = KL_TEACHER_STUDENT
    tau_squared: bool = False


def _train(client: ClientState, epochs: int, batch_size: int, loss_fn: LossFn) -> ModelParams:
    """Run ``epochs`` shuffled mini-batch passes over the client's train split."""
    if client.train_y.size == 0:
        raise InvalidArgumentError(f"client {client.id} has no training samples")
    if batch_size < 1:
        raise InvalidArgumentError(f"batch_size must be >= 1, got {batch_size}")

    model = client.local_model
    if client.reset_momentum:
        client.optimizer.reset(model)
    n = client.train_y.shape[0]
    losses: List[float] = []
    for epoch in range(epochs):
        order = client.rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            picked = order[start:start + batch_size]
            loss, grads = loss_fn(model, client.train_x[picked], client.train_y[picked])
            sgd_step(model, grads, client.optimizer)
            losses.append(loss)
        log_debug(f"client {client.id} epoch {epoch + 1}/{epochs} loss {np.mean(losses):.6f}")
    client.train_loss = float(np.mean(losses)) if losses else 0.0
    return model


def local_update_fedavg(client: ClientState, epochs: int, batch_size: int) -> ModelParams:
    """Plain cross-entropy SGD."""
    return _train(client, epochs, batch_size, lambda m, x, y: combined_loss_backward(m, x, y))


def local_update_fedprox(client: ClientState, global_ref: ModelParams, mu: float,
                         epochs: int, batch_size: int) -> ModelParams:
    """Cross-entropy SGD with a proximal pull toward ``global_ref``."""
    if mu < 0:
        raise InvalidArgumentError(f"mu must be non-negative, got {mu}")
    if mu == 0:
        return local_update_fedavg(client, epochs, batch_size)

    def loss_fn(model: ModelParams, x: DenseMatrix, y: np.ndarray) -> Tuple[float, ModelParams]:
        return fedprox_loss_backward(model, x, y, global_ref, mu)

    return _train(client, epochs, batch_size, loss_fn)


def fedprox_loss_backward(model: ModelParams, x: DenseMatrix, y: np.ndarray,
                          global_ref: ModelParams, mu: float) -> Tuple[float, ModelParams]:
    """Cross-entropy plus proximal term, with gradients."""
    ce, grads = combined_loss_backward(model, x, y)
    prox, prox_grads = proximal_loss_backward(model, global_ref, mu)
    summed = [(gw + pw, gb + pb) for (gw, gb), (pw, pb) in zip(grads, prox_grads)]
    return ce + prox, ModelParams(summed)


def _with_tau(options: Optional[DistillOptions], tau: float) -> DistillOptions:
    return replace(options, tau=tau) if options is not None else DistillOptions(tau=tau)


def _distill(client: ClientState, teachers: List[ModelParams], lam: float,
             epochs: int, batch_size: int, options: DistillOptions) -> ModelParams:
    def loss_fn(model: ModelParams, x: DenseMatrix, y: np.ndarray) -> Tuple[float, ModelParams]:
        return combined_loss_backward(
            model, x, y, teachers, lam, options.tau,
            kl_direction=options.kl_direction, tau_squared=options.tau_squared,
        )

    return _train(client, epochs, batch_size, loss_fn)


def local_update_pfedsd(client: ClientState, epochs: int, batch_size: int, lam: float,
                        tau: float, options: Optional[DistillOptions] = None) -> ModelParams:
    """Self-distillation from the client's historical model.

    Without a historical model (first participation) this is FedAvg.
    """
    teachers = [client.historical_model] if client.historical_model is not None else []
    return _distill(client, teachers, lam, epochs, batch_size, _with_tau(options, tau))


def local_update_fedckd(client: ClientState, global_ref: ModelParams, epochs: int, batch_size: int,
                        lambda_t: float, tau: float, options: Optional[DistillOptions] = None,
                        use_global_teacher: bool = True) -> ModelParams:
    """Dual-teacher distillation from the global and historical models.

    The historical teacher is dropped on a client's first participation; the
    global teacher can be switched off, which reduces this rule to pFedSD.
    """
    teachers: List[ModelParams] = []
    if use_global_teacher:
        teachers.append(global_ref)
    if client.historical_model is not None:
        teachers.append(client.historical_model)
    return _distill(client, teachers, lambda_t, epochs, batch_size, _with_tau(options, tau))


@dataclass(frozen=True)
class StrategySpec:
    """A strategy together with its hyperparameters."""

    kind: StrategyKind
    mu: float = 0.01
    lambda0: float = 0.5
    tau: float = 3.0
    gamma: float = 0.99
    annealing: bool = True
    use_global_teacher: bool = True
    kl_direction: str = KL_TEACHER_STUDENT
    tau_squared: bool = False

    def __post_init__(self) -> None:
        if self.mu < 0:
            raise InvalidArgumentError(f"mu must be non-negative, got {self.mu}")
        if not self.tau > 0:
            raise InvalidArgumentError(f"tau must be positive, got {self.tau}")
        AnnealSchedule(self.lambda0, self.gamma, self.annealing)

    @property
    def schedule(self) -> AnnealSchedule:
        return AnnealSchedule(self.lambda0, self.gamma, self.annealing)

    @property
    def options(self) -> DistillOptions:
        return DistillOptions(self.tau, self.kl_direction, self.tau_squared)

    def lambda_at(self, round_t: int) -> float:
        """Distillation weight used in round ``round_t`` (0 for non-KD strategies)."""
        if self.kind is StrategyKind.FEDCKD:
            return anneal_lambda(self.schedule, round_t)
        if self.kind is StrategyKind.PFEDSD:
            return self.lambda0
        return 0.0


def local_update(spec: StrategySpec, client: ClientState, global_ref: ModelParams,
                 round_t: int, epochs: int, batch_size: int) -> ModelParams:
    """Dispatch one client's local training to the configured rule."""
    if spec.kind is StrategyKind.FEDAVG:
        return local_update_fedavg(client, epochs, batch_size)
    if spec.kind is StrategyKind.FEDPROX:
        return local_update_fedprox(client, global_ref, spec.mu, epochs, batch_size)
    lam = spec.lambda_at(round_t)
    if spec.kind is StrategyKind.PFEDSD:
        return local_update_pfedsd(client, epochs, batch_size, lam, spec.tau, spec.options)
    return local_update_fedckd(client, global_ref, epochs, batch_size, lam, spec.tau,
                               spec.options, spec.use_global_teacher)
