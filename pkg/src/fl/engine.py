"""Round loop of the federated simulation.

Each round the server samples participants and broadcasts the global model.
Every participant is probed for forgetting (stored model vs. freshly
overwritten model), trains locally under the configured strategy and keeps
the trained model as its historical model. The server then aggregates the
participants' models, weighted by training-set size, into the next global
model.

Client updates of a round are independent and may run on a thread pool. All
randomness is keyed by (master seed, round, client) and aggregation always
runs in ascending client id, so results do not depend on the thread count.
"""

from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Sequence

import numpy as np

from src.data.dataset import Dataset, Partition
from src.data.idx import load_idx
from src.data.partition import (
    dirichlet_partition,
    iid_partition,
    mean_label_entropy,
    pathological_partition,
    split_train_test,
)
from src.data.synthetic import synth_blobs
from src.fl.seeding import Stream, derive_rng, derive_seed
from src.fl.state import ClientState, ServerState
from src.fl.strategies import StrategySpec, local_update
from src.metrics.evaluation import mean_and_std, summarize_round
from src.models.records import ClientRoundMetrics, FinalEvaluation, RoundRecord
from src.nn.core import evaluate_or_none
from src.nn.params import ModelParams, SgdState, init_mlp
from src.utils.errors import InvalidArgumentError
from src.utils.logger import log_debug, log_info

if TYPE_CHECKING:
    from config.config import ExperimentConfig


def participant_count(n: int, rate: float) -> int:
    """K = max(1, round(rate * n)), never more than n."""
    return min(n, max(1, int(np.floor(rate * n + 0.5))))


def sample_clients(n: int, rate: float, round_seed: int, round_index: int = 0) -> List[int]:
    """Uniformly sample K distinct client ids, returned in ascending order.

    Args:
        n: Number of clients
        rate: Participation rate in (0, 1]
        round_seed: Master seed of the experiment
        round_index: 0-based round number

    Returns:
        Sorted list of sampled client ids
    """
    if not 0.0 < rate <= 1.0:
        raise InvalidArgumentError(f"participation rate must lie in (0, 1], got {rate}")
    k = participant_count(n, rate)
    if k == n:
        return list(range(n))
    rng = derive_rng(round_seed, Stream.SAMPLE, round_index)
    return sorted(int(i) for i in rng.choice(n, size=k, replace=False))


def aggregation_weights(sizes: Sequence[int], total: Optional[int] = None) -> np.ndarray:
    """``size_k / total``; ``total`` defaults to the participants' combined size."""
    values = np.asarray(sizes, dtype=np.float64)
    denominator = float(values.sum()) if total is None else float(total)
    if denominator <= 0:
        raise InvalidArgumentError("aggregation needs a positive total size")
    return values / denominator


def aggregate(models: Sequence[ModelParams], sizes: Sequence[int], total: Optional[int] = None) -> ModelParams:
    """Size-weighted mean of client models.

    Computed as ``w_0 + sum_k p_k (w_k - w_0)`` with the weights renormalized
    over participants, which is the weighted mean and returns ``w_0`` exactly
    when all models agree. Passing ``total`` (the size of all data) gives the
    literal ``sum_k |D_k| / |D| w_k`` instead, whose weights may sum to less
    than one.
    """
    if not models:
        raise InvalidArgumentError("aggregate needs at least one model")
    if len(models) != len(sizes):
        raise InvalidArgumentError(f"{len(models)} models but {len(sizes)} sizes")
    anchor = models[0]
    for index, model in enumerate(models[1:], start=1):
        anchor.check_compatible(model, f"client model {index}")

    weights = aggregation_weights(sizes, total)
    scale = 1.0 if total is None else float(weights.sum())
    layers = []
    for layer_index, (w0, b0) in enumerate(anchor):
        acc_w = w0 * scale if scale != 1.0 else w0.copy()
        acc_b = b0 * scale if scale != 1.0 else b0.copy()
        for weight, model in zip(weights[1:], models[1:]):
            w, b = model.layers[layer_index]
            acc_w += weight * (w - w0)
            acc_b += weight * (b - b0)
        layers.append((acc_w, acc_b))
    return ModelParams(layers)


def _client_round(client: ClientState, global_model: ModelParams, spec: StrategySpec,
                  round_t: int, cfg: "ExperimentConfig") -> ClientRoundMetrics:
    pre = None
    if client.historical_model is not None:
        pre = evaluate_or_none(client.historical_model, client.test_x, client.test_y)

    client.local_model = global_model.copy()
    post = evaluate_or_none(client.local_model, client.test_x, client.test_y)

    client.rng = derive_rng(cfg.master_seed, Stream.CLIENT, round_t, client.id)
    client.lambda_current = spec.lambda_at(round_t)
    local_update(spec, client, global_model, round_t, cfg.epochs, cfg.batch_size)
    client.historical_model = client.local_model
    client.rounds_trained += 1

    trained = evaluate_or_none(client.local_model, client.test_x, client.test_y)
    log_debug(f"round {round_t + 1} client {client.id}: pre={pre} post={post} trained={trained} "
              f"loss={client.train_loss:.6f}")
    return ClientRoundMetrics(
        client_id=client.id,
        pre_update_acc=pre,
        post_update_acc=post,
        post_train_acc=trained,
        train_loss=client.train_loss,
        lambda_t=client.lambda_current,
    )


def _mean_test_accuracy(model: ModelParams, clients: Sequence[ClientState]) -> Optional[float]:
    accs = [evaluate_or_none(model, c.test_x, c.test_y) for c in clients]
    mean, _ = mean_and_std(accs)
    return mean


def run_round(server: ServerState, clients: Sequence[ClientState], cfg: "ExperimentConfig",
              executor: Optional[Executor] = None) -> RoundRecord:
    """Run one communication round, updating ``server`` and the participants.

    Args:
        server: Server state; its global model and round counter advance
        clients: All clients, indexed by id
        cfg: Experiment configuration
        executor: Optional pool for running client updates concurrently

    Returns:
        RoundRecord for this round
    """
    round_t = server.round
    spec = cfg.strategy_spec()
    participants = sample_clients(len(clients), cfg.participation_rate, cfg.master_seed, round_t)
    global_model = server.global_model

    def work(client_id: int) -> ClientRoundMetrics:
        return _client_round(clients[client_id], global_model, spec, round_t, cfg)

    if executor is not None and len(participants) > 1:
        metrics = list(executor.map(work, participants))
    else:
        metrics = [work(k) for k in participants]

    total = sum(c.num_train for c in clients) if cfg.literal_weights else None
    server.global_model = aggregate(
        [clients[k].local_model for k in participants],
        [clients[k].num_train for k in participants],
        total,
    )
    server.round += 1

    record = summarize_round(server.round, metrics, _mean_test_accuracy(server.global_model, clients))
    agg = record.aggregates
    log_info(
        f"Round {record.round}/{cfg.rounds}: {len(participants)} clients, "
        f"mean acc {_fmt(agg.mean_acc)}, global acc {_fmt(agg.global_mean_acc)}, "
        f"forgetting {_fmt(agg.mean_forgetting)}"
    )
    return record


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"


@dataclass
class ExperimentSetup:
    """Data and initial state shared by every strategy for one seed."""

    dataset: Dataset
    partition: Partition
    server: ServerState
    clients: List[ClientState]


@dataclass
class ExperimentResult:
    """Round records plus the final per-client evaluation."""

    records: List[RoundRecord]
    final: FinalEvaluation
    client_sizes: List[int]


def build_dataset(cfg: "ExperimentConfig") -> Dataset:
    if cfg.dataset == "idx":
        return load_idx(cfg.images_path, cfg.labels_path)
    return synth_blobs(cfg.synth_num_classes, cfg.synth_per_class, cfg.synth_dim,
                       cfg.synth_spread, derive_seed(cfg.master_seed, Stream.DATA))


def build_partition(ds: Dataset, cfg: "ExperimentConfig") -> Partition:
    seed = derive_seed(cfg.master_seed, Stream.PARTITION)
    if cfg.partition == "dirichlet":
        partition = dirichlet_partition(ds, cfg.n_clients, cfg.alpha, seed)
    elif cfg.partition == "pathological":
        partition = pathological_partition(ds, cfg.n_clients, cfg.shards_per_client, seed)
    else:
        partition = iid_partition(ds, cfg.n_clients, seed)
    partition.validate(len(ds))
    log_info(
        f"Partitioned {len(ds)} samples over {partition.num_clients} clients ({cfg.partition}); "
        f"mean label entropy {mean_label_entropy(partition):.4f}"
    )
    return split_train_test(partition, cfg.test_fraction, derive_seed(cfg.master_seed, Stream.SPLIT))


def prepare_experiment(cfg: "ExperimentConfig") -> ExperimentSetup:
    """Build the dataset, partition, initial global model and client states."""
    dataset = build_dataset(cfg)
    partition = build_partition(dataset, cfg)
    sizes = [dataset.dim, *cfg.hidden_sizes, dataset.num_classes]
    global_model = init_mlp(sizes, derive_seed(cfg.master_seed, Stream.INIT))

    clients = []
    for k in range(partition.num_clients):
        train_idx, test_idx = partition.train_of(k), partition.test_of(k)
        train_x, train_y = dataset.subset(train_idx)
        test_x, test_y = dataset.subset(test_idx)
        local = global_model.copy()
        clients.append(ClientState(
            id=k,
            local_model=local,
            optimizer=SgdState.for_model(local, cfg.lr, cfg.momentum, cfg.weight_decay),
            train_indices=train_idx,
            test_indices=test_idx,
            train_x=train_x,
            train_y=train_y,
            test_x=test_x,
            test_y=test_y,
            reset_momentum=cfg.reset_momentum,
        ))
    server = ServerState(global_model=global_model, round=0, rng_seed=cfg.master_seed)
    return ExperimentSetup(dataset=dataset, partition=partition, server=server, clients=clients)


def evaluate_final(server: ServerState, clients: Sequence[ClientState], spec: StrategySpec) -> FinalEvaluation:
    """Personalized and global accuracy per client; headline view by strategy."""
    personalized = [evaluate_or_none(c.personalized_model, c.test_x, c.test_y) for c in clients]
    global_view = [evaluate_or_none(server.global_model, c.test_x, c.test_y) for c in clients]
    evaluation = "personalized" if spec.kind.is_personalized else "global"
    personalized_mean, personalized_std = mean_and_std(personalized)
    global_mean, global_std = mean_and_std(global_view)
    headline = (personalized_mean, personalized_std) if evaluation == "personalized" else (global_mean, global_std)
    return FinalEvaluation(
        personalized_accs=personalized,
        global_accs=global_view,
        evaluation=evaluation,
        mean_acc=headline[0],
        std_acc=headline[1],
        personalized_mean_acc=personalized_mean,
        personalized_std_acc=personalized_std,
        global_mean_acc=global_mean,
        global_std_acc=global_std,
    )


def run_experiment(cfg: "ExperimentConfig") -> ExperimentResult:
    """Run all rounds of one experiment and evaluate every client at the end.

    Args:
        cfg: Validated experiment configuration

    Returns:
        ExperimentResult with one RoundRecord per round
    """
    spec = cfg.strategy_spec()
    setup = prepare_experiment(cfg)
    log_info(f"Running {spec.kind.value} for {cfg.rounds} rounds, seed {cfg.master_seed}")

    records: List[RoundRecord] = []
    executor = ThreadPoolExecutor(max_workers=cfg.parallel_clients) if cfg.parallel_clients > 1 else None
    try:
        for _ in range(cfg.rounds):
            records.append(run_round(setup.server, setup.clients, cfg, executor))
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    final = evaluate_final(setup.server, setup.clients, spec)
    log_info(f"Final {final.evaluation} accuracy: mean {_fmt(final.mean_acc)}, std {_fmt(final.std_acc)}")
    return ExperimentResult(
        records=records,
        final=final,
        client_sizes=[c.num_train for c in setup.clients],
    )
