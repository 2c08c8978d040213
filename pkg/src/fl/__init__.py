"""Federated round loop, client/server state and local-update strategies."""

from src.fl.engine import aggregate, run_experiment, run_round, sample_clients
from src.fl.state import ClientState, ServerState
from src.fl.strategies import AnnealSchedule, StrategyKind, StrategySpec, anneal_lambda

__all__ = [
    'AnnealSchedule',
    'ClientState',
    'ServerState',
    'StrategyKind',
    'StrategySpec',
    'aggregate',
    'anneal_lambda',
    'run_experiment',
    'run_round',
    'sample_clients',
]
