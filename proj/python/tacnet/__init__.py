"""Tactical network congestion-control simulator."""

from ._core import (
    Env,
    Error,
    Scenario,
    Server,
    compute_reward,
    compute_rti,
    ideal_fair_time,
    scenario,
    scenario_with_loss,
)
from .client import RemoteEnv, RemoteEnvError, connect

__all__ = [
    "Env",
    "Error",
    "RemoteEnv",
    "RemoteEnvError",
    "Scenario",
    "Server",
    "compute_reward",
    "compute_rti",
    "connect",
    "ideal_fair_time",
    "scenario",
    "scenario_with_loss",
]
