"""Energy-aware UAV-assisted federated learning: bound, surrogates, SCA driver."""
from .scenario import (
    MB,
    DecisionState,
    FLHyperparams,
    RotorModel,
    ScenarioConfig,
    SlackReport,
    default_scenario,
)

__all__ = [
    "MB",
    "DecisionState",
    "FLHyperparams",
    "RotorModel",
    "ScenarioConfig",
    "SlackReport",
    "default_scenario",
]
__version__ = "0.1.0"
