"""Discrete-event MapReduce simulator comparing speculation policies under faults."""

from .experiment import run_policy
from .scenario import Scenario, ScenarioError
from .simulation import Simulation

__all__ = ["Scenario", "ScenarioError", "Simulation", "run_policy"]
