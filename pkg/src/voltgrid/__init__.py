"""Cyber-physical Volt-Var response engine.

Subpackages cover the electrical network model and AC power flow, controller
role discovery from sensitivity matrices, a discrete-event SCADA link
simulator with DoS injection, cyber-physical telemetry fusion, the Volt-Var
MDP environment, from-scratch policy-gradient training (PPO and A2C), a
response orchestrator, and a CLI plus HTTP service.
"""

__version__ = "0.1.0"

from .cases import load_case
from .network import PowerNetwork
from .powerflow import PowerFlowSolution, solve_power_flow

__all__ = ["PowerNetwork", "PowerFlowSolution", "load_case", "solve_power_flow", "__version__"]
