"""Pre-allocation offloading simulator: vehicles bid for edge CPU, an energy-harvesting server prices it."""
from .model import SimParams, SimulationFault, TaskSpec, VehicleState
from .game import ConfigError, MetricsSeries, World, make_world, run_horizon, run_slot

__all__ = ["SimParams", "SimulationFault", "TaskSpec", "VehicleState", "ConfigError", "MetricsSeries", "World",
           "make_world", "run_horizon", "run_slot"]
__version__ = "0.1.0"
