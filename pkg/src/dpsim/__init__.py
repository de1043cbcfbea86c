"""Deterministic discrete-event simulator of protected data-plane operating systems.

Time is integer nanoseconds everywhere.  A single simulation run is
single-threaded and fully determined by its configuration and seed;
parameter sweeps run independent simulations in parallel.
"""

from dpsim.engine import Engine, SimulationError, SchedulingInPastError
from dpsim.costs import CostModel
from dpsim.simulate import Simulation

__all__ = [
    "Engine",
    "SimulationError",
    "SchedulingInPastError",
    "CostModel",
    "Simulation",
]
