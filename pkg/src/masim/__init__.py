"""Power minimization for movable-antenna MISO interference networks."""

from .beamforming import BeamformingSolution, mrt_beamforming, solve_p2
from .channel import ChannelState, channel_state
from .driver import AlgorithmOptions, RunResult, Scheme, run
from .experiments import SweepSpec, aggregate, run_sweep
from .scenario import Scenario, ScenarioConfig, build_scenario
from .socp import Status

__all__ = [
    "AlgorithmOptions",
    "BeamformingSolution",
    "ChannelState",
    "RunResult",
    "Scenario",
    "ScenarioConfig",
    "Scheme",
    "Status",
    "SweepSpec",
    "aggregate",
    "build_scenario",
    "channel_state",
    "mrt_beamforming",
    "run",
    "run_sweep",
    "solve_p2",
]

__version__ = "0.1.0"
