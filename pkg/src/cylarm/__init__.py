"""Expose submodules."""

from cylarm import const, control, dynamics, netapprox, report, sim
from cylarm.config import WorkbenchConfig, default_config, load_config
from cylarm.const import ControllerKind, PlantModel
from cylarm.control import PdGains, SmcGains
from cylarm.dynamics import JointState, ManipulatorParams
from cylarm.exceptions import (
    EmptyTrace,
    InvalidConfig,
    NonFinite,
    OutputError,
    SimulationAborted,
    SingularInertia,
    WorkbenchError,
)
from cylarm.netapprox import NetApproximator, NetConfig
from cylarm.sim import ScenarioSpec, SimTrace, run_scenario, standard_scenarios

__all__ = [
    "ControllerKind",
    "EmptyTrace",
    "InvalidConfig",
    "JointState",
    "ManipulatorParams",
    "NetApproximator",
    "NetConfig",
    "NonFinite",
    "OutputError",
    "PdGains",
    "PlantModel",
    "ScenarioSpec",
    "SimTrace",
    "SimulationAborted",
    "SingularInertia",
    "SmcGains",
    "WorkbenchConfig",
    "WorkbenchError",
    "const",
    "control",
    "default_config",
    "dynamics",
    "load_config",
    "netapprox",
    "report",
    "run_scenario",
    "sim",
    "standard_scenarios",
]
