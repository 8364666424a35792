"""Common constants."""

from __future__ import annotations

from enum import StrEnum
from typing import Any

# Special types
RawData = dict[str, Any]

N_JOINTS = 3

# Table of the cylindrical manipulator (masses kg, lengths m, inertia kg·m²)
DEFAULT_MASSES: tuple[float, float, float] = (36.367405, 12.632222, 23.735183)
DEFAULT_LENGTHS: tuple[float, float, float] = (0.05, 0.79, 0.9)
DEFAULT_I3 = 1.0
DEFAULT_GRAVITY = 9.8

# Numerical guards
SINGULAR_DET_TOL = 1e-9
SINGULAR_COND_TOL = 1e12
STATE_BOUND = 1e8

# Simulation
DEFAULT_DT = 1e-3
DEFAULT_HORIZON = 2.0
DEFAULT_DISTURBANCE = 50.0
DISTURBANCE_ONSET = 0.5
UNCERTAIN_FACTORS: tuple[float, float, float] = (1.2, 0.8, 1.2)
CONSTANT_TARGETS: tuple[float, float, float] = (
    1.0471975511965976,
    1.5707963267948966,
    3.141592653589793,
)

# Controller defaults
DEFAULT_LAMBDA: tuple[float, float, float] = (10.0, 10.0, 10.0)
DEFAULT_K: tuple[float, float, float] = (40000.0, 24000.0, 16000.0)
DEFAULT_EPSILON = 1.0
DEFAULT_KP: tuple[float, float, float] = (400.0, 400.0, 400.0)
DEFAULT_KD: tuple[float, float, float] = (40.0, 40.0, 40.0)

# Approximator defaults
DEFAULT_N_CENTERS = 64
DEFAULT_GAMMA = 10.0
DEFAULT_W_MAX = 100.0
DEFAULT_SEED = 1
DEFAULT_BOUNDS_LOW: tuple[float, ...] = (-4.0,) * 3 + (-20.0,) * 3 + (-50.0,) * 3
DEFAULT_BOUNDS_HIGH: tuple[float, ...] = (4.0,) * 3 + (20.0,) * 3 + (50.0,) * 3

# Metrics
SETTLING_FRACTION = 0.01
TRACKING_THRESHOLD = 0.01
LYAPUNOV_START = 0.05
LYAPUNOV_TOL = 1e-6

# Output
DEFAULT_OUT_DIR = "workbench-out"
OUT_DIR_ENV = "WORKBENCH_OUT"

TRACE_COLUMNS: list[str] = [
    "t",
    *(f"{name}{i}" for name in ("q", "qd", "e", "s", "tau") for i in (1, 2, 3)),
    *(f"{name}{i}" for name in ("taueq", "tausw", "taunn") for i in (1, 2, 3)),
    *(f"fext{i}" for i in (1, 2, 3)),
    "V",
]


class ControllerKind(StrEnum):
    """Controllers the workbench can close the loop with."""

    PD = "pd"
    SMC = "smc"
    ASMC_NN = "asmc-nn"


class PlantModel(StrEnum):
    """Dynamics family the plant is integrated with."""

    PRINTED = "printed"
    REFERENCE = "reference"


class ReferenceKind(StrEnum):
    """Desired-trajectory generators."""

    CONSTANT = "constant"
    SINUSOID = "sinusoid"
    CUSTOM_TABLE = "custom-table"


class DisturbanceShape(StrEnum):
    """External force profiles."""

    STEP = "step"
    PULSE = "pulse"


SCENARIO_NAMES: list[str] = ["constant", "uncertain", "sinusoidal", "disturbance"]


class SwitchingLaw(StrEnum):
    """Reaching term of the sliding mode controllers."""

    SMOOTHED = "smoothed"
    SIGN = "sign"
