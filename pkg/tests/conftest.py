"""Define shared fixtures."""

# pylint: disable=redefined-outer-name
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest

from cylarm.config import default_config
from cylarm.const import ControllerKind
from cylarm.dynamics import JointState, ManipulatorParams
from cylarm.netapprox import NetApproximator, NetConfig
from cylarm.sim import run_scenario


@contextmanager
def does_not_raise():
    yield


@pytest.fixture
def params():
    """Arm parameters of the shipped table."""
    return ManipulatorParams()


@pytest.fixture
def config():
    """Shipped workbench configuration."""
    return default_config()


@pytest.fixture
def scenarios(config):
    """Built-in scenarios keyed by name."""
    return config.scenarios


@pytest.fixture
def short_spec(scenarios):
    """Constant scenario cut to a quarter second."""
    return replace(scenarios["constant"], horizon=0.25)


@pytest.fixture
def state():
    """Moving state away from the singular band of the printed model."""
    return JointState(q=np.array([1.0, 0.2, 0.8]), qdot=np.array([0.5, -0.3, 0.4]))


@pytest.fixture
def net():
    """Approximator with the default feature layout and zero weights."""
    return NetApproximator(NetConfig())


@pytest.fixture(scope="session")
def constant_asmc_trace():
    """Scenario 1 under the adaptive controller, shared by slow tests."""
    config = default_config()
    return run_scenario(
        config.scenario("constant"),
        ControllerKind.ASMC_NN,
        config.manipulator,
        config.asmc_gains,
        config.pd_gains,
        config.net,
    )


@pytest.fixture(scope="session")
def constant_smc_trace():
    """Scenario 1 under sliding mode control with the shipped gains."""
    config = default_config()
    return run_scenario(
        config.scenario("constant"),
        ControllerKind.SMC,
        config.manipulator,
        config.smc_gains,
    )
