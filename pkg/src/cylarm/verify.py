"""Built-in numerical checks run by ``cylarm verify``."""

from __future__ import annotations

from dataclasses import dataclass, replace
import logging
import math
from typing import TYPE_CHECKING

import numpy as np

from cylarm.const import ControllerKind, SwitchingLaw
from cylarm.dynamics import (
    JointState,
    ManipulatorParams,
    forward_dynamics,
    inverse_dynamics,
    reference_model_dynamics,
    reference_model_energy,
)
from cylarm.exceptions import SimulationAborted
from cylarm.netapprox import INPUT_DIM, NetApproximator
from cylarm.report import lyapunov_check, torque_reversals, trace_rows
from cylarm.sim import rk4_step, run_scenario

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import NDArray

    from cylarm.config import WorkbenchConfig

LOG = logging.getLogger(__name__)

ROUND_TRIP_SAMPLES = 1000
ROUND_TRIP_TOL = 1e-8
ENERGY_HORIZON = 10.0
ENERGY_DT = 1e-3
ENERGY_TOL = 1e-6
ORDER_DT = 0.1
ORDER_RANGE = (28.0, 36.0)
ADAPT_STEPS = 100_000
LINEARITY_TOL = 1e-12


@dataclass
class CheckResult:
    """Outcome of one named check."""

    name: str
    passed: bool
    detail: str


def sample_admissible(
    rng: np.random.Generator,
) -> tuple[JointState, NDArray[np.float64], NDArray[np.float64]]:
    """Draw a state where the printed inertia matrix is well conditioned.

    θ₁ stays in [0.6, 1.5] rad, where A11 and A33 are positive and dominate
    the A13·A31 product for every q₃ in [0, 2].
    """

    q = np.array([rng.uniform(0.6, 1.5), rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0)])
    qdot = rng.uniform(-2.0, 2.0, size=3)
    qddot = rng.uniform(-5.0, 5.0, size=3)
    f_ext = rng.uniform(-10.0, 10.0, size=3)
    return JointState(q=q, qdot=qdot), qddot, f_ext


def check_round_trip(params: ManipulatorParams, seed: int) -> CheckResult:
    """forward_dynamics ∘ inverse_dynamics must return the sampled q̈."""

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(ROUND_TRIP_SAMPLES):
        state, qddot, f_ext = sample_admissible(rng)
        tau = inverse_dynamics(params, state, qddot, f_ext)
        recovered = forward_dynamics(params, state, tau, f_ext)
        err = float(np.linalg.norm(recovered - qddot) / max(np.linalg.norm(qddot), 1.0))
        worst = max(worst, err)
    return CheckResult(
        "dynamics_round_trip",
        worst < ROUND_TRIP_TOL,
        f"worst relative error {worst:.3g} over {ROUND_TRIP_SAMPLES} states",
    )


def energy_drift(
    params: ManipulatorParams,
    state: JointState,
    horizon: float = ENERGY_HORIZON,
    dt: float = ENERGY_DT,
) -> float:
    """Relative energy change of the unforced reference model under RK4."""

    free = replace(params, g=0.0)
    zeros = np.zeros(3)

    def derivative(_t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        current = JointState.from_vector(y)
        return np.concatenate(
            (current.qdot, reference_model_dynamics(free, current, zeros, zeros)),
        )

    x = state.to_vector()
    start = reference_model_energy(free, state)
    for n in range(math.floor(horizon / dt + 1e-9)):
        x = rk4_step(derivative, x, n * dt, dt)
    end = reference_model_energy(free, JointState.from_vector(x))
    return abs(end - start) / abs(start)


def check_energy(params: ManipulatorParams) -> CheckResult:
    """The reference model must conserve energy without input or gravity."""

    state = JointState(q=np.array([0.0, 0.0, 0.5]), qdot=np.array([1.0, 0.3, 0.2]))
    drift = energy_drift(params, state)
    return CheckResult(
        "energy_conservation",
        drift < ENERGY_TOL,
        f"relative drift {drift:.3g} over {ENERGY_HORIZON:g} s",
    )


def oscillator_local_error(dt: float) -> float:
    """One-step RK4 error on q̈ = −q from (1, 0)."""

    def derivative(_t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.array([y[1], -y[0]])

    step = rk4_step(derivative, np.array([1.0, 0.0]), 0.0, dt)
    exact = np.array([math.cos(dt), -math.sin(dt)])
    return float(np.linalg.norm(step - exact))


def check_integrator_order() -> CheckResult:
    """Halving dt must shrink the local error by about 2⁵."""

    ratio = oscillator_local_error(ORDER_DT) / oscillator_local_error(ORDER_DT / 2)
    low, high = ORDER_RANGE
    return CheckResult(
        "integrator_order",
        low <= ratio <= high,
        f"local error ratio {ratio:.3f}",
    )


def _random_input(rng: np.random.Generator) -> tuple[NDArray[np.float64], ...]:
    x = rng.uniform(-5.0, 5.0, size=INPUT_DIM)
    return x[:3], x[3:6], x[6:]


def check_weight_freeze(net: NetApproximator, seed: int) -> CheckResult:
    """A zero sliding variable must leave W bit-identical."""

    rng = np.random.default_rng(seed)
    net = net.clone().reset()
    for _ in range(10):
        net.adapt(*_random_input(rng), dt=1e-3)
    before = net.W.copy()
    q, qdot, _ = _random_input(rng)
    net.adapt(q, qdot, np.zeros(3), dt=1e-3)
    return CheckResult(
        "weight_freeze",
        bool(np.array_equal(before, net.W)),
        "weights unchanged at s = 0",
    )


def check_projection(net: NetApproximator, seed: int) -> CheckResult:
    """‖W‖_F stays inside the projection ball over many random updates."""

    rng = np.random.default_rng(seed)
    net = net.clone().reset()
    bound = net.config.w_max * (1.0 + 1e-12)
    worst = 0.0
    for _ in range(ADAPT_STEPS):
        q, qdot, s = _random_input(rng)
        net.adapt(q, qdot, 20.0 * s, dt=rng.uniform(1e-4, 1e-1))
        worst = max(worst, float(np.linalg.norm(net.W)))
    return CheckResult(
        "weight_projection",
        worst <= bound,
        f"largest norm {worst:.6g} against bound {net.config.w_max:g}",
    )


def check_linearity(net: NetApproximator, seed: int) -> CheckResult:
    """output(W₁ + W₂) = output(W₁) + output(W₂) at a fixed input."""

    rng = np.random.default_rng(seed)
    q, qdot, s = _random_input(rng)
    shape = net.W.shape
    w1 = rng.normal(size=shape)
    w2 = rng.normal(size=shape)

    unbounded = replace(net.config, w_max=float("inf"))
    work = NetApproximator(unbounded)
    out1 = work.set_weights(w1).output(q, qdot, s)
    out2 = work.set_weights(w2).output(q, qdot, s)
    out12 = work.set_weights(w1 + w2).output(q, qdot, s)
    err = float(np.max(np.abs(out12 - out1 - out2)) / max(float(np.max(np.abs(out12))), 1.0))
    return CheckResult("output_linearity", err < LINEARITY_TOL, f"max deviation {err:.3g}")


def check_lyapunov(config: WorkbenchConfig, scenario: str = "constant") -> CheckResult:
    """V must not grow between control samples after the reaching phase."""

    spec = config.scenario(scenario)
    try:
        trace = run_scenario(
            spec,
            ControllerKind.ASMC_NN,
            config.manipulator,
            config.asmc_gains,
            config.pd_gains,
            config.net,
        )
    except SimulationAborted as err:
        sign = config.asmc_gains.reaching_sign
        return CheckResult("lyapunov_monitor", False, f"run aborted with reaching_sign={sign:+d}: {err}")

    passed, detail = lyapunov_check(trace)
    if not passed:
        detail = f"{detail} with reaching_sign={config.asmc_gains.reaching_sign:+d}"
    return CheckResult("lyapunov_monitor", passed, detail)


def check_switching(config: WorkbenchConfig, scenario: str = "constant") -> CheckResult:
    """The boundary layer must chatter less than the discontinuous sign law.

    Both runs use the smc gains of ``config`` and differ only in the
    reaching term; reversals are counted once the step has settled.
    """

    spec = config.scenario(scenario)
    counts: dict[SwitchingLaw, int] = {}
    for law in SwitchingLaw:
        gains = replace(config.smc_gains, switching=law)
        try:
            trace = run_scenario(spec, ControllerKind.SMC, config.manipulator, gains)
        except SimulationAborted as err:
            return CheckResult("switching_chatter", False, f"{law} run aborted: {err}")
        counts[law] = sum(torque_reversals(trace))

    smoothed, sign = counts[SwitchingLaw.SMOOTHED], counts[SwitchingLaw.SIGN]
    return CheckResult(
        "switching_chatter",
        smoothed < sign,
        f"torque reversals: {smoothed} smoothed against {sign} sign",
    )


def check_determinism(config: WorkbenchConfig, scenario: str = "constant") -> CheckResult:
    """Two runs with the same config must produce identical traces."""

    spec = config.scenario(scenario)
    rows = []
    for _ in range(2):
        try:
            trace = run_scenario(
                spec,
                ControllerKind.ASMC_NN,
                config.manipulator,
                config.asmc_gains,
                config.pd_gains,
                config.net,
            )
        except SimulationAborted as err:
            trace = err.trace
        rows.append(trace_rows(trace))
    same = rows[0].shape == rows[1].shape and bool(np.array_equal(rows[0], rows[1]))
    return CheckResult("determinism", same, f"{rows[0].shape[0]} records compared")


def run_checks(config: WorkbenchConfig) -> list[CheckResult]:
    """Run every check against ``config`` in a fixed order."""

    net = NetApproximator(config.net)
    checks: list[Callable[[], CheckResult]] = [
        lambda: check_round_trip(config.manipulator, config.seed),
        lambda: check_energy(config.manipulator),
        check_integrator_order,
        lambda: check_weight_freeze(net, config.seed),
        lambda: check_projection(net, config.seed),
        lambda: check_linearity(net, config.seed),
        lambda: check_lyapunov(config),
        lambda: check_switching(config),
        lambda: check_determinism(config),
    ]

    results = []
    for check in checks:
        result = check()
        LOG.debug("Check %s: %s (%s)", result.name, result.passed, result.detail)
        results.append(result)
    return results

