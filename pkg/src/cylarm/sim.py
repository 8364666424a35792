"""Closed-loop simulation of the manipulator under a chosen controller."""

from __future__ import annotations

import asyncio
from dataclasses import dataclass, field
from functools import cached_property
import logging
import math
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from cylarm.const import (
    CONSTANT_TARGETS,
    DEFAULT_DISTURBANCE,
    DEFAULT_DT,
    DEFAULT_HORIZON,
    DISTURBANCE_ONSET,
    N_JOINTS,
    STATE_BOUND,
    UNCERTAIN_FACTORS,
    ControllerKind,
    DisturbanceShape,
    PlantModel,
    RawData,
    ReferenceKind,
)
from cylarm.control import (
    ControlDecomposition,
    PdGains,
    ReferencePoint,
    SmcGains,
    TrackingError,
    asmc_nn_control,
    lyapunov_value,
    pd_control,
    sliding_surface,
    smc_control,
)
from cylarm.dynamics import JointState, ManipulatorParams, plant_acceleration
from cylarm.exceptions import (
    InvalidConfig,
    NonFinite,
    SimulationAborted,
    SingularInertia,
)
from cylarm.helpers import read_block, read_number, read_vector
from cylarm.netapprox import NetApproximator, NetConfig

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable, Mapping

    from numpy.typing import ArrayLike, NDArray

LOG = logging.getLogger(__name__)

REFERENCE_KEYS = {"kind", "targets", "amplitude", "frequency", "knots"}
DISTURBANCE_KEYS = {"joint", "onset", "magnitude", "shape", "duration"}
SCENARIO_KEYS = {
    "reference",
    "disturbance",
    "plant_perturbation",
    "initial_q",
    "initial_qdot",
    "horizon",
    "dt",
    "plant_model",
    "torque_clamp",
}


@dataclass(frozen=True)
class ReferenceSignal:
    """Desired trajectory with analytic first and second derivatives."""

    kind: ReferenceKind = ReferenceKind.CONSTANT
    targets: tuple[float, ...] = CONSTANT_TARGETS
    amplitude: tuple[float, ...] = (1.0, 1.0, 1.0)
    frequency: tuple[float, ...] = (1.0, 1.0, 1.0)
    knots_t: tuple[float, ...] = ()
    knots_q: tuple[tuple[float, ...], ...] = ()
    knots_qdot: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        """Check the table of a custom reference."""

        if self.kind is not ReferenceKind.CUSTOM_TABLE:
            return
        if len(self.knots_t) < 2:
            raise InvalidConfig("reference.knots", "need at least two knots")
        if any(b <= a for a, b in zip(self.knots_t, self.knots_t[1:], strict=False)):
            raise InvalidConfig("reference.knots", "knot times must be strictly increasing")

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(
            np.asarray(self.knots_t),
            np.asarray(self.knots_q),
            np.asarray(self.knots_qdot),
            axis=0,
        )

    def at(self, t: float) -> ReferencePoint:
        """Return (q_d, q̇_d, q̈_d) at time ``t``."""

        if self.kind is ReferenceKind.CONSTANT:
            zeros = np.zeros(N_JOINTS)
            return ReferencePoint(np.asarray(self.targets, dtype=float), zeros, zeros.copy())

        if self.kind is ReferenceKind.SINUSOID:
            amp = np.asarray(self.amplitude, dtype=float)
            omega = 2.0 * math.pi * np.asarray(self.frequency, dtype=float)
            sin, cos = np.sin(omega * t), np.cos(omega * t)
            return ReferencePoint(amp * sin, amp * omega * cos, -amp * omega**2 * sin)

        if t <= self.knots_t[0] or t >= self.knots_t[-1]:
            end = 0 if t <= self.knots_t[0] else -1
            zeros = np.zeros(N_JOINTS)
            return ReferencePoint(np.asarray(self.knots_q[end], dtype=float), zeros, zeros.copy())
        spline = self._spline
        return ReferencePoint(spline(t), spline(t, 1), spline(t, 2))

    @property
    def is_step(self) -> bool:
        """True for references held at a fixed target."""

        return self.kind is ReferenceKind.CONSTANT

    @classmethod
    def from_raw_data(cls, raw_data: RawData) -> ReferenceSignal:
        """Build a reference from a config block."""

        raw = read_block(raw_data, "reference", REFERENCE_KEYS)
        try:
            kind = ReferenceKind(raw.get("kind", ReferenceKind.CONSTANT))
        except ValueError as err:
            valid = ", ".join(k.value for k in ReferenceKind)
            raise InvalidConfig("reference.kind", f"expected one of {valid}") from err

        defaults = cls()
        knots_t: tuple[float, ...] = ()
        knots_q: tuple[tuple[float, ...], ...] = ()
        knots_qdot: tuple[tuple[float, ...], ...] = ()
        if kind is ReferenceKind.CUSTOM_TABLE:
            knots = raw.get("knots")
            if not isinstance(knots, list):
                raise InvalidConfig("reference.knots", "expected a list of knots")
            rows = [
                read_block(k, f"reference.knots[{i}]", {"t", "q", "qdot"})
                for i, k in enumerate(knots)
            ]
            knots_t = tuple(
                read_number(r.get("t"), f"reference.knots[{i}].t") for i, r in enumerate(rows)
            )
            knots_q = tuple(
                read_vector(r.get("q"), f"reference.knots[{i}].q") for i, r in enumerate(rows)
            )
            knots_qdot = tuple(
                read_vector(r.get("qdot", 0.0), f"reference.knots[{i}].qdot")
                for i, r in enumerate(rows)
            )

        return cls(
            kind=kind,
            targets=read_vector(raw.get("targets", list(defaults.targets)), "reference.targets"),
            amplitude=read_vector(
                raw.get("amplitude", list(defaults.amplitude)), "reference.amplitude"
            ),
            frequency=read_vector(
                raw.get("frequency", list(defaults.frequency)),
                "reference.frequency",
                non_negative=True,
            ),
            knots_t=knots_t,
            knots_q=knots_q,
            knots_qdot=knots_qdot,
        )

    def to_raw_data(self) -> RawData:
        """Return the config block for this reference."""

        raw: RawData = {"kind": self.kind.value}
        if self.kind is ReferenceKind.CONSTANT:
            raw["targets"] = list(self.targets)
        elif self.kind is ReferenceKind.SINUSOID:
            raw["amplitude"] = list(self.amplitude)
            raw["frequency"] = list(self.frequency)
        else:
            raw["knots"] = [
                {"t": t, "q": list(q), "qdot": list(qd)}
                for t, q, qd in zip(self.knots_t, self.knots_q, self.knots_qdot, strict=True)
            ]
        return raw


@dataclass(frozen=True)
class DisturbanceProfile:
    """External load on one joint, switched on at ``onset``."""

    joint: int = 3
    onset: float = DISTURBANCE_ONSET
    magnitude: float = DEFAULT_DISTURBANCE
    shape: DisturbanceShape = DisturbanceShape.STEP
    duration: float = 0.0

    def __post_init__(self) -> None:
        """Check joint index, onset and pulse width."""

        if self.joint not in (1, 2, 3):
            raise InvalidConfig("disturbance.joint", "must be 1, 2 or 3")
        if self.onset < 0:
            raise InvalidConfig("disturbance.onset", "must be >= 0")
        if self.shape is DisturbanceShape.PULSE and not self.duration > 0:
            raise InvalidConfig("disturbance.duration", "a pulse needs a duration > 0")

    def force(self, t: float) -> NDArray[np.float64]:
        """Return f_ext at time ``t``."""

        f_ext = np.zeros(N_JOINTS)
        active = t >= self.onset
        if self.shape is DisturbanceShape.PULSE:
            active = active and t < self.onset + self.duration
        if active:
            f_ext[self.joint - 1] = self.magnitude
        return f_ext

    @classmethod
    def from_raw_data(cls, raw_data: RawData) -> DisturbanceProfile:
        """Build a disturbance from a config block."""

        raw = read_block(raw_data, "disturbance", DISTURBANCE_KEYS)
        defaults = cls()
        joint = raw.get("joint", defaults.joint)
        if isinstance(joint, bool) or not isinstance(joint, int):
            raise InvalidConfig("disturbance.joint", "expected an integer")
        try:
            shape = DisturbanceShape(raw.get("shape", defaults.shape))
        except ValueError as err:
            raise InvalidConfig("disturbance.shape", "expected step or pulse") from err
        return cls(
            joint=joint,
            onset=read_number(raw.get("onset", defaults.onset), "disturbance.onset", non_negative=True),
            magnitude=read_number(raw.get("magnitude", defaults.magnitude), "disturbance.magnitude"),
            shape=shape,
            duration=read_number(
                raw.get("duration", defaults.duration), "disturbance.duration", non_negative=True
            ),
        )

    def to_raw_data(self) -> RawData:
        """Return the config block for this disturbance."""

        return {
            "joint": self.joint,
            "onset": self.onset,
            "magnitude": self.magnitude,
            "shape": self.shape.value,
            "duration": self.duration,
        }


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything a closed-loop run needs besides the controller."""

    name: str
    reference: ReferenceSignal = field(default_factory=ReferenceSignal)
    disturbance: DisturbanceProfile | None = None
    plant_perturbation: tuple[float, float, float] = (1.0, 1.0, 1.0)
    initial_q: tuple[float, float, float] = (0.0, 0.0, 0.0)
    initial_qdot: tuple[float, float, float] = (0.0, 0.0, 0.0)
    horizon: float = DEFAULT_HORIZON
    dt: float = DEFAULT_DT
    plant_model: PlantModel = PlantModel.REFERENCE
    torque_clamp: tuple[float, float, float] | None = None

    def __post_init__(self) -> None:
        """Check horizon, step and perturbation factors."""

        if not self.horizon > 0:
            raise InvalidConfig("horizon", "must be > 0")
        if not 0 < self.dt <= self.horizon:
            raise InvalidConfig("dt", "must satisfy 0 < dt <= horizon")
        if min(self.plant_perturbation) <= 0:
            raise InvalidConfig("plant_perturbation", "every factor must be > 0")
        if self.torque_clamp is not None and min(self.torque_clamp) <= 0:
            raise InvalidConfig("torque_clamp", "every bound must be > 0")

    @property
    def n_steps(self) -> int:
        """Number of integration steps; the trace holds one more record."""

        return math.floor(self.horizon / self.dt + 1e-9)

    @property
    def initial_state(self) -> JointState:
        """State at t = 0."""

        return JointState(q=np.array(self.initial_q), qdot=np.array(self.initial_qdot))

    @classmethod
    def from_raw_data(cls, name: str, raw_data: RawData, base: ScenarioSpec | None = None) -> ScenarioSpec:
        """Build a scenario from a config block, overriding ``base`` when given."""

        raw = read_block(raw_data, "", SCENARIO_KEYS)
        base = base or cls(name=name)

        try:
            plant_model = PlantModel(raw.get("plant_model", base.plant_model))
        except ValueError as err:
            valid = ", ".join(m.value for m in PlantModel)
            raise InvalidConfig("plant_model", f"expected one of {valid}") from err

        disturbance = base.disturbance
        if "disturbance" in raw:
            disturbance = (
                None if raw["disturbance"] is None else DisturbanceProfile.from_raw_data(raw["disturbance"])
            )

        clamp = base.torque_clamp
        if "torque_clamp" in raw:
            clamp = (
                None
                if raw["torque_clamp"] is None
                else read_vector(raw["torque_clamp"], "torque_clamp", positive=True)  # type: ignore[assignment]
            )

        return cls(
            name=name,
            reference=(
                ReferenceSignal.from_raw_data(raw["reference"]) if "reference" in raw else base.reference
            ),
            disturbance=disturbance,
            plant_perturbation=read_vector(
                raw.get("plant_perturbation", list(base.plant_perturbation)),
                "plant_perturbation",
                positive=True,
            ),  # type: ignore[arg-type]
            initial_q=read_vector(raw.get("initial_q", list(base.initial_q)), "initial_q"),  # type: ignore[arg-type]
            initial_qdot=read_vector(raw.get("initial_qdot", list(base.initial_qdot)), "initial_qdot"),  # type: ignore[arg-type]
            horizon=read_number(raw.get("horizon", base.horizon), "horizon", positive=True),
            dt=read_number(raw.get("dt", base.dt), "dt", positive=True),
            plant_model=plant_model,
            torque_clamp=clamp,
        )

    def to_raw_data(self) -> RawData:
        """Return the config block for this scenario."""

        return {
            "reference": self.reference.to_raw_data(),
            "disturbance": None if self.disturbance is None else self.disturbance.to_raw_data(),
            "plant_perturbation": list(self.plant_perturbation),
            "initial_q": list(self.initial_q),
            "initial_qdot": list(self.initial_qdot),
            "horizon": self.horizon,
            "dt": self.dt,
            "plant_model": self.plant_model.value,
            "torque_clamp": None if self.torque_clamp is None else list(self.torque_clamp),
        }


@dataclass
class SimTrace:
    """Uniformly sampled record of one closed-loop run."""

    scenario: str
    controller: str
    dt: float
    t: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    q: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, N_JOINTS)))
    q_d: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, N_JOINTS)))
    e: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, N_JOINTS)))
    s: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, N_JOINTS)))
    tau: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, N_JOINTS)))
    tau_eq: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, N_JOINTS)))
    tau_sw: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, N_JOINTS)))
    tau_nn: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, N_JOINTS)))
    f_ext: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, N_JOINTS)))
    V: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    weights: NDArray[np.float64] | None = None

    def __len__(self) -> int:
        """Number of records."""

        return int(self.t.shape[0])

    def columns(self) -> list[NDArray[np.float64]]:
        """Record columns in export order, one 2-D block per group."""

        return [
            self.t[:, None],
            self.q,
            self.q_d,
            self.e,
            self.s,
            self.tau,
            self.tau_eq,
            self.tau_sw,
            self.tau_nn,
            self.f_ext,
            self.V[:, None],
        ]


class _Recorder:
    """Accumulates per-sample rows before they are frozen into a SimTrace."""

    def __init__(self) -> None:
        self.rows: dict[str, list[Any]] = {
            key: []
            for key in ("t", "q", "q_d", "e", "s", "tau", "tau_eq", "tau_sw", "tau_nn", "f_ext", "V")
        }

    def add(self, **values: Any) -> None:
        for key, value in values.items():
            self.rows[key].append(value)

    def freeze(self, scenario: str, controller: str, dt: float) -> SimTrace:
        arrays = {
            key: np.array(values, dtype=float).reshape(
                (len(values),) if key in ("t", "V") else (len(values), N_JOINTS),
            )
            for key, values in self.rows.items()
        }
        return SimTrace(scenario=scenario, controller=controller, dt=dt, **arrays)


def rk4_step(
    derivative: Callable[[float, NDArray[np.float64]], NDArray[np.float64]],
    x: ArrayLike,
    t: float,
    dt: float,
) -> NDArray[np.float64]:
    """Advance ``x`` by one classical Runge-Kutta step of size ``dt``."""

    if not dt > 0:
        msg = f"dt must be > 0, got {dt!r}"
        raise ValueError(msg)

    x0 = np.asarray(x, dtype=float)
    k1 = derivative(t, x0)
    k2 = derivative(t + 0.5 * dt, x0 + 0.5 * dt * k1)
    k3 = derivative(t + 0.5 * dt, x0 + 0.5 * dt * k2)
    k4 = derivative(t + dt, x0 + dt * k3)
    return x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def perturb_params(params: ManipulatorParams, factors: ArrayLike) -> ManipulatorParams:
    """Scale the three masses elementwise; every other field is kept."""

    f1, f2, f3 = np.asarray(factors, dtype=float)
    if min(f1, f2, f3) <= 0:
        msg = "perturbation factors must be > 0"
        raise ValueError(msg)
    return params.with_masses(params.m1 * f1, params.m2 * f2, params.m3 * f3)


def standard_scenarios() -> list[ScenarioSpec]:
    """Return the four built-in scenarios in their canonical order."""

    constant = ReferenceSignal(kind=ReferenceKind.CONSTANT, targets=CONSTANT_TARGETS)
    return [
        ScenarioSpec(name="constant", reference=constant),
        ScenarioSpec(
            name="uncertain",
            reference=constant,
            plant_perturbation=UNCERTAIN_FACTORS,
        ),
        ScenarioSpec(
            name="sinusoidal",
            reference=ReferenceSignal(
                kind=ReferenceKind.SINUSOID,
                amplitude=(1.0, 1.0, 1.0),
                frequency=(1.0, 1.0, 1.0),
            ),
        ),
        ScenarioSpec(
            name="disturbance",
            reference=constant,
            disturbance=DisturbanceProfile(),
        ),
    ]


def _control(
    controller: ControllerKind,
    params: ManipulatorParams,
    state: JointState,
    ref: ReferencePoint,
    gains: SmcGains,
    pd_gains: PdGains,
    net: NetApproximator | None,
) -> ControlDecomposition:
    if controller is ControllerKind.ASMC_NN:
        if net is None:
            msg = "asmc-nn control needs an approximator"
            raise ValueError(msg)
        return asmc_nn_control(params, state, ref, gains, net)
    if controller is ControllerKind.SMC:
        return smc_control(params, state, ref, gains)

    err = TrackingError.between(ref, state)
    zeros = np.zeros(N_JOINTS)
    return ControlDecomposition(
        tau_eq=zeros,
        tau_sw=pd_control(err, pd_gains.kp, pd_gains.kd),
        tau_nn=zeros.copy(),
        s=sliding_surface(err, gains),
    )


def run_scenario(
    spec: ScenarioSpec,
    controller: ControllerKind | str,
    params: ManipulatorParams | None = None,
    gains: SmcGains | None = None,
    pd_gains: PdGains | None = None,
    net_config: NetConfig | None = None,
    net: NetApproximator | None = None,
) -> SimTrace:
    """Integrate the closed loop over the scenario horizon.

    The controller sees the nominal ``params``; the plant integrates the
    perturbed copy with the scenario's dynamics family. Torque is held
    constant within each step. On SingularInertia or NonFinite the run stops
    and SimulationAborted carries the trace recorded so far.
    """

    controller = ControllerKind(controller)
    params = params or ManipulatorParams()
    gains = gains or SmcGains()
    pd_gains = pd_gains or PdGains()
    if controller is ControllerKind.ASMC_NN:
        net = net if net is not None else NetApproximator(net_config or NetConfig())
    else:
        net = None

    plant_params = perturb_params(params, spec.plant_perturbation)
    clamp = None if spec.torque_clamp is None else np.asarray(spec.torque_clamp, dtype=float)
    dt = spec.dt
    n_steps = spec.n_steps

    LOG.debug(
        "Running scenario %s with %s: %d steps of %g s on the %s plant",
        spec.name,
        controller.value,
        n_steps,
        dt,
        spec.plant_model.value,
    )

    recorder = _Recorder()
    x = spec.initial_state.to_vector()

    for n in range(n_steps + 1):
        t = n * dt
        state = JointState.from_vector(x)
        ref = spec.reference.at(t)
        decomposition = _control(controller, params, state, ref, gains, pd_gains, net)
        tau = decomposition.tau_total
        if clamp is not None:
            tau = np.clip(tau, -clamp, clamp)
        f_ext = spec.disturbance.force(t) if spec.disturbance else np.zeros(N_JOINTS)
        weights = net.W if net is not None else np.zeros((1, N_JOINTS))

        recorder.add(
            t=t,
            q=state.q,
            q_d=ref.q_d,
            e=ref.q_d - state.q,
            s=decomposition.s,
            tau=tau,
            tau_eq=decomposition.tau_eq,
            tau_sw=decomposition.tau_sw,
            tau_nn=decomposition.tau_nn,
            f_ext=f_ext,
            V=lyapunov_value(decomposition.s, weights),
        )
        if n == n_steps:
            break

        if net is not None:
            net.adapt(state.q, state.qdot, decomposition.s, dt)

        def derivative(
            _t: float,
            y: NDArray[np.float64],
            tau: NDArray[np.float64] = tau,
            f_ext: NDArray[np.float64] = f_ext,
        ) -> NDArray[np.float64]:
            current = JointState.from_vector(y)
            qddot = plant_acceleration(spec.plant_model, plant_params, current, tau, f_ext)
            return np.concatenate((current.qdot, qddot))

        try:
            with np.errstate(over="ignore", invalid="ignore"):
                x = rk4_step(derivative, x, t, dt)
            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > STATE_BOUND:
                msg = f"state left +/-{STATE_BOUND:g} at t={t + dt:g}"
                raise NonFinite(msg)
        except (SingularInertia, NonFinite) as err:
            LOG.debug("Scenario %s with %s aborted: %s", spec.name, controller.value, err)
            trace = recorder.freeze(spec.name, controller.value, dt)
            raise SimulationAborted(trace, err) from err

    trace = recorder.freeze(spec.name, controller.value, dt)
    if net is not None:
        trace.weights = net.W.copy()
    LOG.debug("Scenario %s with %s finished with %d records", spec.name, controller.value, len(trace))
    return trace


async def async_run_controllers(
    spec: ScenarioSpec,
    controllers: Iterable[ControllerKind | str],
    params: ManipulatorParams | None = None,
    gains: Mapping[str, SmcGains] | None = None,
    pd_gains: PdGains | None = None,
    net_config: NetConfig | None = None,
) -> dict[str, SimTrace]:
    """Run each controller on ``spec`` in its own worker thread.

    ``gains`` maps controller names to their sliding-mode gains. Results are
    keyed by controller name in lexicographic order.
    """

    kinds = sorted({ControllerKind(c) for c in controllers}, key=lambda c: c.value)
    traces = await asyncio.gather(
        *(
            asyncio.to_thread(
                run_scenario,
                spec,
                kind,
                params,
                (gains or {}).get(kind.value),
                pd_gains,
                net_config,
            )
            for kind in kinds
        ),
    )
    return {kind.value: trace for kind, trace in zip(kinds, traces, strict=True)}

