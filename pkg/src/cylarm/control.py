"""Sliding mode, neural-augmented and PD control laws."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
from typing import TYPE_CHECKING

import numpy as np

from cylarm.const import (
    DEFAULT_EPSILON,
    DEFAULT_K,
    DEFAULT_KD,
    DEFAULT_KP,
    DEFAULT_LAMBDA,
    N_JOINTS,
    RawData,
    SwitchingLaw,
)
from cylarm.dynamics import (
    JointState,
    ManipulatorParams,
    gravity_vector,
    inertia_matrix,
    velocity_coupling,
)
from cylarm.exceptions import InvalidConfig
from cylarm.helpers import as_vector, read_number, read_vector

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from cylarm.netapprox import NetApproximator

LOG = logging.getLogger(__name__)

SMC_KEYS = {"lambda", "k", "epsilon", "reaching_sign", "switching"}
PD_KEYS = {"kp", "kd"}


@dataclass(frozen=True)
class SmcGains:
    """Sliding-surface slope, switching gain, boundary layer and reaching sign.

    ``switching`` picks the reaching term: the boundary-layer law k∘s/(ε + |s|)
    or the discontinuous k∘sign(s), which ignores ``epsilon``.
    """

    lam: tuple[float, float, float] = DEFAULT_LAMBDA
    k: tuple[float, float, float] = DEFAULT_K
    epsilon: float = DEFAULT_EPSILON
    reaching_sign: int = 1
    switching: SwitchingLaw = SwitchingLaw.SMOOTHED

    def __post_init__(self) -> None:
        """Reject gains that break the sliding-mode invariants."""

        if len(self.lam) != N_JOINTS or min(self.lam) <= 0:
            raise InvalidConfig("lambda", "every entry must be > 0")
        if len(self.k) != N_JOINTS or min(self.k) <= 0:
            raise InvalidConfig("k", "every entry must be > 0")
        if not self.epsilon > 0:
            raise InvalidConfig("epsilon", f"must be > 0, got {self.epsilon!r}")
        if self.reaching_sign not in (1, -1):
            raise InvalidConfig("reaching_sign", "must be +1 or -1")
        if self.switching not in tuple(SwitchingLaw):
            raise InvalidConfig("switching", f"unknown law {self.switching!r}")

    @classmethod
    def from_raw_data(cls, raw_data: RawData) -> SmcGains:
        """Build gains from a config block."""

        defaults = cls()
        sign = raw_data.get("reaching_sign", defaults.reaching_sign)
        if isinstance(sign, bool) or sign not in (1, -1):
            raise InvalidConfig("reaching_sign", "must be +1 or -1")
        switching = raw_data.get("switching", str(defaults.switching))
        if switching not in tuple(SwitchingLaw):
            raise InvalidConfig("switching", f"unknown law {switching!r}")
        return cls(
            lam=read_vector(
                raw_data.get("lambda", list(defaults.lam)), "lambda", positive=True
            ),  # type: ignore[arg-type]
            k=read_vector(
                raw_data.get("k", list(defaults.k)), "k", positive=True
            ),  # type: ignore[arg-type]
            epsilon=read_number(
                raw_data.get("epsilon", defaults.epsilon), "epsilon", positive=True
            ),
            reaching_sign=int(sign),
            switching=SwitchingLaw(switching),
        )

    def to_raw_data(self) -> RawData:
        """Return the config block for these gains."""

        return {
            "lambda": list(self.lam),
            "k": list(self.k),
            "epsilon": self.epsilon,
            "reaching_sign": self.reaching_sign,
            "switching": str(self.switching),
        }


@dataclass(frozen=True)
class PdGains:
    """Proportional and derivative gains of the baseline controller."""

    kp: tuple[float, float, float] = DEFAULT_KP
    kd: tuple[float, float, float] = DEFAULT_KD

    @classmethod
    def from_raw_data(cls, raw_data: RawData) -> PdGains:
        """Build gains from a config block."""

        defaults = cls()
        return cls(
            kp=read_vector(
                raw_data.get("kp", list(defaults.kp)), "kp", non_negative=True
            ),  # type: ignore[arg-type]
            kd=read_vector(
                raw_data.get("kd", list(defaults.kd)), "kd", non_negative=True
            ),  # type: ignore[arg-type]
        )

    def to_raw_data(self) -> RawData:
        """Return the config block for these gains."""

        return {"kp": list(self.kp), "kd": list(self.kd)}


@dataclass
class ReferencePoint:
    """Desired position, velocity and acceleration at one instant."""

    q_d: NDArray[np.float64]
    qdot_d: NDArray[np.float64]
    qddot_d: NDArray[np.float64]


@dataclass
class TrackingError:
    """e = q_d − q and ė = q̇_d − q̇."""

    e: NDArray[np.float64]
    edot: NDArray[np.float64]

    @classmethod
    def between(cls, ref: ReferencePoint, state: JointState) -> TrackingError:
        """Return the error of ``state`` against ``ref``."""

        return cls(e=ref.q_d - state.q, edot=ref.qdot_d - state.qdot)


@dataclass
class ControlDecomposition:
    """Torque split into equivalent, switching and network parts.

    For the PD baseline the feedback torque sits in ``tau_sw``.
    """

    tau_eq: NDArray[np.float64]
    tau_sw: NDArray[np.float64]
    tau_nn: NDArray[np.float64]
    s: NDArray[np.float64]
    tau_total: NDArray[np.float64] = field(init=False)

    def __post_init__(self) -> None:
        """Sum the parts."""

        self.tau_total = self.tau_eq + self.tau_sw + self.tau_nn


def sliding_surface(err: TrackingError, gains: SmcGains) -> NDArray[np.float64]:
    """Return s = ė + λ∘e."""

    return err.edot + np.asarray(gains.lam) * err.e


def smoothed_sign(s: ArrayLike, epsilon: float) -> NDArray[np.float64]:
    """Boundary-layer approximation s/(ε + |s|) of sign(s)."""

    arr = np.asarray(s, dtype=float)
    return arr / (epsilon + np.abs(arr))


def equivalent_control(
    params: ManipulatorParams,
    state: JointState,
    ref: ReferencePoint,
) -> NDArray[np.float64]:
    """Model feedforward A(q)q̈_d + coupling(q, q̇) + D."""

    return (
        inertia_matrix(params, state.q) @ as_vector(ref.qddot_d)
        + velocity_coupling(params, state)
        + gravity_vector(params)
    )


def switching_control(s: ArrayLike, gains: SmcGains) -> NDArray[np.float64]:
    """Return reaching_sign · k ∘ s/(ε + |s|), or k ∘ sign(s) for the sign law."""

    if gains.switching == SwitchingLaw.SIGN:
        shape = np.sign(np.asarray(s, dtype=float))
    else:
        shape = smoothed_sign(s, gains.epsilon)
    return gains.reaching_sign * np.asarray(gains.k) * shape


def smc_control(
    params: ManipulatorParams,
    state: JointState,
    ref: ReferencePoint,
    gains: SmcGains,
) -> ControlDecomposition:
    """Sliding mode control with the configured reaching term."""

    s = sliding_surface(TrackingError.between(ref, state), gains)
    return ControlDecomposition(
        tau_eq=equivalent_control(params, state, ref),
        tau_sw=switching_control(s, gains),
        tau_nn=np.zeros(N_JOINTS),
        s=s,
    )


def asmc_nn_control(
    params: ManipulatorParams,
    state: JointState,
    ref: ReferencePoint,
    gains: SmcGains,
    nn: NetApproximator,
) -> ControlDecomposition:
    """Sliding mode control plus the approximator output at (q, q̇, s).

    ``nn`` is only read; weight adaptation is the caller's job.
    """

    s = sliding_surface(TrackingError.between(ref, state), gains)
    return ControlDecomposition(
        tau_eq=equivalent_control(params, state, ref),
        tau_sw=switching_control(s, gains),
        tau_nn=nn.output(state.q, state.qdot, s),
        s=s,
    )


def pd_control(
    err: TrackingError,
    kp: ArrayLike,
    kd: ArrayLike,
) -> NDArray[np.float64]:
    """Return kp∘e + kd∘ė."""

    return as_vector(kp) * err.e + as_vector(kd) * err.edot


def lyapunov_value(s: ArrayLike, weights: ArrayLike) -> float:
    """Return V = ½sᵀs + ½tr(WᵀW)."""

    s_arr = np.asarray(s, dtype=float)
    w_arr = np.asarray(weights, dtype=float)
    return float(0.5 * s_arr @ s_arr + 0.5 * np.sum(w_arr * w_arr))
