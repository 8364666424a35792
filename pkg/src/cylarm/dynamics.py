"""Rigid-body dynamics of the 3-DOF cylindrical manipulator.

Two model families live here. The printed model evaluates the A, B, C and D
entries exactly as tabulated, including the asymmetric A13/A31 pair and the
region where A11 changes sign. The reference model is the textbook
cylindrical robot with a diagonal inertia matrix; it is positive definite
everywhere and conserves energy, which makes it a numerical oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import logging
from typing import TYPE_CHECKING

import numpy as np

from cylarm.const import (
    DEFAULT_GRAVITY,
    DEFAULT_I3,
    DEFAULT_LENGTHS,
    DEFAULT_MASSES,
    N_JOINTS,
    SINGULAR_COND_TOL,
    SINGULAR_DET_TOL,
    PlantModel,
    RawData,
)
from cylarm.exceptions import InvalidConfig, SingularInertia
from cylarm.helpers import as_vector, read_number, read_vector

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class ManipulatorParams:
    """Masses, lengths, inertia, gravity and viscous friction of the arm."""

    m1: float = DEFAULT_MASSES[0]
    m2: float = DEFAULT_MASSES[1]
    m3: float = DEFAULT_MASSES[2]
    l1: float = DEFAULT_LENGTHS[0]
    l2: float = DEFAULT_LENGTHS[1]
    l3: float = DEFAULT_LENGTHS[2]
    I3: float = DEFAULT_I3  # noqa: N815
    g: float = DEFAULT_GRAVITY
    viscous_friction: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def validate(self) -> None:
        """Check the physical invariants required of a configured arm."""

        for name in ("m1", "m2", "m3", "I3", "g"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidConfig(name, f"must be a finite number > 0, got {value!r}")
        friction = self.viscous_friction
        if len(friction) != N_JOINTS or not all(
            np.isfinite(v) and v >= 0 for v in friction
        ):
            raise InvalidConfig("viscous_friction", "expected 3 finite values >= 0")

    @classmethod
    def from_raw_data(cls, raw_data: RawData) -> ManipulatorParams:
        """Build parameters from a config block, keeping defaults for gaps."""

        defaults = cls()

        def number(key: str) -> float:
            return read_number(raw_data.get(key, getattr(defaults, key)), key)

        params = cls(
            m1=number("m1"),
            m2=number("m2"),
            m3=number("m3"),
            l1=number("l1"),
            l2=number("l2"),
            l3=number("l3"),
            I3=number("I3"),
            g=number("g"),
            viscous_friction=read_vector(
                raw_data.get("viscous_friction", list(defaults.viscous_friction)),
                "viscous_friction",
                non_negative=True,
            ),  # type: ignore[arg-type]
        )
        params.validate()
        return params

    def to_raw_data(self) -> RawData:
        """Return the config block for these parameters."""

        return {
            "m1": self.m1,
            "m2": self.m2,
            "m3": self.m3,
            "l1": self.l1,
            "l2": self.l2,
            "l3": self.l3,
            "I3": self.I3,
            "g": self.g,
            "viscous_friction": list(self.viscous_friction),
        }

    def with_masses(self, m1: float, m2: float, m3: float) -> ManipulatorParams:
        """Return a copy with new masses."""

        return replace(self, m1=m1, m2=m2, m3=m3)


@dataclass
class JointState:
    """Joint positions (θ₁ rad, q₂ m, q₃ m) and their rates."""

    q: NDArray[np.float64] = field(default_factory=lambda: np.zeros(N_JOINTS))
    qdot: NDArray[np.float64] = field(default_factory=lambda: np.zeros(N_JOINTS))

    def __post_init__(self) -> None:
        """Coerce to float vectors."""

        self.q = as_vector(self.q)
        self.qdot = as_vector(self.qdot)

    @classmethod
    def from_vector(cls, x: ArrayLike) -> JointState:
        """Split a 6-vector [q; q̇]."""

        arr = np.asarray(x, dtype=float)
        return cls(q=arr[:N_JOINTS].copy(), qdot=arr[N_JOINTS:].copy())

    def to_vector(self) -> NDArray[np.float64]:
        """Stack into a 6-vector [q; q̇]."""

        return np.concatenate((self.q, self.qdot))

    def is_finite(self) -> bool:
        """Return True when every component is finite."""

        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot)))


@dataclass
class DynamicsTerms:
    """Printed A, B, C, D contributions at one state."""

    A: NDArray[np.float64]
    Bsq: NDArray[np.float64]
    Ccross: NDArray[np.float64]
    D: NDArray[np.float64]

    @property
    def coupling(self) -> NDArray[np.float64]:
        """Velocity-product torque B·[θ̇₁², q̇₂², q̇₃²] + C·[θ̇₁q̇₂, θ̇₁q̇₃, q̇₂q̇₃]."""

        return self.Bsq + self.Ccross


def inertia_matrix(params: ManipulatorParams, q: ArrayLike) -> NDArray[np.float64]:
    """Return the printed inertia-role matrix A(q).

    A is neither symmetric (A13 != A31) nor positive definite for every q:
    A11 = (4m₁sinθ₁ − 4m₂cosθ₁)q₃ + I₃ vanishes on a curve through small θ₁.
    """

    theta, _, q3 = as_vector(q)
    sin, cos = np.sin(theta), np.cos(theta)
    m1, m2 = params.m1, params.m2

    a = np.zeros((N_JOINTS, N_JOINTS))
    a[0, 0] = (4 * m1 * sin - 4 * m2 * cos) * q3 + params.I3
    a[0, 2] = (m1 + m2) * sin * cos * q3
    a[1, 1] = params.m3
    a[2, 0] = m1 * sin * cos
    a[2, 2] = 2 * (m1 * sin + m2 * cos)
    return a


def _coupling_terms(
    params: ManipulatorParams,
    state: JointState,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    theta, _, q3 = state.q
    w1, v2, v3 = state.qdot
    sin, cos = np.sin(theta), np.cos(theta)
    m1, m2 = params.m1, params.m2

    squares = np.array([w1 * w1, v2 * v2, v3 * v3])
    cross = np.array([w1 * v2, w1 * v3, v2 * v3])

    b = np.zeros((N_JOINTS, N_JOINTS))
    b[0, 0] = (m1 * sin - 4 * m2 * cos) * q3
    b[0, 2] = -m1 * cos + m2 * sin
    b[2, 0] = 2 * q3 * (m1 * sin - m2 * cos)

    c = np.zeros((N_JOINTS, N_JOINTS))
    c[0, 1] = -(m1 + m2) * sin * cos * q3
    c[2, 1] = -(m1 + m2) * sin * cos

    return b @ squares, c @ cross


def velocity_coupling(
    params: ManipulatorParams,
    state: JointState,
) -> NDArray[np.float64]:
    """Return B·[θ̇₁², q̇₂², q̇₃²]ᵀ + C·[θ̇₁q̇₂, θ̇₁q̇₃, q̇₂q̇₃]ᵀ."""

    bsq, ccross = _coupling_terms(params, state)
    return bsq + ccross


def gravity_vector(params: ManipulatorParams) -> NDArray[np.float64]:
    """Return D = (0, g(m₂+m₃), 0); only the vertical joint carries load."""

    return np.array([0.0, params.g * (params.m2 + params.m3), 0.0])


def dynamics_terms(params: ManipulatorParams, state: JointState) -> DynamicsTerms:
    """Evaluate every printed term at ``state``."""

    bsq, ccross = _coupling_terms(params, state)
    return DynamicsTerms(
        A=inertia_matrix(params, state.q),
        Bsq=bsq,
        Ccross=ccross,
        D=gravity_vector(params),
    )


def _friction(params: ManipulatorParams, state: JointState) -> NDArray[np.float64]:
    return np.asarray(params.viscous_friction, dtype=float) * state.qdot


def inverse_dynamics(
    params: ManipulatorParams,
    state: JointState,
    qddot: ArrayLike,
    f_ext: ArrayLike | None = None,
) -> NDArray[np.float64]:
    """Return τ = A(q)q̈ + coupling + D + friction + f_ext."""

    load = np.zeros(N_JOINTS) if f_ext is None else as_vector(f_ext)
    return (
        inertia_matrix(params, state.q) @ as_vector(qddot)
        + velocity_coupling(params, state)
        + gravity_vector(params)
        + _friction(params, state)
        + load
    )


def check_inertia(a: NDArray[np.float64]) -> None:
    """Raise SingularInertia when ``a`` is too close to singular to solve."""

    det = float(np.linalg.det(a))
    if abs(det) < SINGULAR_DET_TOL:
        LOG.debug("Inertia determinant %g below tolerance", det)
        msg = f"|det A| = {abs(det):.3e} below {SINGULAR_DET_TOL:g}"
        raise SingularInertia(msg)

    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > SINGULAR_COND_TOL:
        LOG.debug("Inertia condition number %g above tolerance", cond)
        msg = f"cond A = {cond:.3e} above {SINGULAR_COND_TOL:g}"
        raise SingularInertia(msg)


def forward_dynamics(
    params: ManipulatorParams,
    state: JointState,
    tau: ArrayLike,
    f_ext: ArrayLike | None = None,
) -> NDArray[np.float64]:
    """Solve A(q)q̈ = τ − coupling − D − friction − f_ext for q̈.

    Raises SingularInertia when the printed A loses rank at ``state``.
    """

    load = np.zeros(N_JOINTS) if f_ext is None else as_vector(f_ext)
    a = inertia_matrix(params, state.q)
    check_inertia(a)

    rhs = (
        as_vector(tau)
        - velocity_coupling(params, state)
        - gravity_vector(params)
        - _friction(params, state)
        - load
    )
    return np.linalg.solve(a, rhs)


def reference_inertia(params: ManipulatorParams, q: ArrayLike) -> NDArray[np.float64]:
    """Return M_ref = diag(I₃ + m₃q₃², m₂ + m₃, m₃)."""

    q3 = as_vector(q)[2]
    return np.diag([params.I3 + params.m3 * q3 * q3, params.m2 + params.m3, params.m3])


def reference_bias(params: ManipulatorParams, state: JointState) -> NDArray[np.float64]:
    """Return the Coriolis, centrifugal and gravity torques of the reference model."""

    _, _, q3 = state.q
    w1, _, v3 = state.qdot
    return np.array(
        [
            2 * params.m3 * q3 * v3 * w1,
            (params.m2 + params.m3) * params.g,
            -params.m3 * q3 * w1 * w1,
        ],
    )


def reference_model_dynamics(
    params: ManipulatorParams,
    state: JointState,
    tau: ArrayLike,
    f_ext: ArrayLike | None = None,
) -> NDArray[np.float64]:
    """Return q̈ of the reference cylindrical robot under ``tau``."""

    load = np.zeros(N_JOINTS) if f_ext is None else as_vector(f_ext)
    rhs = (
        as_vector(tau)
        - reference_bias(params, state)
        - _friction(params, state)
        - load
    )
    return rhs / np.diag(reference_inertia(params, state.q))


def reference_model_energy(params: ManipulatorParams, state: JointState) -> float:
    """Return kinetic plus potential energy of the reference model, J."""

    _, q2, q3 = state.q
    w1, v2, v3 = state.qdot
    kinetic = 0.5 * (
        w1 * w1 * (params.I3 + params.m3 * q3 * q3)
        + (params.m2 + params.m3) * v2 * v2
        + params.m3 * v3 * v3
    )
    potential = (params.m2 + params.m3) * params.g * q2
    return float(kinetic + potential)


def plant_acceleration(
    model: PlantModel,
    params: ManipulatorParams,
    state: JointState,
    tau: ArrayLike,
    f_ext: ArrayLike | None = None,
) -> NDArray[np.float64]:
    """Dispatch to the dynamics family selected for the plant."""

    if model is PlantModel.REFERENCE:
        return reference_model_dynamics(params, state, tau, f_ext)
    return forward_dynamics(params, state, tau, f_ext)
