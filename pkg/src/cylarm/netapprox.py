"""Linear-in-weight radial basis approximator with online adaptation.

The approximator maps x = [q; q̇; s] through fixed Gaussian features and an
adaptive weight matrix W (features × joints): τ_NN = Wᵀφ(x). Only W adapts,
following Ẇ = γφsᵀ integrated with explicit Euler at the control step and
projected back onto the Frobenius ball of radius w_max.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy.stats import qmc

from cylarm.const import (
    DEFAULT_BOUNDS_HIGH,
    DEFAULT_BOUNDS_LOW,
    DEFAULT_GAMMA,
    DEFAULT_N_CENTERS,
    DEFAULT_SEED,
    DEFAULT_W_MAX,
    N_JOINTS,
    RawData,
)
from cylarm.exceptions import InvalidConfig, OutputError
from cylarm.helpers import format_float, read_number, read_vector

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

LOG = logging.getLogger(__name__)

INPUT_DIM = 3 * N_JOINTS

NET_KEYS = {
    "n_centers",
    "centers",
    "widths",
    "gamma",
    "w_max",
    "seed",
    "bounds_low",
    "bounds_high",
}


@dataclass(frozen=True)
class NetConfig:
    """Feature layout and adaptation constants."""

    n_centers: int = DEFAULT_N_CENTERS
    gamma: float = DEFAULT_GAMMA
    w_max: float = DEFAULT_W_MAX
    seed: int = DEFAULT_SEED
    bounds_low: tuple[float, ...] = DEFAULT_BOUNDS_LOW
    bounds_high: tuple[float, ...] = DEFAULT_BOUNDS_HIGH
    centers: tuple[tuple[float, ...], ...] | None = None
    widths: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        """Check counts, bounds and positivity."""

        if self.n_centers < 1:
            raise InvalidConfig("n_centers", "need at least one center")
        if not self.gamma > 0:
            raise InvalidConfig("gamma", f"must be > 0, got {self.gamma!r}")
        if not self.w_max > 0:
            raise InvalidConfig("w_max", f"must be > 0, got {self.w_max!r}")
        if any(hi <= lo for lo, hi in zip(self.bounds_low, self.bounds_high, strict=True)):
            raise InvalidConfig("bounds_high", "every upper bound must exceed its lower bound")
        if self.centers is not None:
            if len(self.centers) < 1 or any(len(c) != INPUT_DIM for c in self.centers):
                raise InvalidConfig("centers", f"expected a list of {INPUT_DIM}-vectors")
            if self.widths is not None and len(self.widths) != len(self.centers):
                raise InvalidConfig("widths", "need one width per center")
        if self.widths is not None and min(self.widths) <= 0:
            raise InvalidConfig("widths", "every width must be > 0")

    @property
    def feature_count(self) -> int:
        """Number of radial features."""

        return len(self.centers) if self.centers is not None else self.n_centers

    @classmethod
    def from_raw_data(cls, raw_data: RawData) -> NetConfig:
        """Build a network config from a config block."""

        defaults = cls()
        seed = raw_data.get("seed", defaults.seed)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise InvalidConfig("seed", "expected an integer")
        n_centers = raw_data.get("n_centers", defaults.n_centers)
        if isinstance(n_centers, bool) or not isinstance(n_centers, int):
            raise InvalidConfig("n_centers", "expected an integer")

        centers = None
        if (raw_centers := raw_data.get("centers")) is not None:
            if not isinstance(raw_centers, list):
                raise InvalidConfig("centers", "expected a list of 9-vectors")
            centers = tuple(
                read_vector(c, f"centers[{i}]", size=INPUT_DIM)
                for i, c in enumerate(raw_centers)
            )
        widths = None
        if (raw_widths := raw_data.get("widths")) is not None:
            size = len(centers) if centers is not None else n_centers
            widths = read_vector(raw_widths, "widths", size=size, positive=True)

        return cls(
            n_centers=n_centers,
            gamma=read_number(raw_data.get("gamma", defaults.gamma), "gamma", positive=True),
            w_max=read_number(raw_data.get("w_max", defaults.w_max), "w_max", positive=True),
            seed=seed,
            bounds_low=read_vector(
                raw_data.get("bounds_low", list(defaults.bounds_low)),
                "bounds_low",
                size=INPUT_DIM,
            ),
            bounds_high=read_vector(
                raw_data.get("bounds_high", list(defaults.bounds_high)),
                "bounds_high",
                size=INPUT_DIM,
            ),
            centers=centers,
            widths=widths,
        )

    def to_raw_data(self) -> RawData:
        """Return the config block for this layout."""

        raw: RawData = {
            "n_centers": self.n_centers,
            "gamma": self.gamma,
            "w_max": self.w_max,
            "seed": self.seed,
            "bounds_low": list(self.bounds_low),
            "bounds_high": list(self.bounds_high),
        }
        if self.centers is not None:
            raw["centers"] = [list(c) for c in self.centers]
        if self.widths is not None:
            raw["widths"] = list(self.widths)
        return raw


def place_centers(config: NetConfig) -> NDArray[np.float64]:
    """Return the feature centers, sampling a seeded Halton set when none are given."""

    if config.centers is not None:
        return np.array(config.centers, dtype=float)

    sampler = qmc.Halton(d=INPUT_DIM, scramble=True, rng=np.random.default_rng(config.seed))
    unit = sampler.random(config.n_centers)
    return qmc.scale(unit, config.bounds_low, config.bounds_high)


def default_widths(config: NetConfig) -> NDArray[np.float64]:
    """Return σ per center: half the bound-box diagonal over count^(1/9)."""

    if config.widths is not None:
        return np.array(config.widths, dtype=float)

    span = np.asarray(config.bounds_high) - np.asarray(config.bounds_low)
    sigma = 0.5 * float(np.linalg.norm(span)) / config.feature_count ** (1.0 / INPUT_DIM)
    return np.full(config.feature_count, sigma)


@dataclass
class NetApproximator:
    """Gaussian features with an adaptive output weight matrix."""

    config: NetConfig = field(default_factory=NetConfig)
    centers: NDArray[np.float64] = field(init=False, repr=False)
    widths: NDArray[np.float64] = field(init=False, repr=False)
    W: NDArray[np.float64] = field(init=False, repr=False)
    projections: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        """Place the features and start from zero weights."""

        self.centers = place_centers(self.config)
        self.widths = default_widths(self.config)
        self.W = np.zeros((self.config.feature_count, N_JOINTS))

    @property
    def feature_count(self) -> int:
        """Number of rows of W."""

        return self.W.shape[0]

    def features(self, q: ArrayLike, qdot: ArrayLike, s: ArrayLike) -> NDArray[np.float64]:
        """Return φ_j = exp(−‖x − c_j‖² / (2σ_j²)) for x = [q; q̇; s]."""

        x = np.concatenate(
            (np.asarray(q, dtype=float), np.asarray(qdot, dtype=float), np.asarray(s, dtype=float)),
        )
        sq_dist = np.sum((self.centers - x) ** 2, axis=1)
        return np.exp(-sq_dist / (2.0 * self.widths**2))

    def output(self, q: ArrayLike, qdot: ArrayLike, s: ArrayLike) -> NDArray[np.float64]:
        """Return τ_NN = Wᵀφ."""

        return self.W.T @ self.features(q, qdot, s)

    def adapt(
        self,
        q: ArrayLike,
        qdot: ArrayLike,
        s: ArrayLike,
        dt: float,
    ) -> NetApproximator:
        """Apply one Euler step of Ẇ = γφsᵀ, then project onto ‖W‖_F ≤ w_max."""

        if not dt > 0:
            msg = f"dt must be > 0, got {dt!r}"
            raise ValueError(msg)

        phi = self.features(q, qdot, s)
        self.W = self.W + dt * self.config.gamma * np.outer(phi, np.asarray(s, dtype=float))

        norm = float(np.linalg.norm(self.W))
        if norm > self.config.w_max:
            if not self.projections:
                LOG.debug("Weight norm %g hit bound %g, projecting", norm, self.config.w_max)
            self.projections += 1
            self.W = self.W * (self.config.w_max / norm)
        return self

    def reset(self) -> NetApproximator:
        """Zero the weights; the feature layout is kept."""

        self.W = np.zeros_like(self.W)
        self.projections = 0
        return self

    def clone(self) -> NetApproximator:
        """Independent copy for a parallel run."""

        return copy.deepcopy(self)

    def set_weights(self, weights: ArrayLike) -> NetApproximator:
        """Replace W, projecting if the new matrix is outside the bound."""

        arr = np.array(weights, dtype=float)
        if arr.shape != self.W.shape:
            msg = f"expected weights of shape {self.W.shape}, got {arr.shape}"
            raise ValueError(msg)
        if not np.all(np.isfinite(arr)):
            msg = "weights must be finite"
            raise ValueError(msg)
        norm = float(np.linalg.norm(arr))
        if norm > self.config.w_max:
            arr *= self.config.w_max / norm
        self.W = arr
        return self

    def dump_weights(self, path: Path) -> None:
        """Write W as CSV, one row per feature, three columns."""

        frame = pd.DataFrame(self.W).map(format_float)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(
                path, header=False, index=False, lineterminator="\n", encoding="utf-8"
            )
        except OSError as err:
            msg = f"cannot write weights to {path}: {err}"
            raise OutputError(msg) from err

    def load_weights(self, path: Path) -> NetApproximator:
        """Read W from a CSV written by :meth:`dump_weights`."""

        try:
            frame = pd.read_csv(
                path, header=None, float_precision="round_trip", encoding="utf-8"
            )
            rows = frame.to_numpy(dtype=float)
        except OSError as err:
            msg = f"cannot read weights from {path}: {err}"
            raise OutputError(msg) from err
        except ValueError as err:
            msg = f"malformed weights file {path}: {err}"
            raise OutputError(msg) from err

        try:
            return self.set_weights(rows)
        except ValueError as err:
            msg = f"weights file {path} does not fit this network: {err}"
            raise OutputError(msg) from err
