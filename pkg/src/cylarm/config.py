"""Workbench configuration: one JSON document capturing every tunable."""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import logging
from typing import TYPE_CHECKING, Any, TypeVar

from cylarm.const import DEFAULT_OUT_DIR, DEFAULT_SEED, ControllerKind, RawData
from cylarm.control import PD_KEYS, SMC_KEYS, PdGains, SmcGains
from cylarm.dynamics import ManipulatorParams
from cylarm.exceptions import InvalidConfig
from cylarm.helpers import read_block
from cylarm.netapprox import NET_KEYS, NetConfig
from cylarm.sim import ScenarioSpec, standard_scenarios

if TYPE_CHECKING:
    from collections.abc import Callable
    from pathlib import Path

LOG = logging.getLogger(__name__)

T = TypeVar("T")

ROOT_KEYS = {"manipulator", "gains", "net", "scenarios", "output_dir", "seed"}
MANIPULATOR_KEYS = {"m1", "m2", "m3", "l1", "l2", "l3", "I3", "g", "viscous_friction"}
GAINS_KEYS = {kind.value for kind in ControllerKind}


def _nested(prefix: str, build: Callable[[], T]) -> T:
    """Run ``build`` and prefix the key path of any InvalidConfig it raises."""

    try:
        return build()
    except InvalidConfig as err:
        raise InvalidConfig(f"{prefix}.{err.key_path}", err.reason) from err
    except (TypeError, ValueError) as err:
        raise InvalidConfig(prefix, str(err)) from err


@dataclass
class WorkbenchConfig:
    """Validated workbench settings."""

    manipulator: ManipulatorParams = field(default_factory=ManipulatorParams)
    smc_gains: SmcGains = field(default_factory=SmcGains)
    asmc_gains: SmcGains = field(default_factory=SmcGains)
    pd_gains: PdGains = field(default_factory=PdGains)
    net: NetConfig = field(default_factory=NetConfig)
    scenarios: dict[str, ScenarioSpec] = field(
        default_factory=lambda: {spec.name: spec for spec in standard_scenarios()},
    )
    output_dir: str = DEFAULT_OUT_DIR
    seed: int = DEFAULT_SEED

    def gains_for(self, controller: ControllerKind | str) -> SmcGains:
        """Sliding-mode gains used by ``controller``."""

        if ControllerKind(controller) is ControllerKind.ASMC_NN:
            return self.asmc_gains
        return self.smc_gains

    def scenario(self, name: str) -> ScenarioSpec:
        """Look up a scenario, naming the valid choices on failure."""

        if name not in self.scenarios:
            valid = ", ".join(sorted(self.scenarios))
            raise InvalidConfig("scenario", f"unknown scenario {name!r} (valid: {valid})")
        return self.scenarios[name]

    @classmethod
    def from_raw_data(cls, raw_data: Any) -> WorkbenchConfig:
        """Validate a parsed JSON document; absent keys keep their defaults."""

        raw = read_block(raw_data, "", ROOT_KEYS)
        defaults = cls()

        seed = raw.get("seed", defaults.seed)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise InvalidConfig("seed", "expected an integer")

        output_dir = raw.get("output_dir", defaults.output_dir)
        if not isinstance(output_dir, str) or not output_dir:
            raise InvalidConfig("output_dir", "expected a non-empty string")

        manipulator_raw = read_block(raw.get("manipulator"), "manipulator", MANIPULATOR_KEYS)
        manipulator = _nested(
            "manipulator", lambda: ManipulatorParams.from_raw_data(manipulator_raw)
        )

        gains_raw = read_block(raw.get("gains"), "gains", GAINS_KEYS)
        smc_raw = read_block(gains_raw.get("smc"), "gains.smc", SMC_KEYS)
        asmc_raw = read_block(gains_raw.get("asmc-nn"), "gains.asmc-nn", SMC_KEYS)
        pd_raw = read_block(gains_raw.get("pd"), "gains.pd", PD_KEYS)

        net_raw = read_block(raw.get("net"), "net", NET_KEYS - {"seed"})
        net = _nested("net", lambda: NetConfig.from_raw_data({**net_raw, "seed": seed}))

        scenarios = dict(defaults.scenarios)
        scenarios_block = raw.get("scenarios")
        names = set(scenarios_block) if isinstance(scenarios_block, dict) else set()
        scenario_raw = read_block(scenarios_block, "scenarios", names)
        for name in sorted(scenario_raw):
            block = scenario_raw[name]
            base = scenarios.get(name)
            scenarios[name] = _nested(
                f"scenarios.{name}",
                lambda name=name, block=block, base=base: ScenarioSpec.from_raw_data(name, block, base),
            )

        config = cls(
            manipulator=manipulator,
            smc_gains=_nested("gains.smc", lambda: SmcGains.from_raw_data(smc_raw)),
            asmc_gains=_nested("gains.asmc-nn", lambda: SmcGains.from_raw_data(asmc_raw)),
            pd_gains=_nested("gains.pd", lambda: PdGains.from_raw_data(pd_raw)),
            net=net,
            scenarios=scenarios,
            output_dir=output_dir,
            seed=seed,
        )
        LOG.debug("Loaded config with scenarios %s", ", ".join(sorted(scenarios)))
        return config

    def to_raw_data(self) -> RawData:
        """Complete JSON-ready document, defaults included."""

        net = self.net.to_raw_data()
        net.pop("seed")
        return {
            "manipulator": self.manipulator.to_raw_data(),
            "gains": {
                ControllerKind.SMC.value: self.smc_gains.to_raw_data(),
                ControllerKind.ASMC_NN.value: self.asmc_gains.to_raw_data(),
                ControllerKind.PD.value: self.pd_gains.to_raw_data(),
            },
            "net": net,
            "scenarios": {name: spec.to_raw_data() for name, spec in sorted(self.scenarios.items())},
            "output_dir": self.output_dir,
            "seed": self.seed,
        }


def default_config() -> WorkbenchConfig:
    """Shipped defaults."""

    return WorkbenchConfig()


def dump_config(config: WorkbenchConfig) -> str:
    """Serialize as indented, key-sorted JSON."""

    return json.dumps(config.to_raw_data(), indent=2, sort_keys=True) + "\n"


def load_config(path: Path | None) -> WorkbenchConfig:
    """Read and validate a config file; None yields the defaults."""

    if path is None:
        return default_config()

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise InvalidConfig("<file>", f"cannot read {path}: {err}") from err
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise InvalidConfig("<file>", f"{path} is not valid JSON: {err}") from err

    LOG.debug("Parsing config %s", path)
    return WorkbenchConfig.from_raw_data(raw)
