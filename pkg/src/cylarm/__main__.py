"""Command-line entry point of the workbench."""

from __future__ import annotations

import argparse
import asyncio
import logging
import os
from pathlib import Path
import sys
from typing import TYPE_CHECKING

from cylarm.config import WorkbenchConfig, default_config, dump_config, load_config
from cylarm.const import DEFAULT_OUT_DIR, OUT_DIR_ENV, ControllerKind
from cylarm.exceptions import InvalidConfig, OutputError, SimulationAborted
from cylarm.netapprox import NetApproximator
from cylarm.report import (
    compute_metrics,
    render_figures,
    write_comparison,
    write_csv,
    write_metrics,
)
from cylarm.sim import SimTrace, async_run_controllers, run_scenario
from cylarm.verify import run_checks

if TYPE_CHECKING:
    from cylarm.sim import ScenarioSpec

LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_ABORTED = 3
EXIT_CHECKS = 4

CONTROLLER_NAMES = [kind.value for kind in ControllerKind]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with the simulate, compare and verify commands."""

    parser = argparse.ArgumentParser(
        prog="cylarm",
        description="Closed-loop tracking workbench for a 3-DOF cylindrical manipulator.",
        epilog=(
            "exit codes: 0 success, 1 output error, 2 config error, "
            "3 simulation aborted, 4 verification failed"
        ),
    )
    parser.add_argument(
        "--print-defaults",
        action="store_true",
        help="print the complete default config as JSON and exit",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug output")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON config file")

    outputs = argparse.ArgumentParser(add_help=False)
    outputs.add_argument(
        "--out",
        type=Path,
        default=None,
        help=f"output directory (default: ${OUT_DIR_ENV}, then the config, then ./{DEFAULT_OUT_DIR})",
    )
    outputs.add_argument("--scenario", required=True, help="scenario name")

    commands = parser.add_subparsers(dest="command")

    simulate = commands.add_parser(
        "simulate",
        parents=[common, outputs],
        help="run one controller on one scenario",
    )
    simulate.add_argument("--controller", required=True, choices=CONTROLLER_NAMES)
    simulate.add_argument(
        "--save-weights",
        action="store_true",
        help="also write the final network weights (asmc-nn only)",
    )

    compare = commands.add_parser(
        "compare",
        parents=[common, outputs],
        help="run several controllers on one scenario and tabulate them",
    )
    compare.add_argument(
        "--controllers",
        required=True,
        help=f"comma-separated list drawn from {', '.join(CONTROLLER_NAMES)}",
    )

    commands.add_parser("verify", parents=[common], help="run the numerical checks")
    return parser


def resolve_out_dir(cli_value: Path | None, config: WorkbenchConfig) -> Path:
    """--out, then the environment, then the config file."""

    if cli_value is not None:
        return cli_value
    if env_value := os.environ.get(OUT_DIR_ENV):
        return Path(env_value)
    return Path(config.output_dir)


def parse_controllers(raw: str) -> list[ControllerKind]:
    """Split and validate a --controllers value."""

    names = [name.strip() for name in raw.split(",") if name.strip()]
    kinds = []
    for name in names:
        try:
            kinds.append(ControllerKind(name))
        except ValueError as err:
            valid = ", ".join(CONTROLLER_NAMES)
            raise InvalidConfig("controllers", f"unknown controller {name!r} (valid: {valid})") from err
    if len(set(kinds)) < 2:
        raise InvalidConfig("controllers", "compare needs at least two distinct controllers")
    return sorted(set(kinds), key=lambda kind: kind.value)


def _onset(spec: ScenarioSpec) -> float | None:
    return spec.disturbance.onset if spec.disturbance is not None else None


def _write_partial(trace: SimTrace, out_dir: Path) -> None:
    try:
        write_csv(trace, out_dir / f"{trace.scenario}_{trace.controller}_partial.csv")
    except OutputError as err:
        LOG.debug("Partial trace not written: %s", err)


def cmd_simulate(args: argparse.Namespace) -> int:
    """Run one scenario and write its trace, metrics and figures."""

    config = load_config(args.config)
    spec = config.scenario(args.scenario)
    controller = ControllerKind(args.controller)
    out_dir = resolve_out_dir(args.out, config)
    stem = f"{spec.name}_{controller.value}"

    try:
        trace = run_scenario(
            spec,
            controller,
            config.manipulator,
            config.gains_for(controller),
            config.pd_gains,
            config.net,
        )
    except SimulationAborted as err:
        _write_partial(err.trace, out_dir)
        print(f"simulation aborted: {err}", file=sys.stderr)
        return EXIT_ABORTED

    summary = compute_metrics(trace, disturbance_onset=_onset(spec))
    written = [
        write_csv(trace, out_dir / f"{stem}.csv"),
        write_metrics(summary, out_dir / f"{stem}_metrics.json"),
        *render_figures([trace], out_dir),
    ]
    if args.save_weights and controller is ControllerKind.ASMC_NN and trace.weights is not None:
        weights_path = out_dir / f"{stem}_weights.csv"
        NetApproximator(config.net).set_weights(trace.weights).dump_weights(weights_path)
        written.append(weights_path)

    for path in written:
        print(path)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    """Run several controllers concurrently and write the comparison."""

    config = load_config(args.config)
    spec = config.scenario(args.scenario)
    kinds = parse_controllers(args.controllers)
    out_dir = resolve_out_dir(args.out, config)

    try:
        traces = asyncio.run(
            async_run_controllers(
                spec,
                kinds,
                config.manipulator,
                {kind.value: config.gains_for(kind) for kind in kinds},
                config.pd_gains,
                config.net,
            ),
        )
    except SimulationAborted as err:
        _write_partial(err.trace, out_dir)
        print(f"simulation aborted: {err}", file=sys.stderr)
        return EXIT_ABORTED

    summaries = {
        name: compute_metrics(trace, disturbance_onset=_onset(spec))
        for name, trace in traces.items()
    }
    text_path, csv_path = write_comparison(summaries, out_dir, spec.name)
    written = [
        *(write_csv(trace, out_dir / f"{spec.name}_{name}.csv") for name, trace in traces.items()),
        *render_figures(traces.values(), out_dir),
        text_path,
        csv_path,
    ]

    print(text_path.read_text(encoding="utf-8"), end="")
    for path in written:
        print(path)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    """Run every numerical check and report each one."""

    config = load_config(args.config)
    results = run_checks(config)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.name}: {result.detail}")

    lyapunov = next(r for r in results if r.name == "lyapunov_monitor")
    if not lyapunov.passed and config.asmc_gains.reaching_sign == -1:
        print(
            "note: reaching_sign=-1 applies the switching term with the sign written "
            "next to e = q_d - q; with that error convention it pushes away from the "
            "sliding surface. The shipped default is +1.",
        )

    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed", file=sys.stderr)
        return EXIT_CHECKS
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    """Parse arguments, dispatch, and map errors onto exit codes."""

    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    if args.print_defaults:
        print(dump_config(default_config()), end="")
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG

    try:
        return COMMANDS[args.command](args)
    except InvalidConfig as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as err:
        print(f"output error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
