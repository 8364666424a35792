"""Tracking metrics, trace export, figures and comparison tables."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass
import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

from matplotlib import rc_context
from matplotlib.figure import Figure
import numpy as np
import pandas as pd

from cylarm.const import (
    LYAPUNOV_START,
    LYAPUNOV_TOL,
    N_JOINTS,
    SETTLING_FRACTION,
    TRACE_COLUMNS,
    TRACKING_THRESHOLD,
)
from cylarm.exceptions import EmptyTrace, OutputError
from cylarm.helpers import format_float
from cylarm.sim import SimTrace

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

    from numpy.typing import ArrayLike, NDArray

LOG = logging.getLogger(__name__)

RMS_WINDOW_START = 0.5
STEADY_START = 1.0

JOINT_LABELS = ("θ₁ [rad]", "q₂ [m]", "q₃ [m]")
ERROR_LABELS = ("e₁ [rad]", "e₂ [m]", "e₃ [m]")

METRIC_NAMES = (
    "rms_error",
    "max_abs_error",
    "settling_time",
    "overshoot_percent",
    "ise",
    "control_effort",
    "recovery_time",
)

SVG_RC = {
    "svg.hashsalt": "cylarm",
    "svg.fonttype": "none",
    "path.simplify": False,
}


@dataclass
class MetricsSummary:
    """Per-joint tracking quality of one trace.

    ``settling_time`` and ``recovery_time`` entries are None when the error
    is still outside the band at the end of the trace. ``recovery_time`` is
    measured from the disturbance onset and is None altogether for runs
    without a disturbance.
    """

    rms_error: tuple[float, ...]
    max_abs_error: tuple[float, ...]
    settling_time: tuple[float | None, ...]
    overshoot_percent: tuple[float, ...]
    ise: tuple[float, ...]
    control_effort: tuple[float, ...]
    threshold: tuple[float, ...]
    recovery_time: tuple[float | None, ...] | None = None

    def metric(self, name: str, joint: int) -> float | None:
        """Return one cell, ``joint`` counted from 1."""

        values = getattr(self, name)
        return None if values is None else values[joint - 1]

    def to_raw_data(self) -> dict[str, Any]:
        """JSON-ready mapping."""

        return asdict(self)


def is_step_trace(trace: SimTrace) -> bool:
    """True when the desired position never moves."""

    return bool(len(trace)) and bool(np.all(trace.q_d == trace.q_d[0]))


def default_threshold(trace: SimTrace) -> NDArray[np.float64]:
    """1% of |target − initial| for steps, an absolute band for tracking."""

    if not is_step_trace(trace):
        return np.full(N_JOINTS, TRACKING_THRESHOLD)
    step = np.abs(trace.q_d[-1] - trace.q[0])
    return np.where(step > 0, SETTLING_FRACTION * step, TRACKING_THRESHOLD)


def _last_exit(
    t: NDArray[np.float64],
    outside: NDArray[np.bool_],
    dt: float,
) -> float | None:
    """Time after which ``outside`` stays False; None if it ends True."""

    if not outside.any():
        return float(t[0]) if len(t) else 0.0
    if outside[-1]:
        return None
    return float(t[np.flatnonzero(outside)[-1]]) + dt


def compute_metrics(
    trace: SimTrace,
    threshold: float | ArrayLike | None = None,
    disturbance_onset: float | None = None,
    window_start: float = RMS_WINDOW_START,
) -> MetricsSummary:
    """Summarize ``trace``.

    RMS and peak error use samples with t >= ``window_start`` (the whole
    trace when it is shorter). Integrals use the trapezoid rule.
    """

    if not len(trace):
        msg = f"trace {trace.scenario}/{trace.controller} has no records"
        raise EmptyTrace(msg)

    t, e, dt = trace.t, trace.e, trace.dt
    band = (
        default_threshold(trace)
        if threshold is None
        else np.broadcast_to(np.asarray(threshold, dtype=float), (N_JOINTS,))
    )
    if np.any(band <= 0):
        msg = "threshold must be > 0"
        raise ValueError(msg)

    window = t >= min(window_start, float(t[-1]))
    steady = e[window]
    rms = np.sqrt(np.mean(steady**2, axis=0))
    peak = np.max(np.abs(steady), axis=0)

    if is_step_trace(trace):
        step = trace.q_d[-1] - trace.q[0]
        overshoot = np.zeros(N_JOINTS)
        moving = step != 0
        beyond = np.max(-e * np.sign(step), axis=0)
        overshoot[moving] = np.maximum(beyond[moving], 0.0) / np.abs(step[moving]) * 100.0
    else:
        overshoot = np.zeros(N_JOINTS)

    outside = np.abs(e) >= band
    settling = tuple(_last_exit(t, outside[:, i], dt) for i in range(N_JOINTS))

    recovery = None
    if disturbance_onset is not None:
        after = t >= disturbance_onset
        recovery = tuple(
            None if (exit_t := _last_exit(t[after], outside[after, i], dt)) is None
            else max(exit_t - disturbance_onset, 0.0)
            for i in range(N_JOINTS)
        )

    return MetricsSummary(
        rms_error=tuple(float(v) for v in rms),
        max_abs_error=tuple(float(v) for v in peak),
        settling_time=settling,
        overshoot_percent=tuple(float(v) for v in overshoot),
        ise=tuple(float(v) for v in np.trapezoid(e**2, t, axis=0)),
        control_effort=tuple(float(v) for v in np.trapezoid(trace.tau**2, t, axis=0)),
        threshold=tuple(float(v) for v in band),
        recovery_time=recovery,
    )


def lyapunov_check(
    trace: SimTrace,
    start: float = LYAPUNOV_START,
    tol: float = LYAPUNOV_TOL,
) -> tuple[bool, str]:
    """Check that the logged V is non-increasing per control sample after ``start``.

    Each step may rise by at most ``tol``.
    """

    if not len(trace) or trace.t[-1] < start:
        return False, "trace ends before the monitoring window"

    index = int(np.argmax(trace.t >= start - 1e-12))
    rises = np.diff(trace.V[index:])
    ok = rises <= tol
    if not ok.all():
        worst = int(np.argmax(rises))
        return False, (
            f"V rose at {int(np.count_nonzero(~ok))} samples after t={start:g}, "
            f"worst {rises[worst]:.3g} at t={trace.t[index + worst + 1]:g}"
        )

    return True, f"V non-increasing per sample from t={start:g}"


def torque_reversals(trace: SimTrace, start: float = STEADY_START) -> tuple[int, ...]:
    """Per joint, how often the torque increment flips sign from ``start`` on.

    A period-two limit cycle scores one reversal per sample.
    """

    steps = np.diff(trace.tau[trace.t >= start], axis=0)
    flips = steps[1:] * steps[:-1] < 0
    return tuple(int(n) for n in np.count_nonzero(flips, axis=0))


def trace_rows(trace: SimTrace) -> NDArray[np.float64]:
    """Trace as a records × columns matrix in CSV order."""

    return np.hstack(trace.columns())


def write_csv(trace: SimTrace, path: Path) -> Path:
    """Export ``trace`` with a header row, shortest round-trip floats and LF endings."""

    frame = pd.DataFrame(trace_rows(trace), columns=TRACE_COLUMNS).map(format_float)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as err:
        msg = f"cannot write trace to {path}: {err}"
        raise OutputError(msg) from err
    return path


def read_csv(path: Path, scenario: str = "", controller: str = "") -> SimTrace:
    """Load a trace written by :func:`write_csv`."""

    try:
        frame = pd.read_csv(path, float_precision="round_trip", encoding="utf-8")
    except (OSError, ValueError) as err:
        msg = f"cannot read trace from {path}: {err}"
        raise OutputError(msg) from err
    if list(frame.columns) != TRACE_COLUMNS:
        msg = f"{path} does not have the trace header"
        raise OutputError(msg)
    try:
        data = frame.to_numpy(dtype=float)
    except ValueError as err:
        msg = f"malformed trace file {path}: {err}"
        raise OutputError(msg) from err

    blocks = [data[:, 1 + 3 * i : 4 + 3 * i] for i in range(9)]
    t = data[:, 0]
    dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
    return SimTrace(
        scenario=scenario,
        controller=controller,
        dt=dt,
        t=t,
        q=blocks[0],
        q_d=blocks[1],
        e=blocks[2],
        s=blocks[3],
        tau=blocks[4],
        tau_eq=blocks[5],
        tau_sw=blocks[6],
        tau_nn=blocks[7],
        f_ext=blocks[8],
        V=data[:, -1],
    )


def write_metrics(summary: MetricsSummary, path: Path) -> Path:
    """Write the summary as sorted, indented JSON."""

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(summary.to_raw_data(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    except OSError as err:
        msg = f"cannot write metrics to {path}: {err}"
        raise OutputError(msg) from err
    return path


def _save_svg(fig: Figure, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with rc_context(SVG_RC):
            fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as err:
        msg = f"cannot write figure to {path}: {err}"
        raise OutputError(msg) from err
    return path


def _stacked_figure(title: str) -> tuple[Figure, Any]:
    fig = Figure(figsize=(7.0, 7.5))
    axes = fig.subplots(N_JOINTS, 1, sharex=True)
    fig.suptitle(title)
    axes[-1].set_xlabel("t [s]")
    return fig, axes


def response_figure(scenario: str, traces: Iterable[SimTrace]) -> Figure:
    """Joint positions against the desired trajectory, one subplot per joint."""

    traces = list(traces)
    with rc_context(SVG_RC):
        fig, axes = _stacked_figure(f"{scenario}: joint responses")
        for joint, ax in enumerate(axes):
            ax.plot(traces[0].t, traces[0].q_d[:, joint], "k--", linewidth=1.0, label="desired")
            for trace in traces:
                ax.plot(trace.t, trace.q[:, joint], linewidth=1.2, label=trace.controller)
            ax.set_ylabel(JOINT_LABELS[joint])
            ax.grid(visible=True, linestyle=":", linewidth=0.5)
        axes[0].legend(loc="best", fontsize="small")
        fig.tight_layout()
    return fig


def error_figure(scenario: str, traces: Iterable[SimTrace]) -> Figure:
    """Tracking errors with the settling band, one subplot per joint."""

    traces = list(traces)
    band = default_threshold(traces[0])
    with rc_context(SVG_RC):
        fig, axes = _stacked_figure(f"{scenario}: tracking errors")
        for joint, ax in enumerate(axes):
            for trace in traces:
                ax.plot(trace.t, trace.e[:, joint], linewidth=1.2, label=trace.controller)
            for level in (band[joint], -band[joint]):
                ax.axhline(level, color="grey", linestyle=":", linewidth=0.8)
            ax.set_ylabel(ERROR_LABELS[joint])
            ax.grid(visible=True, linestyle=":", linewidth=0.5)
        axes[0].legend(loc="best", fontsize="small")
        fig.tight_layout()
    return fig


def render_figures(traces: Iterable[SimTrace], out_dir: Path) -> list[Path]:
    """Write a response and an error SVG per scenario, controllers overlaid."""

    by_scenario: dict[str, list[SimTrace]] = defaultdict(list)
    for trace in traces:
        by_scenario[trace.scenario].append(trace)
    if not by_scenario:
        msg = "need at least one trace to draw"
        raise ValueError(msg)

    paths = []
    for scenario in sorted(by_scenario):
        group = sorted(by_scenario[scenario], key=lambda tr: tr.controller)
        stem = "-".join(tr.controller for tr in group)
        paths.append(_save_svg(response_figure(scenario, group), out_dir / f"{scenario}_{stem}_response.svg"))
        paths.append(_save_svg(error_figure(scenario, group), out_dir / f"{scenario}_{stem}_error.svg"))
        LOG.debug("Wrote figures for %s (%s)", scenario, stem)
    return paths


def _cell(value: float | None) -> str:
    return "n/a" if value is None else format_float(value)


def comparison_rows(summaries: Mapping[str, MetricsSummary]) -> list[tuple[str, int, str, str]]:
    """One (controller, joint, metric, value) row per cell, controllers sorted."""

    if len(summaries) < 2:
        msg = "comparison needs at least two controllers"
        raise ValueError(msg)

    return [
        (controller, joint, name, _cell(summaries[controller].metric(name, joint)))
        for controller in sorted(summaries)
        for joint in range(1, N_JOINTS + 1)
        for name in METRIC_NAMES
    ]


def comparison_table(summaries: Mapping[str, MetricsSummary]) -> tuple[str, str]:
    """Return an aligned text table and its CSV twin."""

    rows = comparison_rows(summaries)
    header = ("controller", "joint", "metric", "value")

    cells = [header, *((c, str(j), m, v) for c, j, m, v in rows)]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    text = "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths, strict=True)).rstrip()
        for row in cells
    )

    table = pd.DataFrame(rows, columns=list(header))
    return text + "\n", table.to_csv(index=False, lineterminator="\n")


def write_comparison(
    summaries: Mapping[str, MetricsSummary],
    out_dir: Path,
    scenario: str,
) -> tuple[Path, Path]:
    """Write the comparison table as text and CSV."""

    text, csv_text = comparison_table(summaries)
    text_path = out_dir / f"{scenario}_comparison.txt"
    csv_path = out_dir / f"{scenario}_comparison.csv"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        text_path.write_bytes(text.encode("utf-8"))
        csv_path.write_bytes(csv_text.encode("utf-8"))
    except OSError as err:
        msg = f"cannot write comparison to {out_dir}: {err}"
        raise OutputError(msg) from err
    return text_path, csv_path
