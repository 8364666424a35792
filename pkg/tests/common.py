"""Define shared test helpers."""

from __future__ import annotations

import json
import pathlib
from typing import Any

import numpy as np

from cylarm.sim import SimTrace


def get_fixture_path(filename: str) -> pathlib.Path:
    """Get path of fixture."""
    return pathlib.Path(__file__).parent.joinpath("../fixtures", filename)


def load_fixture(filename):
    """Load a fixture."""
    return get_fixture_path(filename).read_text(encoding="utf-8")


def load_json_fixture(filename) -> Any:
    """Load and parse a JSON fixture."""
    return json.loads(load_fixture(filename))


def synthetic_trace(t, e, q_d=None, tau=None, dt=None, controller="test") -> SimTrace:
    """Build a trace whose error is ``e`` against a fixed or given target."""
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    if e.ndim == 1:
        e = np.column_stack([e, e, e])
    n = len(t)
    q_d = np.zeros((n, 3)) if q_d is None else np.asarray(q_d, dtype=float)
    zeros = np.zeros((n, 3))
    return SimTrace(
        scenario="synthetic",
        controller=controller,
        dt=float(t[1] - t[0]) if dt is None else dt,
        t=t,
        q=q_d - e,
        q_d=q_d,
        e=e,
        s=zeros.copy(),
        tau=zeros.copy() if tau is None else np.asarray(tau, dtype=float),
        tau_eq=zeros.copy(),
        tau_sw=zeros.copy(),
        tau_nn=zeros.copy(),
        f_ext=zeros.copy(),
        V=np.zeros(n),
    )
