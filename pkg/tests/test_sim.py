"""Define tests for the closed-loop simulation."""

from dataclasses import replace
import math

import numpy as np
import pytest

from cylarm.const import (
    CONSTANT_TARGETS,
    ControllerKind,
    PlantModel,
    ReferenceKind,
    SwitchingLaw,
)
from cylarm.control import PdGains, SmcGains
from cylarm.dynamics import ManipulatorParams, gravity_vector, reference_inertia
from cylarm.exceptions import InvalidConfig, NonFinite, SimulationAborted, SingularInertia
from cylarm.report import compute_metrics, torque_reversals, trace_rows
from cylarm.sim import (
    DisturbanceProfile,
    ReferenceSignal,
    ScenarioSpec,
    _control,
    async_run_controllers,
    perturb_params,
    rk4_step,
    run_scenario,
    standard_scenarios,
)


def oscillator(_t, y):
    return np.array([y[1], -y[0]])


def test_rk4_full_period():
    steps = 6283
    dt = 2.0 * math.pi / steps
    x = np.array([1.0, 0.0])
    for n in range(steps):
        x = rk4_step(oscillator, x, n * dt, dt)
    assert abs(x[0] - 1.0) < 1e-8


def test_rk4_zero_derivative():
    x = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(rk4_step(lambda _t, y: np.zeros_like(y), x, 0.0, 0.1), x)


def test_rk4_order():
    def local_error(dt):
        step = rk4_step(oscillator, np.array([1.0, 0.0]), 0.0, dt)
        return np.linalg.norm(step - [math.cos(dt), -math.sin(dt)])

    assert 28.0 <= local_error(0.1) / local_error(0.05) <= 36.0


def test_rk4_rejects_step():
    with pytest.raises(ValueError, match="dt"):
        rk4_step(oscillator, np.zeros(2), 0.0, -1e-3)


def test_perturb_params(params):
    assert perturb_params(params, (1.0, 1.0, 1.0)) == params

    doubled = perturb_params(params, (2.0, 1.0, 1.0))
    assert doubled.m1 == pytest.approx(2 * params.m1)
    assert (doubled.m2, doubled.m3, doubled.l2, doubled.g) == (
        params.m2,
        params.m3,
        params.l2,
        params.g,
    )

    heavy = perturb_params(params, (1.0, 2.0, 1.0))
    ratio = (2 * params.m2 + params.m3) / (params.m2 + params.m3)
    assert gravity_vector(heavy)[1] == pytest.approx(ratio * gravity_vector(params)[1])

    with pytest.raises(ValueError, match="> 0"):
        perturb_params(params, (1.0, 0.0, 1.0))


def test_standard_scenarios():
    specs = standard_scenarios()
    assert [s.name for s in specs] == ["constant", "uncertain", "sinusoidal", "disturbance"]
    for spec in specs:
        assert spec.horizon == 2.0
        assert spec.dt == 1e-3
        assert spec.initial_q == (0.0, 0.0, 0.0)
        assert spec.n_steps == 2000

    constant, uncertain, sinusoidal, disturbance = specs
    assert constant.reference.at(1.0).q_d == pytest.approx(CONSTANT_TARGETS)
    assert uncertain.plant_perturbation == (1.2, 0.8, 1.2)
    assert sinusoidal.reference.at(0.25).q_d == pytest.approx([1.0, 1.0, 1.0])
    assert sinusoidal.reference.at(0.0).qdot_d == pytest.approx([2 * math.pi] * 3)
    assert disturbance.disturbance.force(0.4) == pytest.approx([0.0, 0.0, 0.0])
    assert disturbance.disturbance.force(0.6) == pytest.approx([0.0, 0.0, 50.0])


def test_sinusoid_derivatives_are_exact():
    ref = ReferenceSignal(kind=ReferenceKind.SINUSOID, amplitude=(2.0, 1.0, 0.5), frequency=(1.0, 0.5, 2.0))
    t, h = 0.37, 1e-5
    point = ref.at(t)
    fd_vel = (ref.at(t + h).q_d - ref.at(t - h).q_d) / (2 * h)
    fd_acc = (ref.at(t + h).qdot_d - ref.at(t - h).qdot_d) / (2 * h)
    assert point.qdot_d == pytest.approx(fd_vel, rel=1e-6)
    assert point.qddot_d == pytest.approx(fd_acc, rel=1e-6)


def test_custom_table_reference():
    ref = ReferenceSignal.from_raw_data(
        {
            "kind": "custom-table",
            "knots": [
                {"t": 0.0, "q": [0.0, 0.0, 0.0]},
                {"t": 1.0, "q": [1.0, 0.5, 0.2], "qdot": [0.0, 0.0, 0.0]},
                {"t": 2.0, "q": [0.0, 1.0, 0.4]},
            ],
        },
    )
    assert ref.at(1.0).q_d == pytest.approx([1.0, 0.5, 0.2])
    assert ref.at(0.5).q_d[0] == pytest.approx(0.5)
    held = ref.at(3.0)
    assert held.q_d == pytest.approx([0.0, 1.0, 0.4])
    assert held.qdot_d == pytest.approx(np.zeros(3))
    assert not ref.is_step
    assert ReferenceSignal.from_raw_data(ref.to_raw_data()) == ref


@pytest.mark.parametrize(
    ("raw", "key_path"),
    [
        ({"kind": "ramp"}, "reference.kind"),
        ({"kind": "custom-table"}, "reference.knots"),
        ({"kind": "custom-table", "knots": [{"t": 0.0, "q": [0, 0, 0]}]}, "reference.knots"),
        (
            {"kind": "custom-table", "knots": [{"t": 1.0, "q": [0, 0, 0]}, {"t": 1.0, "q": [1, 1, 1]}]},
            "reference.knots",
        ),
        ({"kind": "custom-table", "knots": [{"t": 0.0}, {"t": 1.0}]}, "reference.knots[0].q"),
        ({"period": 1.0}, "reference.period"),
    ],
)
def test_reference_rejects(raw, key_path):
    with pytest.raises(InvalidConfig) as err:
        ReferenceSignal.from_raw_data(raw)
    assert err.value.key_path == key_path


def test_pulse_disturbance():
    pulse = DisturbanceProfile.from_raw_data({"shape": "pulse", "duration": 0.1, "joint": 1})
    assert pulse.force(0.55) == pytest.approx([50.0, 0.0, 0.0])
    assert pulse.force(0.65) == pytest.approx(np.zeros(3))
    with pytest.raises(InvalidConfig, match="duration"):
        DisturbanceProfile.from_raw_data({"shape": "pulse"})
    with pytest.raises(InvalidConfig, match="joint"):
        DisturbanceProfile.from_raw_data({"joint": 4})


def test_scenario_spec_override(scenarios):
    spec = ScenarioSpec.from_raw_data(
        "disturbance",
        {"horizon": 1.0, "disturbance": {"magnitude": 20.0}},
        scenarios["disturbance"],
    )
    assert spec.horizon == 1.0
    assert spec.disturbance.magnitude == 20.0
    assert spec.reference == scenarios["disturbance"].reference
    assert ScenarioSpec.from_raw_data("disturbance", spec.to_raw_data()) == spec


@pytest.mark.parametrize(
    ("raw", "key_path"),
    [
        ({"dt": 3.0}, "dt"),
        ({"horizon": 0}, "horizon"),
        ({"plant_perturbation": [1.0, -1.0, 1.0]}, "plant_perturbation"),
        ({"plant_model": "nominal"}, "plant_model"),
        ({"gains": {}}, "gains"),
    ],
)
def test_scenario_spec_rejects(raw, key_path):
    with pytest.raises(InvalidConfig) as err:
        ScenarioSpec.from_raw_data("custom", raw)
    assert err.value.key_path == key_path


@pytest.mark.parametrize("controller", list(ControllerKind))
def test_trace_well_formed(short_spec, controller):
    trace = run_scenario(short_spec, controller)
    assert len(trace) == short_spec.n_steps + 1 == 251
    assert np.allclose(np.diff(trace.t), short_spec.dt, rtol=0, atol=1e-12)
    assert np.array_equal(trace.tau, trace.tau_eq + trace.tau_sw + trace.tau_nn)
    assert trace_rows(trace).shape == (251, 29)
    assert (trace.weights is not None) == (controller is ControllerKind.ASMC_NN)


def test_start_on_reference_stays_there():
    spec = replace(standard_scenarios()[0], initial_q=CONSTANT_TARGETS, horizon=0.5)
    trace = run_scenario(spec, ControllerKind.ASMC_NN)
    assert np.max(np.abs(trace.e)) < 1e-6


def test_constant_scenario_settles(constant_asmc_trace):
    """Test the half-second settling of the adaptive controller."""
    trace = constant_asmc_trace
    late = trace.t >= 0.5
    band = 0.01 * np.abs(np.array(CONSTANT_TARGETS))
    assert np.all(np.abs(trace.e[late]) < band)
    summary = compute_metrics(trace)
    assert max(summary.overshoot_percent) < 1.0


def test_runs_are_deterministic(short_spec):
    first = run_scenario(short_spec, ControllerKind.ASMC_NN)
    second = run_scenario(short_spec, ControllerKind.ASMC_NN)
    assert np.array_equal(trace_rows(first), trace_rows(second))
    assert np.array_equal(first.weights, second.weights)


def test_disturbance_matches_constant_before_onset(scenarios):
    constant = run_scenario(replace(scenarios["constant"], horizon=0.6), ControllerKind.SMC)
    disturbed = run_scenario(replace(scenarios["disturbance"], horizon=0.6), ControllerKind.SMC)
    before = constant.t < 0.5
    assert np.array_equal(trace_rows(constant)[before], trace_rows(disturbed)[before])
    assert disturbed.f_ext[-1, 2] == 50.0


def test_controller_sees_nominal_params(scenarios):
    """Test that mass perturbation only reaches the plant."""
    nominal = run_scenario(replace(scenarios["constant"], horizon=0.05), ControllerKind.SMC)
    perturbed = run_scenario(replace(scenarios["uncertain"], horizon=0.05), ControllerKind.SMC)
    assert np.array_equal(nominal.tau[0], perturbed.tau[0])
    assert not np.array_equal(nominal.q[-1], perturbed.q[-1])


def test_sinusoidal_ordering(scenarios):
    """Test RMS(asmc-nn) <= RMS(smc) <= RMS(pd) per joint on the sinusoid."""
    spec = scenarios["sinusoidal"]
    rms = {kind: np.array(compute_metrics(run_scenario(spec, kind)).rms_error) for kind in ControllerKind}
    assert np.all(rms[ControllerKind.ASMC_NN] <= rms[ControllerKind.SMC] + 1e-9)
    assert np.all(rms[ControllerKind.SMC] <= rms[ControllerKind.PD] + 1e-9)


def test_disturbance_recovery(scenarios):
    spec = scenarios["disturbance"]
    onset = spec.disturbance.onset
    asmc = compute_metrics(run_scenario(spec, ControllerKind.ASMC_NN), disturbance_onset=onset)
    smc = compute_metrics(run_scenario(spec, ControllerKind.SMC), disturbance_onset=onset)
    assert asmc.recovery_time[2] is not None
    assert asmc.recovery_time[2] <= 0.5
    assert smc.recovery_time[2] is not None
    assert asmc.recovery_time[2] <= smc.recovery_time[2] + 1e-9


def test_torque_clamp(short_spec):
    spec = replace(short_spec, torque_clamp=(100.0, 500.0, 100.0))
    trace = run_scenario(spec, ControllerKind.SMC)
    assert np.all(np.abs(trace.tau) <= np.array(spec.torque_clamp))
    assert np.any(trace.tau_eq + trace.tau_sw != trace.tau)


def test_abort_on_singular_plant(short_spec):
    params = ManipulatorParams()
    spec = replace(
        short_spec,
        plant_model=PlantModel.PRINTED,
        initial_q=(0.0, 0.0, 1.0 / (4.0 * params.m2)),
    )
    with pytest.raises(SimulationAborted) as err:
        run_scenario(spec, ControllerKind.SMC, params)
    assert isinstance(err.value.cause, SingularInertia)
    assert len(err.value.trace) == 1
    assert "t=0" in str(err.value)


def test_abort_with_flipped_reaching_sign(short_spec):
    with pytest.raises(SimulationAborted) as err:
        run_scenario(short_spec, ControllerKind.SMC, gains=SmcGains(reaching_sign=-1))
    assert isinstance(err.value.cause, NonFinite)
    assert 1 < len(err.value.trace) < short_spec.n_steps + 1


@pytest.mark.asyncio()
async def test_async_run_controllers(short_spec):
    traces = await async_run_controllers(
        short_spec,
        ["smc", ControllerKind.PD, "asmc-nn", "smc"],
        gains={"smc": SmcGains(), "asmc-nn": SmcGains()},
    )
    assert list(traces) == ["asmc-nn", "pd", "smc"]
    for name, trace in traces.items():
        assert trace.controller == name
        alone = run_scenario(short_spec, name)
        assert np.array_equal(trace_rows(trace), trace_rows(alone))


def test_boundary_layer_gain_below_one(params):
    """Test k·dt/(ε·m) < 1 on every joint at the constant targets."""
    gains = SmcGains()
    dt = standard_scenarios()[0].dt
    mass = np.diag(reference_inertia(params, CONSTANT_TARGETS))
    assert np.all(np.array(gains.k) * dt / (gains.epsilon * mass) < 1.0)


def test_steady_torque_does_not_chatter(constant_smc_trace, constant_asmc_trace):
    """Test that the settled torque is no period-two limit cycle."""
    for trace in (constant_smc_trace, constant_asmc_trace):
        assert max(torque_reversals(trace)) <= 5
        settled = trace.tau[trace.t >= 1.0]
        assert np.all(np.ptp(settled, axis=0) < 5.0)


def _surface_steps(trace, start=0.05):
    """s at every sample from ``start`` on, paired with s one sample later."""
    window = trace.t[:-1] >= start
    now, nxt = trace.s[:-1][window], trace.s[1:][window]
    return now, nxt


@pytest.mark.parametrize("name", ["constant", "disturbance"])
def test_surface_norm_shrinks_outside_layer(scenarios, name):
    """Test that ‖s‖ decreases at every sample outside the boundary layer.

    The first 0.05 s are left out: joint 1 starts at q₃ = 0 where its
    inertia is I₃ and the saturated switching term overshoots the surface.
    """
    gains = SmcGains()
    trace = run_scenario(scenarios[name], ControllerKind.SMC, gains=gains)
    now, nxt = _surface_steps(trace)
    norm_now, norm_next = np.linalg.norm(now, axis=1), np.linalg.norm(nxt, axis=1)
    outside = norm_now > gains.epsilon
    assert np.count_nonzero(outside) > 10
    assert np.all(norm_next[outside] < norm_now[outside])


def test_reaching_condition_per_joint(constant_smc_trace):
    """Test s_i·Δs_i < 0 and |s_i| shrinking wherever |s_i| > ε."""
    epsilon = SmcGains().epsilon
    now, nxt = _surface_steps(constant_smc_trace)
    outside = np.abs(now) > epsilon
    assert outside.any()
    assert np.all((now * (nxt - now))[outside] < 0.0)
    assert np.all(np.abs(nxt)[outside] < np.abs(now)[outside])


def test_sign_law_chatters_more(constant_smc_trace, scenarios):
    """Test that the boundary layer removes the chattering of sign(s)."""
    sign = run_scenario(
        scenarios["constant"],
        ControllerKind.SMC,
        gains=SmcGains(switching=SwitchingLaw.SIGN),
    )
    smoothed_reversals = sum(torque_reversals(constant_smc_trace))
    sign_reversals = sum(torque_reversals(sign))
    assert smoothed_reversals <= 5
    assert sign_reversals > 100 * max(smoothed_reversals, 1)
    assert np.ptp(sign.tau[sign.t >= 1.0], axis=0).max() > 1e3


def test_adaptive_control_needs_approximator(params, state):
    ref = standard_scenarios()[0].reference.at(0.0)
    with pytest.raises(ValueError, match="approximator"):
        _control(ControllerKind.ASMC_NN, params, state, ref, SmcGains(), PdGains(), None)
    out = _control(ControllerKind.SMC, params, state, ref, SmcGains(), PdGains(), None)
    assert np.array_equal(out.tau_nn, np.zeros(3))
