from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from lsmrac import compute_metrics, run_scenario
from lsmrac.adaptive_laws import ProjectionBounds
from lsmrac.exceptions import ContractViolationError, HorizonMismatchError, SimulationAbortedError
from lsmrac.sim_engine import (
    AdaptationSpec,
    PlantSpec,
    ReferenceSpec,
    RobotScenario,
    RobotSpec,
    compare_runs,
    compare_traces,
)
from lsmrac.system_models import ConstantInput, SinusoidInput
from lsmrac_sim.presets import three_robot_scenario, single_robot_nominal


def _synthetic_scenario(steps=400, **adaptation):
    """Second-order single-input plant with an exactly matched reference."""
    options = {"kappa": 1.0, "projection": False, "theta0_fraction": 0.9}
    options.update(adaptation)
    return RobotScenario(
        plant=PlantSpec(A=np.array([[1.0, 0.1], [-0.2, 0.9]]), B=np.array([[0.0], [0.1]])),
        reference=ReferenceSpec(K1=np.array([[-1.0], [-3.0]]), K2=np.array([[2.0]])),
        robots=(
            RobotSpec(
                x0=(1.0, -0.5),
                reference_input=SinusoidInput(amplitude=(1.0,), omega=0.3, phase=(0.0,)),
            ),
        ),
        adaptation=AdaptationSpec(**options),
        ca_enabled=False,
        steps=steps,
        theta_star_known=True,
        name="synthetic",
    )


def _assert_traces_equal(a, b):
    for name in ("x", "x_m", "xhat", "u", "u_track", "F_r", "alpha", "eps_norm", "xi_max",
                 "suspended", "theta", "p_trace", "V", "min_surface_distance"):
        assert_array_equal(getattr(a, name), getattr(b, name), err_msg=name)


def test_runs_are_deterministic():
    scenario = three_robot_scenario(steps=200)
    first, _ = run_scenario(scenario)
    second, _ = run_scenario(scenario)
    _assert_traces_equal(first, second)


def test_trace_shapes():
    trace, metrics = run_scenario(three_robot_scenario(steps=50))
    assert trace.steps == 50
    assert trace.robots == 3
    assert trace.x.shape == (50, 3, 4)
    assert trace.theta.shape == (50, 3, 10)
    assert trace.robot(1)["u"].shape == (50, 2)
    assert metrics.steps == 50
    assert len(metrics.robots) == 3
    assert not np.isnan(trace.p_trace).any()
    assert np.isnan(trace.V).all()


def test_adaptation_pauses_while_repelled(head_on):
    trace, metrics = run_scenario(head_on(ca_enabled=True))
    assert trace.suspended.any()
    assert_array_equal(trace.suspended, np.any(trace.F_r != 0.0, axis=2))
    for t, i in zip(*np.nonzero(trace.suspended)):
        if t == 0:
            continue
        assert_array_equal(trace.theta[t, i], trace.theta[t - 1, i])
        assert trace.p_trace[t, i] == trace.p_trace[t - 1, i]
    assert metrics.robots[0].suspended_steps == int(trace.suspended[:, 0].sum())


def test_applied_input_blends_repulsion(head_on):
    trace, _ = run_scenario(head_on(ca_enabled=True))
    expected = trace.F_r + trace.alpha[..., None] * trace.u_track
    assert_allclose(trace.u, expected, rtol=0.0, atol=1e-12)
    assert np.all((trace.alpha >= 0.0) & (trace.alpha <= 1.0))


def test_head_on_robots_collide_without_avoidance(head_on):
    _, off = run_scenario(head_on(ca_enabled=False))
    _, on = run_scenario(head_on(ca_enabled=True))
    assert off.collision
    assert off.min_surface_distance < 0.0
    assert not on.collision
    assert on.min_surface_distance >= 0.0


def test_estimator_follows_reference_without_avoidance():
    trace, _ = run_scenario(three_robot_scenario(ca_enabled=False, steps=600))
    assert np.max(np.abs(trace.xhat - trace.x_m)) < 1e-10
    assert not trace.suspended.any()
    assert_array_equal(trace.alpha, 1.0)


def test_nominal_robot_tracks_exactly():
    trace, metrics = run_scenario(single_robot_nominal(steps=500))
    assert np.max(np.abs(trace.error)) < 1e-10
    robot = metrics.robots[0]
    assert robot.convergence_step == 0
    assert robot.tail_max_error < 1e-10
    assert robot.suspended_steps == 0
    assert metrics.min_surface_distance == float("inf")
    assert not metrics.collision
    assert robot.accel_max == pytest.approx(robot.input_max / 18.0)


def test_lyapunov_function_decreases_by_reported_amount():
    trace, _ = run_scenario(_synthetic_scenario())
    V = trace.V[:, 0]
    decrement = trace.decrement[:, 0]
    assert np.isfinite(V).all()
    assert np.all(decrement[:-1] >= 0.0)
    residual = np.abs(V[1:] - V[:-1] + decrement[:-1])
    assert np.all(residual <= 1e-9 + 1e-6 * V[:-1])
    assert np.all(np.diff(V) <= 1e-9)
    assert V[-1] < V[0]


def test_gradient_run_has_no_covariance():
    trace, metrics = run_scenario(_synthetic_scenario(algorithm="gradient"))
    assert np.isnan(trace.p_trace).all()
    assert np.isnan(trace.V).all()
    assert metrics.algorithm == "gradient"


def test_frozen_adaptation_keeps_theta():
    trace, _ = run_scenario(_synthetic_scenario(steps=300))
    frozen, _ = run_scenario(replace(_synthetic_scenario(steps=300),
                                     freeze_adaptation_after=100))
    assert_array_equal(frozen.theta[:100], trace.theta[:100])
    assert_array_equal(frozen.theta[100:], np.broadcast_to(frozen.theta[99], frozen.theta[100:].shape))


def test_projection_holds_theta2_above_floor():
    scenario = _synthetic_scenario(steps=2000, projection=True, theta0_fraction=0.2)
    _, params, _ = scenario.reference.build(scenario.plant.build())
    bounds = ProjectionBounds.from_matching(params)
    trace, _ = run_scenario(scenario)
    n = 2
    theta2 = trace.theta[:, :, n :: n + 1]
    assert np.all(bounds.signs * theta2 >= bounds.floor)


def test_parameter_steps_are_square_summable():
    trace, _ = run_scenario(_synthetic_scenario(steps=10_000))
    step_sq = np.sum(np.diff(trace.theta[:, 0], axis=0) ** 2, axis=1)
    total = float(step_sq.sum())
    assert total > 0.0
    assert float(step_sq[-1000:].sum()) < 0.01 * total


def test_unstable_loop_aborts():
    scenario = RobotScenario(
        plant=PlantSpec(A=np.array([[1.5]]), B=np.array([[1.0]])),
        reference=ReferenceSpec(K1=np.array([[-1.0]]), K2=np.array([[1.0]])),
        robots=(RobotSpec(x0=(1.0,), reference_input=ConstantInput((0.0,))),),
        adaptation=AdaptationSpec(theta0=(1.0, 1.0), projection=False),
        ca_enabled=False,
        steps=2000,
        freeze_adaptation_after=0,
    )
    with np.errstate(all="ignore"):
        with pytest.raises(SimulationAbortedError) as info:
            run_scenario(scenario)
    assert info.value.robot == 0
    assert 0 < info.value.step < 2000


def test_scenario_validation():
    with pytest.raises(ContractViolationError):
        run_scenario(replace(three_robot_scenario(), steps=0))
    with pytest.raises(ContractViolationError):
        run_scenario(replace(three_robot_scenario(), robots=()))
    with pytest.raises(ContractViolationError):
        run_scenario(replace(_synthetic_scenario(), ca_enabled=True))
    with pytest.raises(ContractViolationError):
        AdaptationSpec(algorithm="kalman")
    with pytest.raises(ContractViolationError):
        AdaptationSpec(gradient_gain=2.0)


def test_rows_are_step_major(head_on):
    trace, _ = run_scenario(head_on(ca_enabled=True, steps=5))
    rows = trace.rows()
    assert len(rows) == 44
    assert list(rows)[:4] == ["step", "robot", "t_s", "x_0"]
    assert all(len(column) == 10 for column in rows.values())
    assert_array_equal(rows["step"], [0, 0, 1, 1, 2, 2, 3, 3, 4, 4])
    assert_array_equal(rows["robot"], [0, 1] * 5)
    assert_allclose(rows["x_0"], trace.x[:, :, 0].reshape(-1))
    assert "theta_9" in rows
    slim = trace.rows(include_theta=False)
    assert len(slim) == 34
    assert "F_r_1" in slim and "theta_0" not in slim


def test_compare_identical_runs():
    scenario = three_robot_scenario(steps=100)
    report = compare_runs(scenario, scenario, metric="eps_norm")
    assert report.deltas["series_max_abs_delta"] == 0.0
    assert report.deltas["final_tracking_error_norm_delta"] == [0.0, 0.0, 0.0]
    assert report.series_a.shape == (100, 3)
    assert report.to_dict()["metric"] == "eps_norm"


def test_compare_rejects_mismatched_horizons():
    with pytest.raises(HorizonMismatchError):
        compare_runs(three_robot_scenario(steps=10), three_robot_scenario(steps=20))
    short = run_scenario(three_robot_scenario(steps=10))
    longer = run_scenario(three_robot_scenario(steps=12))
    with pytest.raises(HorizonMismatchError):
        compare_traces(short, longer)
    with pytest.raises(ContractViolationError):
        compare_traces(short, short, metric="energy")


def test_metrics_track_convergence_band():
    trace, _ = run_scenario(three_robot_scenario(ca_enabled=False, steps=300))
    loose = compute_metrics(trace, tol=1e6)
    assert all(r.convergence_step == 0 for r in loose.robots)
    tight = compute_metrics(trace, tol=0.0)
    assert all(r.convergence_step is None for r in tight.robots)
    assert loose.to_dict()["robots"][0]["robot"] == 0
