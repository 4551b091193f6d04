"""
Fixed-step closed-loop simulation of N robots under least-squares (or
gradient) adaptive state tracking with repulsive-field collision avoidance.

Per step t and robot i:

1. r_i(t) from the robot's input generator
2. U_o = control_law(theta(t), x, r)
3. F_r, alpha from all robots' current positions (when CA is enabled)
4. U = F_r + alpha U_o
5. snapshot of Z, mu, epsilon with e_x = x_hat - x
6. adaptation when F_r == 0, otherwise suspended for this step
7. estimator, filters, plant and reference model advance with the applied U
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from lsmrac.adaptive_laws import (
    ProjectionBounds,
    control_law,
    estimate_next,
    lyapunov_monitor,
    make_adaptive_law,
    theta_from_matching,
)
from lsmrac.collision_avoidance import (
    RepulsiveConfig,
    check_energy_feasibility,
    collision_avoidance_step,
)
from lsmrac.constants import (
    DEFAULT_CONVERGENCE_TOL,
    DEFAULT_DT_S,
    DEFAULT_FRICTION_NS_PER_M,
    DEFAULT_GRADIENT_GAIN,
    DEFAULT_KAPPA,
    DEFAULT_MASS_KG,
    DEFAULT_P0_SCALE,
    DEFAULT_STEPS,
    DEFAULT_TAIL_FRACTION,
    DEFAULT_THETA0_FRACTION,
)
from lsmrac.exceptions import (
    ContractViolationError,
    HorizonMismatchError,
    SimulationAbortedError,
)
from lsmrac.regressor_filters import FilterBank, ThetaVector, assemble_batch, build_omega
from lsmrac.system_models import (
    LtiPlant,
    MatchingParameters,
    MatchingResidual,
    ReferenceModel,
    ZeroInput,
    build_reference_from_gains,
    build_robot_plant,
    plant_step,
    reference_step,
    sample_inputs,
    solve_matching,
    verify_matching,
)
from lsmrac.utils import as_vector, logger, verbose_debug


@dataclass(frozen=True, eq=False)
class PlantSpec:
    """Robot plant from physical constants, or a raw (A, B) pair."""

    mass_kg: float = DEFAULT_MASS_KG
    friction_ns_per_m: float = DEFAULT_FRICTION_NS_PER_M
    dt_s: float = DEFAULT_DT_S
    A: np.ndarray | None = None
    B: np.ndarray | None = None

    @property
    def is_raw(self) -> bool:
        return self.A is not None or self.B is not None

    def build(self) -> LtiPlant:
        if self.is_raw:
            if self.A is None or self.B is None:
                raise ContractViolationError("raw plant needs both A and B")
            return LtiPlant(A=self.A, B=self.B)
        return build_robot_plant(self.mass_kg, self.friction_ns_per_m, self.dt_s)


@dataclass(frozen=True, eq=False)
class ReferenceSpec:
    """Reference model from matching gains (exact) or from given matrices."""

    K1: np.ndarray | None = None
    K2: np.ndarray | None = None
    A_m: np.ndarray | None = None
    B_m: np.ndarray | None = None
    k2_upper: np.ndarray | None = None
    strict: bool = True
    """With given matrices, reject matching residuals above 1e-9."""

    @property
    def from_gains(self) -> bool:
        return self.K1 is not None

    def build(self, plant: LtiPlant) -> tuple[ReferenceModel, MatchingParameters, MatchingResidual]:
        if self.from_gains:
            if self.K2 is None or self.A_m is not None or self.B_m is not None:
                raise ContractViolationError("give either K1/K2 or A_m/B_m")
            model, params = build_reference_from_gains(
                plant, self.K1, self.K2, k2_upper=self.k2_upper
            )
            return model, params, verify_matching(plant, model.A_m, model.B_m, params)
        if self.A_m is None or self.B_m is None:
            raise ContractViolationError("reference needs K1/K2 or A_m/B_m")
        params, residual = solve_matching(
            plant, self.A_m, self.B_m, k2_upper=self.k2_upper, strict=self.strict
        )
        return ReferenceModel(A_m=self.A_m, B_m=self.B_m), params, residual


@dataclass(frozen=True, eq=False)
class RobotSpec:
    x0: tuple[float, ...]
    reference_input: Callable[[int], np.ndarray] = field(default_factory=ZeroInput)
    xm0: tuple[float, ...] | None = None
    """Reference initial state, x0 when omitted."""

    xhat0: tuple[float, ...] | None = None
    """Estimator initial state, xm0 when omitted."""


@dataclass(frozen=True)
class AdaptationSpec:
    algorithm: Literal["ls", "gradient"] = "ls"
    kappa: float = DEFAULT_KAPPA
    p0_scale: float = DEFAULT_P0_SCALE
    theta0_fraction: float | None = DEFAULT_THETA0_FRACTION
    """theta_0 = fraction * theta*, used when theta0 is not given."""

    theta0: tuple[float, ...] | None = None
    projection: bool = True
    gradient_gain: float = DEFAULT_GRADIENT_GAIN

    def __post_init__(self):
        if self.algorithm not in ("ls", "gradient"):
            raise ContractViolationError(f"Unknown adaptation algorithm {self.algorithm!r}")
        if not self.kappa > 0:
            raise ContractViolationError(f"kappa must be positive, got {self.kappa}")
        if not self.p0_scale > 0:
            raise ContractViolationError(f"p0_scale must be positive, got {self.p0_scale}")
        if self.theta0 is None and self.theta0_fraction is None:
            raise ContractViolationError("give theta0 or theta0_fraction")
        if not 0.0 < self.gradient_gain < 2.0:
            raise ContractViolationError(
                f"gradient_gain must lie in (0, 2), got {self.gradient_gain}"
            )


@dataclass(frozen=True, eq=False)
class RobotScenario:
    plant: PlantSpec
    reference: ReferenceSpec
    robots: tuple[RobotSpec, ...]
    adaptation: AdaptationSpec = field(default_factory=AdaptationSpec)
    repulsive: RepulsiveConfig = field(default_factory=RepulsiveConfig)
    ca_enabled: bool = True
    steps: int = DEFAULT_STEPS
    theta_star_known: bool = False
    """Record V(t) (least squares only)."""

    freeze_adaptation_after: int | None = None
    """Stop adapting from this step on."""

    convergence_tol: float = DEFAULT_CONVERGENCE_TOL
    name: str = "scenario"

    def validate(self) -> None:
        if len(self.robots) < 1:
            raise ContractViolationError("scenario needs at least one robot")
        if self.steps < 1:
            raise ContractViolationError(f"steps must be positive, got {self.steps}")
        if not self.plant.is_raw and not self.plant.dt_s > 0:
            raise ContractViolationError(f"dt must be positive, got {self.plant.dt_s}")

    @property
    def dt(self) -> float:
        return self.plant.dt_s


_PER_ROBOT_FIELDS = (
    "x", "x_m", "xhat", "u", "u_track", "F_r", "alpha", "eps_norm", "xi_max",
    "suspended", "degenerate", "theta", "p_trace", "V", "decrement",
)


@dataclass(eq=False)
class SimTrace:
    """Per-step, per-robot record of a run.

    Arrays are indexed [step, robot, ...]. ``theta`` and ``p_trace`` hold the
    values after the step's adaptation; ``V`` holds V(t) before it.
    """

    t: np.ndarray
    x: np.ndarray
    x_m: np.ndarray
    xhat: np.ndarray
    u: np.ndarray
    u_track: np.ndarray
    F_r: np.ndarray
    alpha: np.ndarray
    eps_norm: np.ndarray
    xi_max: np.ndarray
    suspended: np.ndarray
    degenerate: np.ndarray
    theta: np.ndarray
    p_trace: np.ndarray
    V: np.ndarray
    decrement: np.ndarray
    min_surface_distance: np.ndarray
    robot_radius: float
    mass: float | None
    algorithm: str
    ca_enabled: bool
    dt: float = DEFAULT_DT_S
    wall_clock_s: float = 0.0

    @property
    def steps(self) -> int:
        return self.t.shape[0]

    @property
    def robots(self) -> int:
        return self.x.shape[1]

    @property
    def error(self) -> np.ndarray:
        return self.x - self.x_m

    def tracking_error_norm(self) -> np.ndarray:
        """(steps, robots) Euclidean norm of x - x_m."""
        return np.linalg.norm(self.error, axis=2)

    def tracking_error_inf(self) -> np.ndarray:
        return np.max(np.abs(self.error), axis=2)

    def robot(self, i: int) -> dict[str, np.ndarray]:
        return {name: getattr(self, name)[:, i] for name in _PER_ROBOT_FIELDS}

    def rows(self, include_theta: bool = True) -> dict[str, np.ndarray]:
        """Flatten to one row per (step, robot), step-major, in a fixed column order."""
        steps, robots = self.steps, self.robots
        columns: dict[str, np.ndarray] = {
            "step": np.repeat(self.t, robots),
            "robot": np.tile(np.arange(robots), steps),
        }
        columns["t_s"] = columns["step"] * self.dt
        vectors = [("x", self.x), ("x_m", self.x_m), ("e", self.error), ("xhat", self.xhat),
                   ("u", self.u), ("u_track", self.u_track), ("F_r", self.F_r)]
        if include_theta:
            vectors.append(("theta", self.theta))
        for prefix, values in vectors:
            flat = values.reshape(steps * robots, -1)
            for k in range(flat.shape[1]):
                columns[f"{prefix}_{k}"] = flat[:, k]
        for name in ("alpha", "eps_norm", "xi_max", "suspended", "degenerate", "p_trace", "V",
                     "decrement"):
            columns[name] = getattr(self, name).reshape(-1)
        columns["min_surface_distance"] = np.repeat(self.min_surface_distance, robots)
        return columns


@dataclass
class RobotMetrics:
    robot: int
    tail_max_error: float
    convergence_step: int | None
    final_eps_norm: float
    input_min: float
    input_max: float
    accel_min: float | None
    accel_max: float | None
    final_repulsive_norm: float
    suspended_steps: int


@dataclass
class MetricsSummary:
    robots: list[RobotMetrics]
    min_surface_distance: float
    collision: bool
    degenerate_steps: int
    wall_clock_s: float
    steps: int
    algorithm: str
    ca_enabled: bool
    convergence_tol: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ComparisonReport:
    metric: str
    label_a: str
    label_b: str
    series_a: np.ndarray
    series_b: np.ndarray
    metrics_a: MetricsSummary
    metrics_b: MetricsSummary
    deltas: dict[str, object]

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "label_a": self.label_a,
            "label_b": self.label_b,
            "deltas": self.deltas,
            "metrics_a": self.metrics_a.to_dict(),
            "metrics_b": self.metrics_b.to_dict(),
        }


def _initial_theta(scenario: RobotScenario, params: MatchingParameters) -> ThetaVector:
    spec = scenario.adaptation
    theta_star = theta_from_matching(params)
    if spec.theta0 is not None:
        return theta_star.with_flat(np.asarray(spec.theta0, dtype=float))
    return theta_star.with_flat(spec.theta0_fraction * theta_star.flat)


def _min_surface_distances(positions: np.ndarray, radius: float) -> np.ndarray:
    """(steps,) smallest center distance minus two radii from (steps, robots, 2) positions."""
    steps, count = positions.shape[:2]
    if count < 2:
        return np.full(steps, np.inf)
    first, second = np.triu_indices(count, k=1)
    gaps = positions[:, first] - positions[:, second]
    return np.hypot(gaps[..., 0], gaps[..., 1]).min(axis=1) - 2.0 * radius


def run_scenario(scenario: RobotScenario) -> tuple[SimTrace, MetricsSummary]:
    """Simulate ``scenario`` and return its trace and summary metrics.

    All robots advance together as (robots, ...) stacks; only the parameter
    update runs robot by robot.

    Raises:
        SimulationAbortedError: when a robot state stops being finite
    """
    scenario.validate()
    plant = scenario.plant.build()
    model, params, residual = scenario.reference.build(plant)
    n, m = plant.n, plant.m
    if scenario.ca_enabled and (m != 2 or n < 2):
        raise ContractViolationError("collision avoidance needs planar robots (m=2, n>=2)")
    if scenario.ca_enabled:
        check_energy_feasibility(scenario.repulsive)

    theta_star = theta_from_matching(params)
    theta0 = _initial_theta(scenario, params)
    spec = scenario.adaptation
    projection = ProjectionBounds.from_matching(params) if spec.projection else None
    laws = [
        make_adaptive_law(
            spec.algorithm,
            theta0,
            kappa=spec.kappa,
            p0_scale=spec.p0_scale,
            gradient_gain=spec.gradient_gain,
            projection=projection,
        )
        for _ in scenario.robots
    ]
    record_v = scenario.theta_star_known and spec.algorithm == "ls"

    steps, count = scenario.steps, len(laws)
    p = theta0.flat.size
    x = np.array([as_vector(robot.x0, n, "x0") for robot in scenario.robots])
    x_m = np.array([
        as_vector(robot.x0 if robot.xm0 is None else robot.xm0, n, "xm0")
        for robot in scenario.robots
    ])
    xhat = np.array([
        x_m[i] if robot.xhat0 is None else as_vector(robot.xhat0, n, "xhat0")
        for i, robot in enumerate(scenario.robots)
    ])
    if not np.all(np.isfinite(xhat)):
        raise ContractViolationError("estimator state must be finite")
    inputs = np.stack(
        [sample_inputs(robot.reference_input, steps, m) for robot in scenario.robots], axis=1
    )
    bank = FilterBank(model.A_m, model.B_m, batch=count)
    A_m, B_m = model.A_m, model.B_m
    flats = np.array([law.theta.flat for law in laws])
    p_traces = np.array([np.nan if law.P is None else np.trace(law.P) for law in laws])
    no_force = np.zeros((count, m))
    full_alpha = np.ones(count)
    no_degenerate = np.zeros(count, dtype=bool)
    was_suspended = np.zeros(count, dtype=bool)
    freeze = scenario.freeze_adaptation_after

    trace = SimTrace(
        t=np.arange(steps),
        x=np.zeros((steps, count, n)),
        x_m=np.zeros((steps, count, n)),
        xhat=np.zeros((steps, count, n)),
        u=np.zeros((steps, count, m)),
        u_track=np.zeros((steps, count, m)),
        F_r=np.zeros((steps, count, m)),
        alpha=np.ones((steps, count)),
        eps_norm=np.zeros((steps, count)),
        xi_max=np.zeros((steps, count)),
        suspended=np.zeros((steps, count), dtype=bool),
        degenerate=np.zeros((steps, count), dtype=bool),
        theta=np.zeros((steps, count, p)),
        p_trace=np.full((steps, count), np.nan),
        V=np.full((steps, count), np.nan),
        decrement=np.full((steps, count), np.nan),
        min_surface_distance=np.full(steps, np.inf),
        robot_radius=scenario.repulsive.gamma,
        dt=scenario.dt,
        mass=None if scenario.plant.is_raw else scenario.plant.mass_kg,
        algorithm=spec.algorithm,
        ca_enabled=scenario.ca_enabled,
    )

    logger.info(
        f"Running {scenario.name}: robots={count}, steps={steps}, "
        f"algorithm={spec.algorithm}, ca={'on' if scenario.ca_enabled else 'off'}, "
        f"matching residual A={residual.a_residual:.2e} B={residual.b_residual:.2e}"
    )
    started = time.perf_counter()

    for t in range(steps):
        # theta(t) for every robot; flats is overwritten by this step's updates
        cols = flats.reshape(count, m, n + 1).copy()
        u_track = control_law(cols, x, inputs[t])
        if scenario.ca_enabled:
            ca = collision_avoidance_step(x[:, :2], u_track, scenario.repulsive, scenario.dt)
            applied, forces, alphas, degenerate = ca.U, ca.F_r, ca.alpha, ca.degenerate
            if degenerate.any():
                logger.warning(f"Coincident robot centers at step {t}: {np.flatnonzero(degenerate).tolist()}")
        else:
            applied, forces, alphas, degenerate = u_track, no_force, full_alpha, no_degenerate

        snapshots = assemble_batch(bank, cols, xhat - x)
        suspended = np.any(forces != 0.0, axis=1)
        for i in np.flatnonzero(suspended != was_suspended):
            verbose_debug(
                "robot %d adaptation %s at step %d", i, "suspended" if suspended[i] else "resumed", t
            )
        was_suspended = suspended

        if record_v:
            for i, law in enumerate(laws):
                trace.V[t, i] = lyapunov_monitor(law.theta, theta_star, law.P)
        if freeze is None or t < freeze:
            for i in np.flatnonzero(~suspended):
                law = laws[i]
                law.update(snapshots.robot(i))
                flats[i] = law.theta.flat
                if law.P is not None:
                    p_traces[i] = np.trace(law.P)
                if record_v:
                    trace.decrement[t, i] = law.last_decrement

        trace.x[t] = x
        trace.x_m[t] = x_m
        trace.xhat[t] = xhat
        trace.u[t] = applied
        trace.u_track[t] = u_track
        trace.F_r[t] = forces
        trace.alpha[t] = alphas
        trace.eps_norm[t] = np.linalg.norm(snapshots.epsilon, axis=1)
        trace.xi_max[t] = np.max(np.abs(snapshots.xi), axis=(1, 2))
        trace.suspended[t] = suspended
        trace.degenerate[t] = degenerate
        trace.theta[t] = flats
        trace.p_trace[t] = p_traces

        xhat = estimate_next(xhat, cols, x, applied, A_m, B_m)
        bank.update(build_omega(x, applied), cols)
        x = plant_step(plant, x, applied)
        x_m = reference_step(model, x_m, t, r=inputs[t])
        finite = np.isfinite(x).all(axis=1) & np.isfinite(xhat).all(axis=1)
        if not finite.all():
            i = int(np.flatnonzero(~finite)[0])
            logger.error(f"Non-finite state for robot {i} at step {t}, aborting {scenario.name}")
            raise SimulationAbortedError("non-finite state", step=t, robot=i)

    if n >= 2:
        trace.min_surface_distance = _min_surface_distances(trace.x[:, :, :2], trace.robot_radius)
    trace.wall_clock_s = time.perf_counter() - started
    metrics = compute_metrics(trace, tol=scenario.convergence_tol)
    logger.info(
        f"Finished {scenario.name} in {trace.wall_clock_s:.2f}s: "
        f"min surface distance={metrics.min_surface_distance:.4f}, collision={metrics.collision}"
    )
    return trace, metrics


def _convergence_step(err_inf: np.ndarray, tol: float) -> int | None:
    outside = np.flatnonzero(err_inf >= tol)
    if outside.size == 0:
        return 0
    if outside[-1] == err_inf.size - 1:
        return None
    return int(outside[-1] + 1)


def compute_metrics(
    trace: SimTrace,
    tol: float = DEFAULT_CONVERGENCE_TOL,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
) -> MetricsSummary:
    """Summarize a trace.

    Args:
        trace: a non-empty trace
        tol: band on ||x - x_m||_inf defining convergence
        tail_fraction: share of final steps used for the tail error
    """
    if trace.steps == 0:
        raise ContractViolationError("cannot summarize an empty trace")
    tail = max(1, int(round(trace.steps * tail_fraction)))
    err_inf = trace.tracking_error_inf()
    robots = []
    for i in range(trace.robots):
        u_i = trace.u[:, i]
        accel = (u_i / trace.mass) if trace.mass else None
        robots.append(
            RobotMetrics(
                robot=i,
                tail_max_error=float(np.max(err_inf[-tail:, i])),
                convergence_step=_convergence_step(err_inf[:, i], tol),
                final_eps_norm=float(trace.eps_norm[-1, i]),
                input_min=float(np.min(u_i)),
                input_max=float(np.max(u_i)),
                accel_min=None if accel is None else float(np.min(accel)),
                accel_max=None if accel is None else float(np.max(accel)),
                final_repulsive_norm=float(np.linalg.norm(trace.F_r[-1, i])),
                suspended_steps=int(np.sum(trace.suspended[:, i])),
            )
        )
    min_distance = float(np.min(trace.min_surface_distance))
    return MetricsSummary(
        robots=robots,
        min_surface_distance=min_distance,
        collision=bool(min_distance < 0.0),
        degenerate_steps=int(np.sum(np.any(trace.degenerate, axis=1))),
        wall_clock_s=trace.wall_clock_s,
        steps=trace.steps,
        algorithm=trace.algorithm,
        ca_enabled=trace.ca_enabled,
        convergence_tol=tol,
    )


METRIC_SERIES: dict[str, Callable[[SimTrace], np.ndarray]] = {
    "tracking_error_norm": lambda tr: tr.tracking_error_norm(),
    "tracking_error_inf": lambda tr: tr.tracking_error_inf(),
    "eps_norm": lambda tr: tr.eps_norm,
    "min_surface_distance": lambda tr: tr.min_surface_distance,
    "alpha": lambda tr: tr.alpha,
}


def compare_traces(
    run_a: tuple[SimTrace, MetricsSummary],
    run_b: tuple[SimTrace, MetricsSummary],
    metric: str = "tracking_error_norm",
    labels: Sequence[str] = ("a", "b"),
) -> ComparisonReport:
    trace_a, metrics_a = run_a
    trace_b, metrics_b = run_b
    if trace_a.steps != trace_b.steps:
        raise HorizonMismatchError(
            f"runs have different horizons: {trace_a.steps} vs {trace_b.steps}"
        )
    if metric not in METRIC_SERIES:
        raise ContractViolationError(
            f"Unknown metric {metric!r}; valid metrics are {sorted(METRIC_SERIES)}"
        )
    series_a = METRIC_SERIES[metric](trace_a)
    series_b = METRIC_SERIES[metric](trace_b)
    final_a = trace_a.tracking_error_norm()[-1]
    final_b = trace_b.tracking_error_norm()[-1]
    with np.errstate(invalid="ignore"):
        diff = series_a - series_b
    # inf - inf on steps without a pair in range
    finite = np.isfinite(diff)
    deltas = {
        "series_max_abs_delta": float(np.max(np.abs(diff[finite]))) if finite.any() else 0.0,
        "final_tracking_error_norm_a": final_a.tolist(),
        "final_tracking_error_norm_b": final_b.tolist(),
        "final_tracking_error_norm_delta": (final_a - final_b).tolist(),
        "convergence_step_a": [r.convergence_step for r in metrics_a.robots],
        "convergence_step_b": [r.convergence_step for r in metrics_b.robots],
        "min_surface_distance_delta": metrics_a.min_surface_distance - metrics_b.min_surface_distance
        if np.isfinite(metrics_a.min_surface_distance) and np.isfinite(metrics_b.min_surface_distance)
        else 0.0,
        "input_range_a": [min(r.input_min for r in metrics_a.robots), max(r.input_max for r in metrics_a.robots)],
        "input_range_b": [min(r.input_min for r in metrics_b.robots), max(r.input_max for r in metrics_b.robots)],
    }
    return ComparisonReport(
        metric=metric,
        label_a=labels[0],
        label_b=labels[1],
        series_a=series_a,
        series_b=series_b,
        metrics_a=metrics_a,
        metrics_b=metrics_b,
        deltas=deltas,
    )


def compare_runs(
    scenario_a: RobotScenario,
    scenario_b: RobotScenario,
    metric: str = "tracking_error_norm",
) -> ComparisonReport:
    """Run both scenarios and pair their ``metric`` series."""
    if scenario_a.steps != scenario_b.steps:
        raise HorizonMismatchError(
            f"scenarios have different horizons: {scenario_a.steps} vs {scenario_b.steps}"
        )
    return compare_traces(
        run_scenario(scenario_a),
        run_scenario(scenario_b),
        metric=metric,
        labels=(scenario_a.name, scenario_b.name),
    )
