"""
Reading, validating and writing scenario configuration documents (JSON).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Callable

import numpy as np
from pydantic import ValidationError

from lsmrac.collision_avoidance import RepulsiveConfig
from lsmrac.exceptions import ConfigValidationError, LsmracError
from lsmrac.sim_engine import (
    AdaptationSpec,
    PlantSpec,
    ReferenceSpec,
    RobotScenario,
    RobotSpec,
)
from lsmrac.system_models import ConstantInput, SinusoidInput, ZeroInput, robot_gains
from lsmrac.types import (
    AdaptationSection,
    CollisionAvoidanceSection,
    ConfigDocument,
    InputSection,
    PlantSection,
    ReferenceSection,
    RobotSection,
    RunSection,
)
from lsmrac.utils import logger


def _loc_to_path(loc: tuple) -> str:
    return ".".join(str(part) for part in loc)


def parse_document(data: Any) -> ConfigDocument:
    try:
        return ConfigDocument.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigValidationError(first["msg"], field_path=_loc_to_path(first["loc"])) from e


def _array(value) -> np.ndarray | None:
    return None if value is None else np.asarray(value, dtype=float)


def _tuple(value) -> tuple[float, ...] | None:
    return None if value is None else tuple(float(v) for v in value)


def _input_from_section(section: InputSection) -> Callable[[int], np.ndarray]:
    if section.kind == "constant":
        return ConstantInput(value=tuple(section.value))
    if section.kind == "sinusoid":
        phase = section.phase_rad or [0.0] * len(section.amplitude)
        return SinusoidInput(
            amplitude=tuple(section.amplitude),
            omega=section.omega_rad_per_step,
            phase=tuple(phase),
        )
    return ZeroInput(section.dim)


def _input_to_section(generator) -> InputSection:
    if isinstance(generator, SinusoidInput):
        return InputSection(
            kind="sinusoid",
            dim=generator.dim,
            amplitude=list(generator.amplitude),
            omega_rad_per_step=generator.omega,
            phase_rad=list(generator.phase),
        )
    if isinstance(generator, ConstantInput):
        return InputSection(kind="constant", dim=generator.dim, value=list(generator.value))
    if isinstance(generator, ZeroInput):
        return InputSection(kind="zero", dim=generator.dim)
    raise ConfigValidationError(
        f"reference input {generator!r} cannot be written to a config document",
        field_path="robots.reference_input",
    )


def _reference_spec(doc: ConfigDocument) -> ReferenceSpec:
    ref = doc.reference
    k2_upper = _array(ref.k2_upper)
    if ref.mode == "matrices":
        return ReferenceSpec(
            A_m=_array(ref.A_m), B_m=_array(ref.B_m), k2_upper=k2_upper, strict=ref.strict
        )
    if ref.K1 is not None:
        return ReferenceSpec(K1=_array(ref.K1), K2=_array(ref.K2), k2_upper=k2_upper, strict=ref.strict)
    if doc.plant.A is not None:
        raise ConfigValidationError("raw plants need explicit K1 and K2", field_path="reference.K1")
    K1, K2 = robot_gains(ref.k1_position, ref.k1_velocity, ref.k2)
    return ReferenceSpec(K1=K1, K2=K2, k2_upper=k2_upper, strict=ref.strict)


def _checked(field_path: str, build: Callable[[], Any]) -> Any:
    try:
        return build()
    except ConfigValidationError:
        raise
    except (LsmracError, ValueError) as e:
        raise ConfigValidationError(str(e), field_path=field_path) from e


def document_to_scenario(doc: ConfigDocument) -> RobotScenario:
    """Build and check a scenario; invariant failures name the offending section."""
    plant = PlantSpec(
        mass_kg=doc.plant.mass_kg,
        friction_ns_per_m=doc.plant.friction_ns_per_m,
        dt_s=doc.plant.dt_s,
        A=_array(doc.plant.A),
        B=_array(doc.plant.B),
    )
    built_plant = _checked("plant", plant.build)
    reference = _checked("reference", lambda: _reference_spec(doc))
    _checked("reference", lambda: reference.build(built_plant))

    robots = []
    for i, section in enumerate(doc.robots):
        if len(section.x0) != built_plant.n:
            raise ConfigValidationError(
                f"expected {built_plant.n} entries, got {len(section.x0)}",
                field_path=f"robots.{i}.x0",
            )
        robots.append(
            RobotSpec(
                x0=_tuple(section.x0),
                reference_input=_input_from_section(section.reference_input),
                xm0=_tuple(section.xm0),
                xhat0=_tuple(section.xhat0),
            )
        )

    ad = doc.adaptation
    adaptation = _checked(
        "adaptation",
        lambda: AdaptationSpec(
            algorithm=ad.algorithm,
            kappa=ad.kappa,
            p0_scale=ad.p0_scale,
            theta0_fraction=ad.theta0_fraction,
            theta0=_tuple(ad.theta0),
            projection=ad.projection,
            gradient_gain=ad.gradient_gain,
        ),
    )
    ca = doc.collision_avoidance
    repulsive = _checked(
        "collision_avoidance",
        lambda: RepulsiveConfig(
            eta=ca.eta,
            gamma=ca.gamma_m,
            rho0=ca.rho0_m,
            rho_min=ca.rho_min_m,
            v_max=ca.v_max_m_per_s,
            beta=ca.beta,
            mass=doc.plant.mass_kg,
        ),
    )
    scenario = RobotScenario(
        plant=plant,
        reference=reference,
        robots=tuple(robots),
        adaptation=adaptation,
        repulsive=repulsive,
        ca_enabled=ca.enabled,
        steps=doc.run.steps,
        theta_star_known=doc.run.theta_star_known,
        freeze_adaptation_after=doc.run.freeze_adaptation_after,
        convergence_tol=doc.run.convergence_tol,
        name=doc.run.name,
    )
    _checked("run", scenario.validate)
    return scenario


def _matrix(value) -> list[list[float]] | None:
    return None if value is None else np.asarray(value, dtype=float).tolist()


def scenario_to_document(scenario: RobotScenario) -> ConfigDocument:
    plant = scenario.plant
    ref = scenario.reference
    k2_upper = None if ref.k2_upper is None else np.asarray(ref.k2_upper, dtype=float).reshape(-1).tolist()
    if ref.from_gains:
        reference = ReferenceSection(
            mode="gains", K1=_matrix(ref.K1), K2=_matrix(ref.K2), k2_upper=k2_upper, strict=ref.strict
        )
    else:
        reference = ReferenceSection(
            mode="matrices", A_m=_matrix(ref.A_m), B_m=_matrix(ref.B_m), k2_upper=k2_upper, strict=ref.strict
        )
    ad = scenario.adaptation
    rep = scenario.repulsive
    return ConfigDocument(
        plant=PlantSection(
            mass_kg=plant.mass_kg,
            friction_ns_per_m=plant.friction_ns_per_m,
            dt_s=plant.dt_s,
            A=_matrix(plant.A),
            B=_matrix(plant.B),
        ),
        reference=reference,
        robots=[
            RobotSection(
                x0=list(robot.x0),
                xm0=None if robot.xm0 is None else list(robot.xm0),
                xhat0=None if robot.xhat0 is None else list(robot.xhat0),
                reference_input=_input_to_section(robot.reference_input),
            )
            for robot in scenario.robots
        ],
        adaptation=AdaptationSection(
            algorithm=ad.algorithm,
            kappa=ad.kappa,
            p0_scale=ad.p0_scale,
            theta0_fraction=ad.theta0_fraction,
            theta0=None if ad.theta0 is None else list(ad.theta0),
            projection=ad.projection,
            gradient_gain=ad.gradient_gain,
        ),
        collision_avoidance=CollisionAvoidanceSection(
            enabled=scenario.ca_enabled,
            eta=rep.eta,
            gamma_m=rep.gamma,
            rho0_m=rep.rho0,
            rho_min_m=rep.rho_min,
            v_max_m_per_s=rep.v_max,
            beta=rep.beta,
        ),
        run=RunSection(
            name=scenario.name,
            steps=scenario.steps,
            theta_star_known=scenario.theta_star_known,
            freeze_adaptation_after=scenario.freeze_adaptation_after,
            convergence_tol=scenario.convergence_tol,
        ),
    )


def load_config(path: str | Path) -> RobotScenario:
    """Read a JSON scenario file.

    Raises:
        ConfigValidationError: unreadable file, invalid JSON, schema or invariant failure
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigValidationError(f"cannot read {path}: {e.strerror or e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigValidationError(
            f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
        ) from e
    scenario = document_to_scenario(parse_document(data))
    logger.info(f"Loaded scenario {scenario.name!r} from {path}")
    return scenario


def write_config(scenario: RobotScenario, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        scenario_to_document(scenario).model_dump_json(indent=2, exclude_none=True),
        encoding="utf-8",
    )
    return path
