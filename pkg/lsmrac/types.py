from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from lsmrac.constants import (
    DEFAULT_BETA,
    DEFAULT_CONVERGENCE_TOL,
    DEFAULT_DT_S,
    DEFAULT_ETA,
    DEFAULT_FRICTION_NS_PER_M,
    DEFAULT_GAMMA_M,
    DEFAULT_GRADIENT_GAIN,
    DEFAULT_K1_POSITION,
    DEFAULT_K1_VELOCITY,
    DEFAULT_K2,
    DEFAULT_KAPPA,
    DEFAULT_MASS_KG,
    DEFAULT_P0_SCALE,
    DEFAULT_RHO0_M,
    DEFAULT_RHO_MIN_M,
    DEFAULT_STEPS,
    DEFAULT_THETA0_FRACTION,
    DEFAULT_V_MAX_M_PER_S,
)

Matrix = list[list[float]]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PlantSection(_Section):
    mass_kg: float = Field(default=DEFAULT_MASS_KG, gt=0)
    friction_ns_per_m: float = Field(default=DEFAULT_FRICTION_NS_PER_M, ge=0)
    dt_s: float = Field(default=DEFAULT_DT_S, gt=0)
    A: Optional[Matrix] = Field(default=None, description="Raw state matrix; overrides the robot model")
    B: Optional[Matrix] = None

    @model_validator(mode="after")
    def _raw_pair(self):
        if (self.A is None) != (self.B is None):
            raise ValueError("raw plant needs both A and B")
        return self


class ReferenceSection(_Section):
    mode: Literal["gains", "matrices"] = "gains"
    k1_position: float = DEFAULT_K1_POSITION
    k1_velocity: float = DEFAULT_K1_VELOCITY
    k2: float = DEFAULT_K2
    K1: Optional[Matrix] = Field(default=None, description="n x m gain matrix; overrides k1_*")
    K2: Optional[Matrix] = None
    A_m: Optional[Matrix] = None
    B_m: Optional[Matrix] = None
    k2_upper: Optional[list[float]] = None
    strict: bool = True

    @model_validator(mode="after")
    def _mode_fields(self):
        if self.mode == "matrices" and (self.A_m is None or self.B_m is None):
            raise ValueError("mode 'matrices' needs A_m and B_m")
        if (self.K1 is None) != (self.K2 is None):
            raise ValueError("give both K1 and K2 or neither")
        return self


class InputSection(_Section):
    kind: Literal["zero", "constant", "sinusoid"] = "zero"
    dim: int = Field(default=2, ge=1)
    value: Optional[list[float]] = None
    amplitude: Optional[list[float]] = None
    omega_rad_per_step: Optional[float] = None
    phase_rad: Optional[list[float]] = None

    @model_validator(mode="after")
    def _kind_fields(self):
        if self.kind == "constant" and self.value is None:
            raise ValueError("constant input needs value")
        if self.kind == "sinusoid":
            if self.amplitude is None or self.omega_rad_per_step is None:
                raise ValueError("sinusoid input needs amplitude and omega_rad_per_step")
            phase = self.phase_rad or [0.0] * len(self.amplitude)
            if len(phase) != len(self.amplitude):
                raise ValueError("phase_rad and amplitude must have equal length")
        return self


class RobotSection(_Section):
    x0: list[float]
    xm0: Optional[list[float]] = None
    xhat0: Optional[list[float]] = None
    reference_input: InputSection = Field(default_factory=InputSection)


class AdaptationSection(_Section):
    algorithm: Literal["ls", "gradient"] = "ls"
    kappa: float = Field(default=DEFAULT_KAPPA, gt=0)
    p0_scale: float = Field(default=DEFAULT_P0_SCALE, gt=0)
    theta0_fraction: Optional[float] = DEFAULT_THETA0_FRACTION
    theta0: Optional[list[float]] = None
    projection: bool = True
    gradient_gain: float = Field(default=DEFAULT_GRADIENT_GAIN, gt=0, lt=2)


class CollisionAvoidanceSection(_Section):
    enabled: bool = True
    eta: float = Field(default=DEFAULT_ETA, gt=0)
    gamma_m: float = Field(default=DEFAULT_GAMMA_M, gt=0)
    rho0_m: float = Field(default=DEFAULT_RHO0_M, gt=0)
    rho_min_m: float = Field(default=DEFAULT_RHO_MIN_M, gt=0)
    v_max_m_per_s: float = Field(default=DEFAULT_V_MAX_M_PER_S, gt=0)
    beta: float = Field(default=DEFAULT_BETA, ge=0, lt=1)

    @model_validator(mode="after")
    def _ordering(self):
        if not self.gamma_m < self.rho_min_m < self.rho0_m:
            raise ValueError("need gamma_m < rho_min_m < rho0_m")
        return self


class RunSection(_Section):
    name: str = "scenario"
    steps: int = Field(default=DEFAULT_STEPS, ge=1)
    theta_star_known: bool = False
    freeze_adaptation_after: Optional[int] = Field(default=None, ge=0)
    convergence_tol: float = Field(default=DEFAULT_CONVERGENCE_TOL, gt=0)


class ConfigDocument(_Section):
    """Scenario configuration file. Physical quantities carry their unit in the name."""

    plant: PlantSection = Field(default_factory=PlantSection)
    reference: ReferenceSection = Field(default_factory=ReferenceSection)
    robots: list[RobotSection] = Field(min_length=1)
    adaptation: AdaptationSection = Field(default_factory=AdaptationSection)
    collision_avoidance: CollisionAvoidanceSection = Field(
        default_factory=CollisionAvoidanceSection
    )
    run: RunSection = Field(default_factory=RunSection)

    @field_validator("robots", mode="after")
    @classmethod
    def _same_state_size(cls, robots: list[RobotSection]) -> list[RobotSection]:
        sizes = {len(robot.x0) for robot in robots}
        if len(sizes) > 1:
            raise ValueError("all robots must have the same state size")
        return robots
