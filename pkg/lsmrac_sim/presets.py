"""
Built-in scenarios: three TurtleBot-like robots tracking sinusoidal
references while avoiding each other, plus a single-robot sanity case.
"""

from __future__ import annotations

from dataclasses import replace
from math import pi
from typing import Callable

from lsmrac.collision_avoidance import RepulsiveConfig
from lsmrac.constants import (
    DEFAULT_K1_POSITION,
    DEFAULT_K1_VELOCITY,
    DEFAULT_K2,
    DEFAULT_MASS_KG,
    DEFAULT_OMEGA,
    DEFAULT_STEPS,
)
from lsmrac.exceptions import ConfigValidationError
from lsmrac.sim_engine import (
    AdaptationSpec,
    PlantSpec,
    ReferenceSpec,
    RobotScenario,
    RobotSpec,
)
from lsmrac.system_models import (
    SinusoidInput,
    ZeroInput,
    literal_robot_reference,
    robot_gains,
)

# r1 = 0.2 [-sin, cos], r2 = 0.375 [sin, -cos], r3 = 0
THREE_ROBOTS = (
    RobotSpec(
        x0=(0.0, 0.0, 0.0, 0.0),
        reference_input=SinusoidInput(amplitude=(0.2, 0.2), omega=DEFAULT_OMEGA, phase=(pi, pi / 2)),
    ),
    RobotSpec(
        x0=(0.0, 1.52, 0.0, 0.0),
        reference_input=SinusoidInput(
            amplitude=(0.375, 0.375), omega=DEFAULT_OMEGA, phase=(0.0, -pi / 2)
        ),
    ),
    RobotSpec(x0=(0.5, -1.0, 0.0, 0.0), reference_input=ZeroInput(2)),
)


def _gain_reference() -> ReferenceSpec:
    K1, K2 = robot_gains(DEFAULT_K1_POSITION, DEFAULT_K1_VELOCITY, DEFAULT_K2)
    return ReferenceSpec(K1=K1, K2=K2)


def three_robot_scenario(
    algorithm: str = "ls",
    ca_enabled: bool = True,
    literal: bool = False,
    steps: int = DEFAULT_STEPS,
) -> RobotScenario:
    if literal:
        A_m, B_m = literal_robot_reference()
        reference = ReferenceSpec(A_m=A_m, B_m=B_m, strict=False)
    else:
        reference = _gain_reference()
    suffix = "literal" if literal else algorithm
    return RobotScenario(
        plant=PlantSpec(),
        reference=reference,
        robots=THREE_ROBOTS,
        adaptation=AdaptationSpec(algorithm=algorithm),
        repulsive=RepulsiveConfig(mass=DEFAULT_MASS_KG),
        ca_enabled=ca_enabled,
        steps=steps,
        name=f"three-robot-{suffix}" + ("" if ca_enabled else "-noca"),
    )


def single_robot_nominal(steps: int = 1000) -> RobotScenario:
    """theta_0 = theta*, so the tracking error stays at zero."""
    return RobotScenario(
        plant=PlantSpec(),
        reference=_gain_reference(),
        robots=(
            RobotSpec(
                x0=(0.3, -0.2, 0.0, 0.0),
                reference_input=SinusoidInput(
                    amplitude=(0.2, 0.2), omega=DEFAULT_OMEGA, phase=(0.0, pi / 2)
                ),
            ),
        ),
        adaptation=AdaptationSpec(theta0_fraction=1.0),
        ca_enabled=False,
        steps=steps,
        name="single-robot-nominal",
    )


PRESETS: dict[str, tuple[str, Callable[[], RobotScenario]]] = {
    "three-robot-ls": (
        "3 robots, least-squares adaptation, exactly matched reference, CA on",
        lambda: three_robot_scenario("ls"),
    ),
    "three-robot-gradient": (
        "3 robots, normalized gradient adaptation (gain 1.9), CA on",
        lambda: three_robot_scenario("gradient"),
    ),
    "three-robot-literal": (
        "3 robots, least squares, rounded literal A_m/B_m (matching residual reported)",
        lambda: three_robot_scenario("ls", literal=True),
    ),
    "three-robot-noca": (
        "3 robots, least squares, collision avoidance off",
        lambda: three_robot_scenario("ls", ca_enabled=False),
    ),
    "single-robot-nominal": (
        "1 robot starting from theta*, CA off; tracking error stays at zero",
        single_robot_nominal,
    ),
}

PRESET_ALIASES = {"three-robot": "three-robot-ls"}


def get_preset(name: str, steps: int | None = None) -> RobotScenario:
    key = PRESET_ALIASES.get(name, name)
    if key not in PRESETS:
        raise ConfigValidationError(
            f"unknown preset {name!r}; available: {', '.join(PRESETS)}", field_path="preset"
        )
    scenario = PRESETS[key][1]()
    if steps is not None:
        scenario = replace(scenario, steps=steps)
    return scenario
