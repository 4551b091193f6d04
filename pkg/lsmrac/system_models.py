"""
Discrete-time LTI plant and reference model, the matching condition between
them, and the robot plant builder.

The robot matrices follow the printed discrete model of a point-mass robot
with viscous friction. Note that its position/velocity coupling block is
``(1 - 0.5*b*dt**2/m) * I`` rather than the ``(dt - 0.5*b*dt**2/m) * I`` a
fresh discretization of the Newton model gives; the reference-model numbers
the scenario is tuned around are only consistent with the former.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from lsmrac.constants import DEFAULT_K2_UPPER_FACTOR, MATCHING_STRICT_TOL
from lsmrac.exceptions import ContractViolationError, MatchingError
from lsmrac.utils import as_matrix, as_rows, as_vector, logger, max_abs


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ZeroInput:
    """r(t) = 0."""

    dim: int = 2

    def __call__(self, t: int) -> np.ndarray:
        return np.zeros(self.dim)

    def sample(self, steps: int) -> np.ndarray:
        return np.zeros((steps, self.dim))


@dataclass(frozen=True)
class ConstantInput:
    """r(t) = value for every step."""

    value: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.value)

    def __call__(self, t: int) -> np.ndarray:
        return np.asarray(self.value, dtype=float)

    def sample(self, steps: int) -> np.ndarray:
        return np.tile(np.asarray(self.value, dtype=float), (steps, 1))


@dataclass(frozen=True)
class SinusoidInput:
    """Component c is ``amplitude[c] * sin(omega * t + phase[c])``.

    ``omega`` is in radians per step, ``t`` is the step index.
    """

    amplitude: tuple[float, ...]
    omega: float
    phase: tuple[float, ...]

    def __post_init__(self):
        if len(self.amplitude) != len(self.phase):
            raise ContractViolationError("amplitude and phase must have equal length")

    @property
    def dim(self) -> int:
        return len(self.amplitude)

    def __call__(self, t: int) -> np.ndarray:
        amp = np.asarray(self.amplitude, dtype=float)
        ph = np.asarray(self.phase, dtype=float)
        return amp * np.sin(self.omega * t + ph)

    def sample(self, steps: int) -> np.ndarray:
        """(steps, dim) table of r(0), ..., r(steps - 1)."""
        t = np.arange(steps, dtype=float)[:, None]
        return np.asarray(self.amplitude, dtype=float) * np.sin(
            self.omega * t + np.asarray(self.phase, dtype=float)
        )

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.amplitude))) if self.amplitude else 0.0


def input_peak(generator: Callable[[int], np.ndarray]) -> float:
    """Upper bound on max |r_c(t)| over all t for the known generator types."""
    if isinstance(generator, SinusoidInput):
        return generator.peak
    if isinstance(generator, ConstantInput):
        return float(np.max(np.abs(generator.value))) if generator.value else 0.0
    if isinstance(generator, ZeroInput):
        return 0.0
    raise ContractViolationError(f"no known bound for input generator {generator!r}")


@dataclass(frozen=True, eq=False)
class LtiPlant:
    """x(t+1) = A x(t) + B u(t)."""

    A: np.ndarray
    """State transition, n x n."""

    B: np.ndarray
    """Input map, n x m, full column rank."""

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ContractViolationError(f"A must be square, got shape {A.shape}")
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ContractViolationError(
                f"B must have {A.shape[0]} rows, got shape {B.shape}"
            )
        if np.linalg.matrix_rank(B) != B.shape[1]:
            raise ContractViolationError("B must have full column rank")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class ReferenceModel:
    """x_m(t+1) = A_m x_m(t) + B_m r(t) with A_m Schur stable."""

    A_m: np.ndarray
    B_m: np.ndarray
    input_generator: Callable[[int], np.ndarray] | None = None
    """r(t); defaults to a zero input of the right width."""

    def __post_init__(self):
        A_m = np.asarray(self.A_m, dtype=float)
        B_m = np.asarray(self.B_m, dtype=float)
        if A_m.ndim != 2 or A_m.shape[0] != A_m.shape[1]:
            raise ContractViolationError(f"A_m must be square, got shape {A_m.shape}")
        if B_m.ndim == 1:
            B_m = B_m.reshape(-1, 1)
        if B_m.shape[0] != A_m.shape[0]:
            raise ContractViolationError(
                f"B_m must have {A_m.shape[0]} rows, got shape {B_m.shape}"
            )
        radius = spectral_radius(A_m)
        if radius >= 1.0:
            raise ContractViolationError(
                f"reference model must be stable, spectral radius is {radius:.6f}"
            )
        object.__setattr__(self, "A_m", _frozen(A_m))
        object.__setattr__(self, "B_m", _frozen(B_m))
        if self.input_generator is None:
            object.__setattr__(self, "input_generator", ZeroInput(B_m.shape[1]))

    @property
    def n(self) -> int:
        return self.A_m.shape[0]

    @property
    def m(self) -> int:
        return self.B_m.shape[1]

    def r(self, t: int) -> np.ndarray:
        return as_vector(self.input_generator(t), self.m, "r(t)")

    def with_input(self, generator: Callable[[int], np.ndarray]) -> "ReferenceModel":
        return replace(self, input_generator=generator)


@dataclass(frozen=True, eq=False)
class MatchingParameters:
    """Matching gains and the plant parameterization derived from them.

    A + B K1*^T = A_m, B K2* = B_m, Theta2* = K2*^-1, Theta1* = K1* K2*^-T.
    """

    K1_star: np.ndarray
    K2_star: np.ndarray
    Theta1_star: np.ndarray
    Theta2_star: np.ndarray
    signs: np.ndarray
    """sign[k_2j*] per input channel."""

    k2_upper: np.ndarray
    """Upper bounds k_2j^b on |k_2j*|; projection keeps |theta_2j| >= 1/k_2j^b."""

    def __post_init__(self):
        K2 = np.asarray(self.K2_star, dtype=float)
        m = K2.shape[0]
        if K2.shape != (m, m) or max_abs(K2 - np.diag(np.diag(K2))) != 0.0:
            raise ContractViolationError("K2_star must be a square diagonal matrix")
        k2 = np.diag(K2)
        if np.any(k2 == 0.0):
            raise MatchingError("K2_star is singular")
        signs = as_vector(self.signs, m, "signs")
        if not np.array_equal(signs, np.sign(k2)):
            raise ContractViolationError("signs must equal sign(diag(K2_star))")
        k2_upper = as_vector(self.k2_upper, m, "k2_upper")
        if np.any(k2_upper <= 0.0) or np.any(np.abs(k2) > k2_upper):
            raise ContractViolationError("k2_upper must bound |diag(K2_star)| from above")
        n = np.asarray(self.K1_star).shape[0]
        for name in ("K1_star", "K2_star", "Theta1_star", "Theta2_star"):
            rows = n if name.startswith(("K1", "Theta1")) else m
            object.__setattr__(self, name, _frozen(as_matrix(getattr(self, name), rows, m, name)))
        object.__setattr__(self, "signs", _frozen(signs))
        object.__setattr__(self, "k2_upper", _frozen(k2_upper))

    @classmethod
    def from_gains(cls, K1_star, K2_star, k2_upper=None) -> "MatchingParameters":
        K2 = np.atleast_2d(np.asarray(K2_star, dtype=float))
        K1 = np.asarray(K1_star, dtype=float)
        if K1.ndim == 1:
            K1 = K1.reshape(-1, 1)
        if K2.shape[0] != K2.shape[1] or max_abs(K2 - np.diag(np.diag(K2))) != 0.0:
            raise ContractViolationError("K2_star must be a square diagonal matrix")
        k2 = np.diag(K2)
        if np.any(k2 == 0.0):
            raise MatchingError("K2_star is singular")
        theta2 = np.diag(1.0 / k2)
        # K2 diagonal, so K2^-T = diag(1/k2)
        theta1 = K1 @ theta2
        if k2_upper is None:
            k2_upper = DEFAULT_K2_UPPER_FACTOR * np.abs(k2)
        return cls(
            K1_star=K1,
            K2_star=K2,
            Theta1_star=theta1,
            Theta2_star=theta2,
            signs=np.sign(k2),
            k2_upper=np.broadcast_to(np.asarray(k2_upper, dtype=float), k2.shape),
        )

    @property
    def n(self) -> int:
        return self.K1_star.shape[0]

    @property
    def m(self) -> int:
        return self.K2_star.shape[0]


class MatchingResidual(NamedTuple):
    """Max-abs-entry residuals of the two matching equations."""

    a_residual: float
    b_residual: float

    def within(self, tol: float = MATCHING_STRICT_TOL) -> bool:
        return self.a_residual <= tol and self.b_residual <= tol


def plant_step(plant: LtiPlant, x, u) -> np.ndarray:
    """x(t+1) = A x + B u for one state (n,) or a stack (R, n)."""
    x = as_rows(x, plant.n, "x")
    u = as_rows(u, plant.m, "u")
    return x @ plant.A.T + u @ plant.B.T


def reference_step(model: ReferenceModel, x_m, t: int, r=None) -> np.ndarray:
    """x_m(t+1) = A_m x_m + B_m r(t); pass ``r`` to skip the generator call."""
    x_m = as_rows(x_m, model.n, "x_m")
    r = model.r(t) if r is None else as_rows(r, model.m, "r")
    return x_m @ model.A_m.T + r @ model.B_m.T


def sample_inputs(generator: Callable[[int], np.ndarray], steps: int, m: int) -> np.ndarray:
    """(steps, m) table of r(0), ..., r(steps - 1)."""
    sample = getattr(generator, "sample", None)
    if sample is not None:
        table = np.asarray(sample(steps), dtype=float)
    else:
        table = np.array([as_vector(generator(t), m, "r(t)") for t in range(steps)]).reshape(steps, m)
    if table.shape != (steps, m):
        raise ContractViolationError(f"reference input must have {m} entries, got {table.shape[1:]}")
    return table


def build_reference_from_gains(
    plant: LtiPlant,
    K1_star,
    K2_star,
    input_generator: Callable[[int], np.ndarray] | None = None,
    k2_upper=None,
) -> tuple[ReferenceModel, MatchingParameters]:
    """Construct A_m = A + B K1*^T and B_m = B K2* so that matching holds exactly."""
    K1 = as_matrix(K1_star, plant.n, plant.m, "K1_star")
    K2 = as_matrix(K2_star, plant.m, plant.m, "K2_star")
    params = MatchingParameters.from_gains(K1, K2, k2_upper=k2_upper)
    A_m = plant.A + plant.B @ K1.T
    B_m = plant.B @ K2
    model = ReferenceModel(
        A_m=A_m,
        B_m=B_m,
        input_generator=input_generator or ZeroInput(plant.m),
    )
    return model, params


def verify_matching(plant: LtiPlant, A_m, B_m, params: MatchingParameters) -> MatchingResidual:
    A_m = as_matrix(A_m, plant.n, plant.n, "A_m")
    B_m = as_matrix(B_m, plant.n, plant.m, "B_m")
    a_res = max_abs(plant.A - (A_m - B_m @ params.Theta1_star.T))
    b_res = max_abs(plant.B - B_m @ params.Theta2_star)
    return MatchingResidual(a_res, b_res)


def solve_matching(
    plant: LtiPlant,
    A_m,
    B_m,
    k2_upper=None,
    strict: bool = True,
    tol: float = MATCHING_STRICT_TOL,
) -> tuple[MatchingParameters, MatchingResidual]:
    """Recover K1*, K2* from given A_m, B_m by least squares.

    K2* is restricted to be diagonal and solved column by column; K1* comes
    from the pseudo-inverse of B. In strict mode a residual above ``tol``
    raises MatchingError, otherwise it is logged and returned.
    """
    A_m = as_matrix(A_m, plant.n, plant.n, "A_m")
    B_m = as_matrix(B_m, plant.n, plant.m, "B_m")
    B = plant.B
    k2 = np.einsum("ij,ij->j", B, B_m) / np.einsum("ij,ij->j", B, B)
    K2 = np.diag(k2)
    K1 = (np.linalg.pinv(B) @ (A_m - plant.A)).T
    params = MatchingParameters.from_gains(K1, K2, k2_upper=k2_upper)
    residual = verify_matching(plant, A_m, B_m, params)
    if not residual.within(tol):
        msg = (
            f"Matching residuals exceed {tol:g}: "
            f"A-residual={residual.a_residual:.3e}, B-residual={residual.b_residual:.3e}"
        )
        if strict:
            raise MatchingError(
                msg, a_residual=residual.a_residual, b_residual=residual.b_residual
            )
        logger.warning(msg)
    else:
        logger.info(
            f"Matching residuals: A={residual.a_residual:.3e}, B={residual.b_residual:.3e}"
        )
    return params, residual


def build_robot_plant(mass: float, friction: float, dt: float) -> LtiPlant:
    """Planar point-mass robot, state [x, y, vx, vy], input [ux, uy] in N."""
    if not mass > 0:
        raise ContractViolationError(f"mass must be positive, got {mass}")
    if not dt > 0:
        raise ContractViolationError(f"dt must be positive, got {dt}")
    if friction < 0:
        raise ContractViolationError(f"friction must be non-negative, got {friction}")
    I2 = np.eye(2)
    Z2 = np.zeros((2, 2))
    A = np.block(
        [
            [I2, (1.0 - 0.5 * friction * dt**2 / mass) * I2],
            [Z2, (1.0 - friction * dt / mass) * I2],
        ]
    )
    B = np.vstack([(0.5 * dt**2 / mass) * I2, (dt / mass) * I2])
    return LtiPlant(A=A, B=B)


def robot_gains(k_position: float, k_velocity: float, k2: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis state feedback gains for the robot, returned as (K1*, K2*).

    K1*^T x = k_position * position + k_velocity * velocity on each axis.
    """
    I2 = np.eye(2)
    K1 = np.vstack([k_position * I2, k_velocity * I2])
    return K1, k2 * I2


def literal_robot_reference() -> tuple[np.ndarray, np.ndarray]:
    """The rounded A_m, B_m printed for the robot scenario.

    They do not satisfy the matching condition with the robot plant exactly.
    """
    I2 = np.eye(2)
    A_m = np.block([[0.9999 * I2, 0.9997 * I2], [-0.0028 * I2, 0.775 * I2]])
    B_m = np.vstack([-0.0007 * I2, -0.0278 * I2])
    return A_m, B_m


def spectral_radius(M) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(M, dtype=float)))))


def reference_bound(
    model: ReferenceModel,
    x_m0,
    r_max: float,
    max_terms: int = 1_000_000,
    tail_tol: float = 1e-12,
) -> float:
    """Bound on sup_t ||x_m(t)||_inf for inputs with |r_c(t)| <= r_max.

    Uses ||A_m^t x_m0|| + sum_k ||A_m^k B_m|| r_max with induced inf-norms,
    summed until the power norm drops below ``tail_tol``.
    """
    x0 = as_vector(x_m0, model.n, "x_m0")
    x0_norm = float(np.max(np.abs(x0))) if x0.size else 0.0
    power = np.eye(model.n)
    peak_power = 1.0
    total = 0.0
    for _ in range(max_terms):
        total += np.linalg.norm(power @ model.B_m, ord=np.inf)
        power = power @ model.A_m
        power_norm = np.linalg.norm(power, ord=np.inf)
        peak_power = max(peak_power, power_norm)
        if power_norm < tail_tol:
            break
    else:
        raise ContractViolationError("reference bound series did not converge")
    bound = peak_power * x0_norm + total * r_max
    return float(bound) if math.isfinite(bound) else math.inf
