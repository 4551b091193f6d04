"""
Adaptive laws for the indirect state tracking controller.

The least-squares law minimizes

    J(theta) = 1/2 sum_tau (1/kappa) ||mu(tau) + Z^T(tau) theta||^2
               + 1/2 (theta - theta_0)^T P_0^-1 (theta - theta_0)

recursively. A normalized gradient law is kept as the comparison baseline.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from lsmrac.constants import SYMMETRY_TOL
from lsmrac.exceptions import ContractViolationError, NumericalError
from lsmrac.regressor_filters import RegressorSnapshot, ThetaVector
from lsmrac.system_models import MatchingParameters
from lsmrac.utils import as_rows, as_vector, symmetrize


@dataclass(frozen=True, eq=False)
class ProjectionBounds:
    """Known signs of k_2j* and upper bounds k_2j^b on their magnitudes."""

    signs: np.ndarray
    k2_upper: np.ndarray

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=float).reshape(-1)
        k2_upper = np.asarray(self.k2_upper, dtype=float).reshape(-1)
        if signs.shape != k2_upper.shape:
            raise ContractViolationError("signs and k2_upper must have equal length")
        if not np.all(np.abs(signs) == 1.0):
            raise ContractViolationError("signs must be +1 or -1")
        if np.any(k2_upper <= 0.0):
            raise ContractViolationError("k2_upper must be positive")
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "k2_upper", k2_upper)

    @classmethod
    def from_matching(cls, params: MatchingParameters) -> "ProjectionBounds":
        return cls(signs=params.signs, k2_upper=params.k2_upper)

    @cached_property
    def floor(self) -> np.ndarray:
        return 1.0 / self.k2_upper


@dataclass(eq=False)
class RlsState:
    theta: ThetaVector
    P: np.ndarray
    """P(t-1), symmetric positive definite."""

    kappa: float
    projection: ProjectionBounds | None = None
    history_enabled: bool = False
    history: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    """(Z, mu) pairs consumed so far, kept only when history_enabled.

    Updates append in place, so states derived from one another share the list.
    """

    P0: np.ndarray | None = None
    theta0: ThetaVector | None = None
    last_decrement: float = 0.0
    """epsilon^T N^-1 epsilon of the latest update."""

    def __post_init__(self):
        if not self.kappa > 0:
            raise ContractViolationError(f"kappa must be positive, got {self.kappa}")
        size = self.theta.flat.size
        P = np.asarray(self.P, dtype=float)
        if P.shape != (size, size):
            raise ContractViolationError(f"P must be {size}x{size}, got {P.shape}")
        self.P = P
        if self.P0 is None:
            self.P0 = P.copy()
        if self.theta0 is None:
            self.theta0 = self.theta

    @classmethod
    def initial(
        cls,
        theta0: ThetaVector,
        P0,
        kappa: float,
        projection: ProjectionBounds | None = None,
        history_enabled: bool = False,
    ) -> "RlsState":
        P0 = np.asarray(P0, dtype=float)
        if P0.ndim == 0:
            P0 = float(P0) * np.eye(theta0.flat.size)
        _cholesky(P0, "P0")
        if projection is not None:
            theta0 = project_theta2(theta0, projection)
        return cls(
            theta=theta0,
            P=P0.copy(),
            kappa=float(kappa),
            projection=projection,
            history_enabled=history_enabled,
            P0=P0.copy(),
            theta0=theta0,
        )


@dataclass(eq=False)
class GradientState:
    theta: ThetaVector
    gains: list[np.ndarray]
    """Gamma_j per input channel, symmetric with eigenvalues in (0, 2)."""

    projection: ProjectionBounds | None = None
    last_normalizer: float = 1.0

    def __post_init__(self):
        size = self.theta.n + 1
        if len(self.gains) != self.theta.m:
            raise ContractViolationError(
                f"expected {self.theta.m} gain matrices, got {len(self.gains)}"
            )
        checked = []
        for j, gain in enumerate(self.gains):
            gain = np.asarray(gain, dtype=float)
            if gain.shape != (size, size):
                raise ContractViolationError(f"Gamma_{j} must be {size}x{size}")
            if np.max(np.abs(gain - gain.T)) > SYMMETRY_TOL:
                raise ContractViolationError(f"Gamma_{j} must be symmetric")
            eig = np.linalg.eigvalsh(gain)
            if eig.min() <= 0.0 or eig.max() >= 2.0:
                raise ContractViolationError(
                    f"Gamma_{j} eigenvalues must lie in (0, 2), got [{eig.min():.3g}, {eig.max():.3g}]"
                )
            checked.append(gain)
        self.gains = checked

    @classmethod
    def scalar(
        cls, theta0: ThetaVector, gamma: float, projection: ProjectionBounds | None = None
    ) -> "GradientState":
        gains = [gamma * np.eye(theta0.n + 1) for _ in range(theta0.m)]
        if projection is not None:
            theta0 = project_theta2(theta0, projection)
        return cls(theta=theta0, gains=gains, projection=projection)


@dataclass(eq=False)
class EstimatorState:
    xhat: np.ndarray

    def __post_init__(self):
        self.xhat = np.asarray(self.xhat, dtype=float).reshape(-1).copy()
        if not np.all(np.isfinite(self.xhat)):
            raise ContractViolationError("estimator state must be finite")


def _cholesky(matrix: np.ndarray, name: str):
    try:
        return cho_factor(matrix, lower=True, check_finite=False)
    except (LinAlgError, ValueError) as e:
        raise NumericalError(f"{name} is not numerically positive definite: {e}") from e


def pack_theta(Theta1, theta2) -> ThetaVector:
    return ThetaVector.from_blocks(Theta1, theta2)


def unpack_theta(theta: ThetaVector) -> tuple[np.ndarray, np.ndarray]:
    """Return (Theta1 n x m, theta2 m-vector)."""
    return theta.Theta1, theta.theta2


def theta_from_matching(params: MatchingParameters) -> ThetaVector:
    return ThetaVector.from_blocks(params.Theta1_star, np.diag(params.Theta2_star))


def rls_update(state: RlsState, snapshot: RegressorSnapshot) -> RlsState:
    """One least-squares step.

    N = kappa I + Z^T P Z
    theta+ = theta - P Z N^-1 epsilon
    P+ = P - P Z N^-1 Z^T P

    Projection, when configured, clamps theta_2 afterwards and leaves P alone.
    """
    Z = snapshot.Z
    P = state.P
    if Z.shape[0] != P.shape[0]:
        raise ContractViolationError(
            f"Z has {Z.shape[0]} rows, expected {P.shape[0]}"
        )
    PZ = P @ Z
    N = Z.T @ PZ
    N.flat[:: N.shape[0] + 1] += state.kappa
    factor = _cholesky(N, "N")
    # one solve for N^-1 epsilon and N^-1 Z^T P
    solved = cho_solve(factor, np.column_stack((snapshot.epsilon, PZ.T)), check_finite=False)
    n_inv_eps = solved[:, 0]
    flat = state.theta.flat - PZ @ n_inv_eps
    if state.projection is not None:
        flat = _project_flat(flat, state.theta.n, state.projection)
    P_next = symmetrize(P - PZ @ solved[:, 1:])
    if state.history_enabled:
        state.history.append((Z.copy(), snapshot.mu.copy()))
    return replace(
        state,
        theta=state.theta.with_flat(flat),
        P=P_next,
        last_decrement=float(snapshot.epsilon @ n_inv_eps),
    )


def batch_solve(
    history: Iterable[tuple[np.ndarray, np.ndarray]],
    P0,
    theta0: ThetaVector,
    kappa: float,
) -> ThetaVector:
    """Closed-form minimizer of the accumulated cost over ``history``.

    theta = P (P_0^-1 theta_0 - sum Z mu / kappa) with
    P^-1 = P_0^-1 + sum Z Z^T / kappa.
    """
    P0 = np.asarray(P0, dtype=float)
    information = covariance_information(P0)
    rhs = information @ theta0.flat
    for Z, mu in history:
        Z = np.asarray(Z, dtype=float)
        information = information + (Z @ Z.T) / kappa
        rhs = rhs - (Z @ np.asarray(mu, dtype=float)) / kappa
    factor = _cholesky(symmetrize(information), "information matrix")
    return theta0.with_flat(cho_solve(factor, rhs))


def cost_gradient(
    history: Sequence[tuple[np.ndarray, np.ndarray]],
    P0,
    theta0: ThetaVector,
    kappa: float,
    theta: ThetaVector,
) -> np.ndarray:
    """dJ/dtheta; zero at the batch minimizer."""
    P0 = np.asarray(P0, dtype=float)
    grad = cho_solve(_cholesky(P0, "P0"), theta.flat - theta0.flat)
    for Z, mu in history:
        Z = np.asarray(Z, dtype=float)
        grad = grad + Z @ (np.asarray(mu, dtype=float) + Z.T @ theta.flat) / kappa
    return grad


def covariance_information(P) -> np.ndarray:
    """P^-1 through a Cholesky factorization."""
    P = np.asarray(P, dtype=float)
    return symmetrize(cho_solve(_cholesky(P, "P"), np.eye(P.shape[0])))


def project_theta2(theta: ThetaVector, bounds: ProjectionBounds) -> ThetaVector:
    """Clamp each theta_2j to sign_j / k_2j^b when sign_j * theta_2j < 1 / k_2j^b."""
    if bounds.signs.size != theta.m:
        raise ContractViolationError("projection bounds do not match theta")
    return theta.with_flat(_project_flat(theta.flat, theta.n, bounds))


def _project_flat(flat: np.ndarray, n: int, bounds: ProjectionBounds) -> np.ndarray:
    theta2 = flat[n :: n + 1]
    low = bounds.signs * theta2 < bounds.floor
    if not low.any():
        return flat
    out = flat.copy()
    out[n :: n + 1] = np.where(low, bounds.signs * bounds.floor, theta2)
    return out


def gradient_update(
    state: GradientState,
    snapshot: RegressorSnapshot,
    zetas: np.ndarray | None = None,
    norm_sq: float | None = None,
) -> GradientState:
    """theta_j+ = theta_j - Gamma_j sum_k eps_k zeta_kj / m^2.

    m^2 = 1 + sum_ij (zeta_ij^T zeta_ij + xi_ij^2) unless ``norm_sq`` is given.
    """
    zeta = snapshot.zeta if zetas is None else np.asarray(zetas, dtype=float)
    if norm_sq is None:
        norm_sq = 1.0 + snapshot.zeta_norm_sq + snapshot.xi_norm_sq
    direction = np.einsum("k,kjl->jl", snapshot.epsilon, zeta)
    cols = np.array(state.theta.columns)
    for j, gain in enumerate(state.gains):
        cols[j] -= gain @ direction[j] / norm_sq
    theta_next = state.theta.with_flat(cols.reshape(-1))
    if state.projection is not None:
        theta_next = project_theta2(theta_next, state.projection)
    return replace(state, theta=theta_next, last_normalizer=float(norm_sq))


def _columns(theta) -> np.ndarray:
    return theta.columns if isinstance(theta, ThetaVector) else np.asarray(theta, dtype=float)


def estimate_next(xhat, theta, x, u, A_m, B_m) -> np.ndarray:
    """x_hat+ = A_m x_hat + B_m (Theta2 u - Theta1^T x).

    ``theta`` is a ThetaVector or a (R, m, n+1) column stack; states and
    inputs then carry the same leading robot axis.
    """
    cols = _columns(theta)
    n = cols.shape[-1] - 1
    drive = cols[..., n] * u - np.matmul(cols[..., :n], np.asarray(x)[..., None])[..., 0]
    return np.matmul(xhat, A_m.T) + np.matmul(drive, B_m.T)


def estimator_step(est: EstimatorState, theta: ThetaVector, x, u, A_m, B_m) -> EstimatorState:
    """Advance the estimator by one step with the applied u."""
    x = as_vector(x, theta.n, "x")
    u = as_vector(u, theta.m, "u")
    A_m = np.asarray(A_m, dtype=float)
    B_m = np.asarray(B_m, dtype=float)
    return EstimatorState(xhat=estimate_next(est.xhat, theta, x, u, A_m, B_m))


def control_law(theta, x, r) -> np.ndarray:
    """u = Theta2^-1 (Theta1^T x + r); Theta2 is diagonal.

    Accepts one robot or a (R, m, n+1) column stack with (R, n) states.
    """
    cols = _columns(theta)
    n = cols.shape[-1] - 1
    x = as_rows(x, n, "x")
    r = as_rows(r, cols.shape[-2], "r")
    theta2 = cols[..., n]
    if np.any(theta2 == 0.0):
        raise ContractViolationError("theta_2 has a zero entry; Theta2 is not invertible")
    return (np.matmul(cols[..., :n], x[..., None])[..., 0] + r) / theta2


def lyapunov_monitor(theta: ThetaVector, theta_star: ThetaVector, P) -> float:
    """V = (theta - theta*)^T P^-1 (theta - theta*), solved without forming P^-1."""
    err = theta.flat - theta_star.flat
    return float(err @ cho_solve(_cholesky(np.asarray(P, dtype=float), "P"), err))


def theta_bound(V0: float, P0, theta_star: ThetaVector) -> float:
    """sqrt(V0 * lambda_max(P0)) + ||theta*||, a bound on ||theta(t)||."""
    lam = float(np.linalg.eigvalsh(np.asarray(P0, dtype=float)).max())
    return float(np.sqrt(max(V0, 0.0) * lam) + np.linalg.norm(theta_star.flat))


class AdaptiveLaw(ABC):
    """Common interface of the per-robot parameter update."""

    name: str

    @property
    @abstractmethod
    def theta(self) -> ThetaVector:
        """Current estimate theta(t)"""

    @abstractmethod
    def update(self, snapshot: RegressorSnapshot) -> None:
        """Consume one snapshot and advance theta"""

    @property
    def P(self) -> np.ndarray | None:
        return None

    @property
    def last_decrement(self) -> float:
        return float("nan")


class RlsLaw(AdaptiveLaw):
    name = "ls"

    def __init__(self, state: RlsState):
        self.state = state

    @property
    def theta(self) -> ThetaVector:
        return self.state.theta

    @property
    def P(self) -> np.ndarray:
        return self.state.P

    @property
    def last_decrement(self) -> float:
        return self.state.last_decrement

    def update(self, snapshot: RegressorSnapshot) -> None:
        self.state = rls_update(self.state, snapshot)


class GradientLaw(AdaptiveLaw):
    name = "gradient"

    def __init__(self, state: GradientState):
        self.state = state

    @property
    def theta(self) -> ThetaVector:
        return self.state.theta

    def update(self, snapshot: RegressorSnapshot) -> None:
        self.state = gradient_update(self.state, snapshot)


def make_adaptive_law(
    algorithm: Literal["ls", "gradient"],
    theta0: ThetaVector,
    kappa: float = 1e-5,
    p0_scale: float = 1.0,
    gradient_gain: float = 1.9,
    projection: ProjectionBounds | None = None,
) -> AdaptiveLaw:
    if algorithm == "ls":
        return RlsLaw(RlsState.initial(theta0, p0_scale, kappa, projection=projection))
    if algorithm == "gradient":
        return GradientLaw(GradientState.scalar(theta0, gradient_gain, projection=projection))
    raise ContractViolationError(f"Unknown adaptation algorithm {algorithm!r}")
