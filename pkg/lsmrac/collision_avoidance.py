"""
Repulsive potential fields between robots and the energy-limited blending of
tracking input with repulsive force: U = F_r + alpha * U_o.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from lsmrac.constants import (
    DEFAULT_BETA,
    DEFAULT_ETA,
    DEFAULT_GAMMA_M,
    DEFAULT_MASS_KG,
    DEFAULT_RHO0_M,
    DEFAULT_RHO_MIN_M,
    DEFAULT_V_MAX_M_PER_S,
)
from lsmrac.exceptions import ContractViolationError
from lsmrac.utils import as_vector, logger


@dataclass(frozen=True)
class RepulsiveConfig:
    """Parameters of the repulsive field shared by all robots."""

    eta: float = DEFAULT_ETA
    """Field strength."""

    gamma: float = DEFAULT_GAMMA_M
    """Robot radius in m."""

    rho0: float = DEFAULT_RHO0_M
    """Influence (safe) distance in m; the field vanishes beyond it."""

    rho_min: float = DEFAULT_RHO_MIN_M
    """Minimum allowed center distance in m."""

    v_max: float = DEFAULT_V_MAX_M_PER_S
    """Speed cap in m/s used only in the intrusion energy bound."""

    beta: float = DEFAULT_BETA
    """Fraction of the remaining energy budget tracking may spend, in [0, 1)."""

    mass: float = DEFAULT_MASS_KG

    def __post_init__(self):
        if not 0.0 < self.gamma < self.rho_min < self.rho0:
            raise ContractViolationError(
                f"need 0 < gamma < rho_min < rho0, got gamma={self.gamma}, "
                f"rho_min={self.rho_min}, rho0={self.rho0}"
            )
        if not 0.0 <= self.beta < 1.0:
            raise ContractViolationError(f"beta must lie in [0, 1), got {self.beta}")
        for name in ("eta", "v_max", "mass"):
            if not getattr(self, name) > 0.0:
                raise ContractViolationError(f"{name} must be positive, got {getattr(self, name)}")


class PairGeometry(NamedTuple):
    rho_ij: float
    unit_ij: np.ndarray
    """Unit vector from robot j toward robot i."""

    degenerate: bool = False


class EnergyFeasibility(NamedTuple):
    feasible: bool
    lhs: float
    rhs: float


@dataclass(frozen=True, eq=False)
class CaStep:
    """Per-robot outcome of one collision avoidance step."""

    F_r: np.ndarray
    alpha: np.ndarray
    U: np.ndarray
    degenerate: np.ndarray


def _field(rho, cfg: RepulsiveConfig) -> np.ndarray:
    rho_c = np.maximum(rho, cfg.gamma)
    return np.where(rho_c <= cfg.rho0, 0.5 * cfg.eta * (1.0 / rho_c - 1.0 / cfg.rho0) ** 2, 0.0)


def _magnitude(rho, cfg: RepulsiveConfig) -> np.ndarray:
    rho_c = np.maximum(rho, cfg.gamma)
    return np.where(rho_c <= cfg.rho0, cfg.eta * (1.0 / rho_c - 1.0 / cfg.rho0) / rho_c**2, 0.0)


def field_value(rho: float, cfg: RepulsiveConfig) -> float:
    """W(rho), held at its rho = gamma value inside the robot radius."""
    return float(_field(rho, cfg))


def force_magnitude(rho: float, cfg: RepulsiveConfig) -> float:
    return float(_magnitude(rho, cfg))


def plateau_force(cfg: RepulsiveConfig) -> float:
    """Force magnitude inside the robot radius; the largest the field produces."""
    return cfg.eta * (1.0 / cfg.gamma - 1.0 / cfg.rho0) / cfg.gamma**2


def pair_geometry(p_i, p_j) -> PairGeometry:
    diff = as_vector(p_i, 2, "p_i") - as_vector(p_j, 2, "p_j")
    rho = float(np.hypot(diff[0], diff[1]))
    if rho == 0.0:
        # coincident centers: no direction, push along +x and flag it
        return PairGeometry(0.0, np.array([1.0, 0.0]), True)
    return PairGeometry(rho, diff / rho, False)


def pair_force(geom: PairGeometry, cfg: RepulsiveConfig) -> np.ndarray:
    """Force on robot i from robot j's field, pointing away from j."""
    return force_magnitude(geom.rho_ij, cfg) * np.asarray(geom.unit_ij, dtype=float)


def resultant_force(positions: Sequence, self_index: int, cfg: RepulsiveConfig) -> np.ndarray:
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    total = np.zeros(2)
    for j in range(pos.shape[0]):
        if j != self_index:
            total += pair_force(pair_geometry(pos[self_index], pos[j]), cfg)
    return total


def energy_budget(rho_ij: float, cfg: RepulsiveConfig) -> float:
    """Delta E = W(rho_min) - W(rho_ij), floored at 0."""
    return max(field_value(cfg.rho_min, cfg) - field_value(rho_ij, cfg), 0.0)


def intrusion_energy(u_track, f_pair, cfg: RepulsiveConfig, dt: float) -> float | None:
    """Largest energy u_track can push toward robot j during one step.

    Returns None when the pair force is zero and no budget applies.
    """
    u = as_vector(u_track, 2, "u_track")
    f = as_vector(f_pair, 2, "f_pair")
    f_norm = float(np.hypot(f[0], f[1]))
    if f_norm == 0.0:
        return None
    return -float(u @ f) / f_norm * cfg.v_max * dt


def alpha_coefficient(
    u_track,
    pair_forces: Sequence,
    budgets: Sequence[float],
    cfg: RepulsiveConfig,
    dt: float,
) -> float:
    """alpha_i = min_j alpha_ij, alpha_ij = min(beta dE / E, 1) if E > 0 else 1."""
    if len(pair_forces) != len(budgets):
        raise ContractViolationError("pair_forces and budgets must have equal length")
    alpha = 1.0
    for f_pair, budget in zip(pair_forces, budgets):
        energy = intrusion_energy(u_track, f_pair, cfg, dt)
        if energy is None or energy <= 0.0:
            continue
        alpha = min(alpha, cfg.beta * budget / energy)
    return float(min(max(alpha, 0.0), 1.0))


def modified_input(u_track, F_r, alpha: float) -> np.ndarray:
    if not 0.0 <= alpha <= 1.0:
        raise ContractViolationError(f"alpha must lie in [0, 1], got {alpha}")
    return as_vector(F_r, 2, "F_r") + alpha * as_vector(u_track, 2, "u_track")


def check_energy_feasibility(cfg: RepulsiveConfig) -> EnergyFeasibility:
    """W(rho_min) >= W(rho0) + 1/2 mass v_max^2, logged when violated."""
    lhs = field_value(cfg.rho_min, cfg)
    rhs = field_value(cfg.rho0, cfg) + 0.5 * cfg.mass * cfg.v_max**2
    feasible = lhs >= rhs
    if not feasible:
        logger.warning(
            f"Repulsive field energy criterion not met: W(rho_min)={lhs:.4g} < "
            f"W(rho0) + m v_max^2 / 2 = {rhs:.4g}; separation is not guaranteed at v_max"
        )
    return EnergyFeasibility(feasible, lhs, rhs)


def collision_avoidance_step(
    positions: Sequence,
    u_tracks: Sequence,
    cfg: RepulsiveConfig,
    dt: float,
) -> CaStep:
    """Compose F_r, alpha and U for every robot from the current positions."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    tracks = np.asarray(u_tracks, dtype=float).reshape(-1, 2)
    count = pos.shape[0]
    others = ~np.eye(count, dtype=bool)
    # [i, j] entries describe robot j as seen from robot i
    diff = pos[:, None, :] - pos[None, :, :]
    rho = np.hypot(diff[..., 0], diff[..., 1])
    coincident = others & (rho == 0.0)
    unit = diff / np.where(rho > 0.0, rho, 1.0)[..., None]
    unit[coincident] = (1.0, 0.0)
    forces = np.where(others, _magnitude(rho, cfg), 0.0)[..., None] * unit
    F_r = forces.sum(axis=1)

    budgets = np.maximum(_field(cfg.rho_min, cfg) - _field(rho, cfg), 0.0)
    f_norm = np.hypot(forces[..., 0], forces[..., 1])
    pushing = f_norm > 0.0
    energy = (
        -np.sum(tracks[:, None, :] * forces, axis=-1)
        / np.where(pushing, f_norm, 1.0)
        * cfg.v_max
        * dt
    )
    limited = pushing & (energy > 0.0)
    ratios = np.where(limited, cfg.beta * budgets / np.where(limited, energy, 1.0), 1.0)
    alpha = np.clip(ratios.min(axis=1, initial=1.0), 0.0, 1.0)
    return CaStep(
        F_r=F_r,
        alpha=alpha,
        U=F_r + alpha[:, None] * tracks,
        degenerate=coincident.any(axis=1),
    )
