"""
Filtering through W_m(z) = (zI - A_m)^-1 B_m for the diagonal-K2* parameterization.

For every input channel j the bank keeps

* ``X[j]`` (n x (n+1)): row i is zeta_ij = w_ij(z)[omega_j]
* ``s[j]`` (n,): entry i is w_ij(z)[theta_j^T omega_j]

with omega_j = [-x; u_j]. All filters are strictly proper: outputs read at
step t depend on inputs up to t-1 only. At each step read the outputs first,
then call :meth:`FilterBank.update` with the time-t inputs.

A bank built with ``batch=R`` holds R independent robots along a leading
axis; the simulator advances a whole team with one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from lsmrac.exceptions import ContractViolationError
from lsmrac.utils import as_matrix, as_vector


@dataclass(frozen=True, eq=False)
class ThetaVector:
    """Stacked estimate theta = [theta_1; ...; theta_m], theta_j = [Theta1[:, j]; theta_2j]."""

    flat: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        size = self.m * (self.n + 1)
        flat = self.flat
        if not (isinstance(flat, np.ndarray) and flat.dtype == np.float64 and flat.shape == (size,)):
            flat = as_vector(flat, size, "theta")
        flat = flat.copy()
        flat.setflags(write=False)
        object.__setattr__(self, "flat", flat)

    @classmethod
    def from_blocks(cls, Theta1, theta2) -> "ThetaVector":
        Theta1 = np.asarray(Theta1, dtype=float)
        n, m = Theta1.shape
        theta2 = np.diag(theta2) if np.ndim(theta2) == 2 else np.asarray(theta2, dtype=float)
        theta2 = as_vector(theta2, m, "theta2")
        cols = np.vstack([Theta1, theta2[None, :]])  # (n+1) x m
        return cls(flat=cols.T.reshape(-1), n=n, m=m)

    @cached_property
    def columns(self) -> np.ndarray:
        """m x (n+1) read-only array, row j is theta_j."""
        return self.flat.reshape(self.m, self.n + 1)

    @cached_property
    def Theta1(self) -> np.ndarray:
        return self.columns[:, : self.n].T

    @cached_property
    def theta2(self) -> np.ndarray:
        return self.columns[:, self.n]

    @property
    def Theta2(self) -> np.ndarray:
        return np.diag(self.theta2)

    def with_flat(self, flat) -> "ThetaVector":
        return ThetaVector(flat=flat, n=self.n, m=self.m)


def as_columns(theta, n: int, m: int) -> np.ndarray:
    """Parameter columns (..., m, n+1) from a ThetaVector or an already stacked array."""
    if isinstance(theta, ThetaVector):
        if theta.n != n or theta.m != m:
            raise ContractViolationError(
                f"theta is for n={theta.n}, m={theta.m}; expected n={n}, m={m}"
            )
        return theta.columns
    cols = np.asarray(theta, dtype=float)
    if cols.shape[-2:] != (m, n + 1):
        raise ContractViolationError(
            f"theta columns must end in shape ({m}, {n + 1}), got {cols.shape}"
        )
    return cols


@dataclass(frozen=True, eq=False)
class RegressorSnapshot:
    """Signals of one step; epsilon = mu + Z^T theta by construction."""

    Z: np.ndarray
    """m(n+1) x n, column i is zeta_i = [zeta_i1; ...; zeta_im]."""

    mu: np.ndarray
    epsilon: np.ndarray
    xi: np.ndarray
    """n x m matrix of xi_ij."""

    xi_sum: np.ndarray
    zeta_norm_sq: float
    xi_norm_sq: float
    e_x: np.ndarray

    @property
    def zeta(self) -> np.ndarray:
        """n x m x (n+1) view, [i, j] is zeta_ij."""
        n = self.Z.shape[1]
        m = self.xi.shape[1]
        return self.Z.T.reshape(n, m, n + 1)


class SnapshotBatch(NamedTuple):
    """Snapshot arrays of a batched bank, robot on the leading axis."""

    Z: np.ndarray
    mu: np.ndarray
    epsilon: np.ndarray
    xi: np.ndarray
    zeta_norm_sq: np.ndarray
    e_x: np.ndarray

    def robot(self, i: int) -> RegressorSnapshot:
        xi = self.xi[i]
        return RegressorSnapshot(
            Z=self.Z[i],
            mu=self.mu[i],
            epsilon=self.epsilon[i],
            xi=xi,
            xi_sum=xi.sum(axis=1),
            zeta_norm_sq=float(self.zeta_norm_sq[i]),
            xi_norm_sq=float(np.sum(xi * xi)),
            e_x=self.e_x[i],
        )


def build_omega(x, u) -> np.ndarray:
    """(..., m, n+1) array whose row j is omega_j = [-x; u_j].

    ``x`` (n,) with ``u`` (m,) gives one robot; (R, n) with (R, m) gives R.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.ndim <= 1:
        x = x.reshape(-1)
        u = u.reshape(-1)
    omega = np.empty(u.shape + (x.shape[-1] + 1,))
    omega[..., :-1] = -x[..., None, :]
    omega[..., -1] = u
    return omega


def _xi(X: np.ndarray, s: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.matmul(X, cols[..., None])[..., 0] - s, -1, -2)


def _snapshot_arrays(X: np.ndarray, s: np.ndarray, cols: np.ndarray, e_x: np.ndarray):
    n = s.shape[-1]
    lead = X.shape[:-3]
    zeta = np.swapaxes(X, -3, -2)
    Z = np.swapaxes(zeta.reshape(lead + (n, -1)), -1, -2)
    mu = e_x - s.sum(axis=-2)
    flat = cols.reshape(lead + (-1,))
    epsilon = mu + np.matmul(flat[..., None, :], Z)[..., 0, :]
    xi = _xi(X, s, cols)
    zeta_norm_sq = np.sum(X * X, axis=(-3, -2, -1))
    return Z, mu, epsilon, xi, zeta_norm_sq


class FilterBank:
    """Single-owner state machine realizing the zeta and nu filters."""

    def __init__(self, A_m, B_m, X0=None, s0=None, batch: int | None = None):
        A_m = np.asarray(A_m, dtype=float)
        n = A_m.shape[0]
        B_m = np.asarray(B_m, dtype=float)
        if B_m.ndim == 1:
            B_m = B_m.reshape(-1, 1)
        if B_m.shape[0] != n:
            raise ContractViolationError(f"B_m must have {n} rows, got shape {B_m.shape}")
        m = B_m.shape[1]
        lead = () if batch is None else (int(batch),)
        self.A_m = A_m.copy()
        self.B_m = B_m.copy()
        self.n = n
        self.m = m
        self.batch = batch
        self.X = np.zeros(lead + (m, n, n + 1)) if X0 is None else np.array(X0, dtype=float)
        self.s = np.zeros(lead + (m, n)) if s0 is None else np.array(s0, dtype=float)
        if self.X.shape != lead + (m, n, n + 1) or self.s.shape != lead + (m, n):
            raise ContractViolationError("initial filter states have the wrong shape")
        self._drive = self.B_m.T[:, :, None]

    def copy(self) -> "FilterBank":
        return FilterBank(self.A_m, self.B_m, X0=self.X, s0=self.s, batch=self.batch)

    def read_zeta(self) -> np.ndarray:
        """(..., n, m, n+1) array, [i, j] is zeta_ij at the current step."""
        return np.swapaxes(self.X, -3, -2).copy()

    def read_nu(self) -> np.ndarray:
        return self.s.sum(axis=-2)

    def compute_xi(self, theta) -> np.ndarray:
        """(..., n, m) array, xi_ij = theta_j^T zeta_ij - w_ij(z)[theta_j^T omega_j]."""
        return _xi(self.X, self.s, self._columns(theta))

    def update(self, omega_cols, theta) -> "FilterBank":
        cols = self._columns(theta)
        if self.batch is None:
            omega = as_matrix(omega_cols, self.m, self.n + 1, "omega")
        else:
            omega = np.asarray(omega_cols, dtype=float)
            if omega.shape != (self.batch, self.m, self.n + 1):
                raise ContractViolationError(
                    f"omega must have shape ({self.batch}, {self.m}, {self.n + 1}), got {omega.shape}"
                )
        self.X = np.matmul(self.A_m, self.X) + self._drive * omega[..., :, None, :]
        weights = np.sum(cols * omega, axis=-1)
        self.s = np.matmul(self.s, self.A_m.T) + self.B_m.T * weights[..., None]
        return self

    def _columns(self, theta) -> np.ndarray:
        cols = as_columns(theta, self.n, self.m)
        lead = () if self.batch is None else (self.batch,)
        if cols.shape[:-2] != lead:
            raise ContractViolationError(
                f"theta stack has leading shape {cols.shape[:-2]}, bank has {lead}"
            )
        return cols


def filter_update(bank: FilterBank, omega_cols, theta: ThetaVector) -> FilterBank:
    return bank.update(omega_cols, theta)


def read_zeta(bank: FilterBank) -> np.ndarray:
    return bank.read_zeta()


def read_nu(bank: FilterBank) -> np.ndarray:
    return bank.read_nu()


def compute_xi(bank: FilterBank, theta: ThetaVector) -> np.ndarray:
    return bank.compute_xi(theta)


def assemble_snapshot(bank: FilterBank, theta: ThetaVector, e_x) -> RegressorSnapshot:
    """Build Z, mu and epsilon from the bank's time-t outputs.

    ``e_x`` is x_hat(t) - x(t).
    """
    if bank.batch is not None:
        raise ContractViolationError("batched bank; use assemble_batch")
    cols = bank._columns(theta)
    e_x = as_vector(e_x, bank.n, "e_x")
    Z, mu, epsilon, xi, zeta_norm_sq = _snapshot_arrays(bank.X, bank.s, cols, e_x)
    return RegressorSnapshot(
        Z=Z,
        mu=mu,
        epsilon=epsilon,
        xi=xi,
        xi_sum=xi.sum(axis=1),
        zeta_norm_sq=float(zeta_norm_sq),
        xi_norm_sq=float(np.sum(xi * xi)),
        e_x=e_x,
    )


def assemble_batch(bank: FilterBank, columns: np.ndarray, e_x: np.ndarray) -> SnapshotBatch:
    """Snapshot arrays for every robot of a batched bank; ``e_x`` is (R, n)."""
    if bank.batch is None:
        raise ContractViolationError("unbatched bank; use assemble_snapshot")
    cols = bank._columns(columns)
    e_x = np.asarray(e_x, dtype=float)
    if e_x.shape != (bank.batch, bank.n):
        raise ContractViolationError(f"e_x must have shape ({bank.batch}, {bank.n}), got {e_x.shape}")
    return SnapshotBatch(*_snapshot_arrays(bank.X, bank.s, cols, e_x), e_x=e_x)
