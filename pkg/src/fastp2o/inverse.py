"""Regularized linear inversion with the FFT-based Hessian action.

All vectors here are raw SOTI arrays: parameters are ``(N_m, N_t)`` and
data ``(N_d, N_t)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded

from .block_operator import SpaceTimeVector, SpectralP2O, adjoint_array, forward_array
from .distributed import Partition, distributed_adjoint, distributed_forward
from .errors import DimensionError, NotSPDError


class RegKind(str, enum.Enum):
    IDENTITY = "identity"
    LAPLACIAN = "laplacian"


@dataclass(frozen=True)
class Regularization:
    """``alpha * R`` with ``R`` either the identity or ``I + D^T D`` per source.

    ``D^T D`` is the Dirichlet second difference in time, ``tridiag(-1, 2, -1)``.
    """

    kind: RegKind = RegKind.IDENTITY
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RegKind(self.kind))
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    def apply_R(self, v: np.ndarray) -> np.ndarray:
        if self.kind is RegKind.IDENTITY:
            return v.copy()
        out = 3.0 * v
        out[:, 1:] -= v[:, :-1]
        out[:, :-1] -= v[:, 1:]
        return out

    def solve_R(self, v: np.ndarray) -> np.ndarray:
        """``R^{-1} v`` (banded Cholesky for the Laplacian variant)."""
        if self.kind is RegKind.IDENTITY:
            return v.copy()
        n_t = v.shape[1]
        ab = np.zeros((2, n_t))
        ab[0, 1:] = -1.0
        ab[1, :] = 3.0
        return solveh_banded(ab, v.T).T

    def norm_sq(self, v: np.ndarray) -> float:
        return float(np.vdot(v, self.apply_R(v)))


@dataclass
class HessianOperator:
    """``H = F* F + alpha R``, optionally applied on a worker grid."""

    spec: SpectralP2O
    reg: Regularization
    partition: Partition | None = None
    threads: int = 1
    applications: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.spec.n_m, self.spec.n_t

    def forward(self, m: np.ndarray) -> np.ndarray:
        if self.partition is None:
            return forward_array(self.spec, m)
        return distributed_forward(self.partition, SpaceTimeVector.from_soti(m), self.threads).vector.as_array()

    def adjoint(self, d: np.ndarray) -> np.ndarray:
        if self.partition is None:
            return adjoint_array(self.spec, d)
        return distributed_adjoint(self.partition, SpaceTimeVector.from_soti(d), self.threads).vector.as_array()

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return hessian_apply(self, v)


def _check_param(H: HessianOperator, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != H.shape:
        raise DimensionError(f"expected a parameter array of shape {H.shape}, got {v.shape}")
    return v


def hessian_apply(H: HessianOperator, v: np.ndarray) -> np.ndarray:
    v = _check_param(H, v)
    H.applications += 1
    return H.adjoint(H.forward(v)) + H.reg.alpha * H.reg.apply_R(v)


def objective_eval(spec: SpectralP2O, m: np.ndarray, d_obs: np.ndarray, reg: Regularization) -> float:
    """``0.5 ||F m - d_obs||^2 + 0.5 alpha ||m||_R^2``."""
    m = np.asarray(m, dtype=np.float64)
    d_obs = np.asarray(d_obs, dtype=np.float64)
    if m.shape != (spec.n_m, spec.n_t) or d_obs.shape != (spec.n_d, spec.n_t):
        raise DimensionError("m or d_obs does not match the operator")
    resid = forward_array(spec, m) - d_obs
    return 0.5 * float(np.vdot(resid, resid)) + 0.5 * reg.alpha * reg.norm_sq(m)


def gradient(spec: SpectralP2O, m: np.ndarray, d_obs: np.ndarray, reg: Regularization) -> np.ndarray:
    return adjoint_array(spec, forward_array(spec, m) - d_obs) + reg.alpha * reg.apply_R(m)


@dataclass
class CGResult:
    m: np.ndarray
    iterations: int
    relative_residual: float
    converged: bool
    residual_history: list[float] = field(default_factory=list)

    def report(self) -> dict:
        return {"iterations": self.iterations, "relative_residual": self.relative_residual,
                "converged": self.converged, "residual_history": self.residual_history}


def default_maxiter(n_m: int, n_t: int) -> int:
    return max(1, math.ceil(10 * math.sqrt(n_m * n_t)))


def cg_solve(H: HessianOperator, rhs: np.ndarray, tol: float = 1e-8, maxiter: int | None = None,
             precondition: bool = False, callback=None) -> CGResult:
    """Preconditioned conjugate gradients from a zero initial guess.

    With ``precondition=True`` the regularization inverse ``R^{-1}`` is
    used as preconditioner. ``callback(m)`` is called after every update.
    """
    rhs = _check_param(H, rhs)
    if maxiter is None:
        maxiter = default_maxiter(*H.shape)
    m = np.zeros_like(rhs)
    r = rhs.copy()
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return CGResult(m, 0, 0.0, True, [0.0])
    z = H.reg.solve_R(r) if precondition else r
    p = z.copy()
    rz = float(np.vdot(r, z))
    history = [1.0]
    it = 0
    rel = 1.0
    while it < maxiter:
        Hp = hessian_apply(H, p)
        curv = float(np.vdot(p, Hp))
        if curv <= 0.0:
            raise NotSPDError(f"Hessian is not positive definite: p^T H p = {curv:.3e} at iteration {it}")
        step = rz / curv
        m += step * p
        r -= step * Hp
        it += 1
        rel = float(np.linalg.norm(r)) / rhs_norm
        history.append(rel)
        if callback is not None:
            callback(m)
        if rel <= tol:
            break
        z = H.reg.solve_R(r) if precondition else r
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return CGResult(m, it, rel, rel <= tol, history)


def add_noise(d: np.ndarray, snr: float, rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian noise at signal-to-noise ratio ``snr`` (power ratio)."""
    power = float(np.mean(d**2))
    sigma = math.sqrt(power / snr) if power > 0 else 0.0
    return d + sigma * rng.standard_normal(d.shape)
