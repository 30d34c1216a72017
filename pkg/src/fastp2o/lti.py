"""Discrete LTI test problems and assembly of their compact p2o maps.

The state evolves as ``u_{k+1} = A u_k + C m_k`` from ``u_0 = 0`` and is
observed as ``d_{k+1} = B u_{k+1}``, so ``F_{k+1,1} = B A^k C``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .block_operator import CompactP2O, Ordering, SpaceTimeVector
from .errors import DimensionError

SPECTRAL_RADIUS_SLACK = 0.05


@dataclass(frozen=True)
class LTISystemSpec:
    A: np.ndarray  # (N_u, N_u) time-step operator
    B: np.ndarray  # (N_d, N_u) observation map
    C: np.ndarray  # (N_u, N_m) input map
    n_t: int

    def __post_init__(self):
        A, B, C = (np.asarray(x, dtype=np.float64) for x in (self.A, self.B, self.C))
        n_u = A.shape[0]
        if A.shape != (n_u, n_u):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[1] != n_u:
            raise DimensionError(f"B must be (N_d, {n_u}), got {B.shape}")
        if C.ndim != 2 or C.shape[0] != n_u:
            raise DimensionError(f"C must be ({n_u}, N_m), got {C.shape}")
        if self.n_t < 1:
            raise DimensionError("n_t must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        rho = spectral_radius(A)
        if rho > 1 + SPECTRAL_RADIUS_SLACK:
            warnings.warn(f"time-step operator has spectral radius {rho:.3f} > 1; "
                          "long horizons may overflow", RuntimeWarning, stacklevel=3)

    @property
    def n_u(self) -> int:
        return self.A.shape[0]

    @property
    def n_d(self) -> int:
        return self.B.shape[0]

    @property
    def n_m(self) -> int:
        return self.C.shape[1]


def spectral_radius(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def simulate_forward(spec: LTISystemSpec, m: SpaceTimeVector) -> SpaceTimeVector:
    """Time-step the system and return TOSI data ``d_1 .. d_{N_t}``."""
    if m.spatial_dim != spec.n_m or m.n_t != spec.n_t:
        raise DimensionError("parameter vector does not match the system dimensions")
    mt = m.to(Ordering.TOSI).as_array()
    u = np.zeros(spec.n_u)
    d = np.empty((spec.n_t, spec.n_d))
    for k in range(spec.n_t):
        u = spec.A @ u + spec.C @ mt[k]
        d[k] = spec.B @ u
    return SpaceTimeVector.from_tosi(d)


def assemble_compact_p2o(spec: LTISystemSpec) -> CompactP2O:
    """First block column from ``N_m`` impulse-response simulations.

    Source ``j`` gets ``m_0 = e_j`` and zero afterwards; the recorded data
    at step ``k+1`` is column ``j`` of ``B A^k C``.
    """
    blocks = np.empty((spec.n_t, spec.n_d, spec.n_m))
    for j in range(spec.n_m):
        u = spec.C[:, j].copy()
        for k in range(spec.n_t):
            if k:
                u = spec.A @ u
            blocks[k, :, j] = spec.B @ u
    return CompactP2O(blocks)


def assemble_compact_p2o_adjoint_route(spec: LTISystemSpec) -> CompactP2O:
    """Same operator from ``N_d`` adjoint recursions ``w_{k+1} = A^T w_k``, ``w_0 = B^T e_i``."""
    blocks = np.empty((spec.n_t, spec.n_d, spec.n_m))
    At = spec.A.T
    for i in range(spec.n_d):
        w = spec.B[i].copy()
        for k in range(spec.n_t):
            if k:
                w = At @ w
            blocks[k, i, :] = spec.C.T @ w
    return CompactP2O(blocks)


def advection_diffusion_system(n_u: int, n_m: int, n_d: int, n_t: int,
                               velocity: float = 0.5, diffusivity: float = 0.2,
                               dt: float = 1.0, dx: float = 1.0) -> LTISystemSpec:
    """1D upwind advection-diffusion stepped with forward Euler.

    Sources inject at ``n_m`` evenly spaced nodes and sensors sample ``n_d``
    evenly spaced nodes. Homogeneous Dirichlet boundaries.
    """
    if n_m > n_u or n_d > n_u:
        raise DimensionError("need n_m, n_d <= n_u")
    a = velocity * dt / dx
    b = diffusivity * dt / dx**2
    if a + 2 * b > 1:
        raise ValueError("forward-Euler step violates a + 2b <= 1 and would be unstable")
    A = (np.diag(np.full(n_u, 1 - a - 2 * b))
         + np.diag(np.full(n_u - 1, a + b), -1)
         + np.diag(np.full(n_u - 1, b), 1))
    C = np.zeros((n_u, n_m))
    C[np.linspace(0, n_u - 1, n_m).round().astype(int), np.arange(n_m)] = 1.0
    B = np.zeros((n_d, n_u))
    B[np.arange(n_d), np.linspace(0, n_u - 1, n_d + 2)[1:-1].round().astype(int)] = 1.0
    return LTISystemSpec(A, B, C, n_t)


def random_stable_system(n_u: int, n_m: int, n_d: int, n_t: int, rng: np.random.Generator,
                         radius: float = 0.9) -> LTISystemSpec:
    """Dense Gaussian system with ``A`` rescaled to the given spectral radius."""
    A = rng.standard_normal((n_u, n_u))
    rho = spectral_radius(A)
    if rho > 0:
        A *= radius / rho
    B = rng.standard_normal((n_d, n_u))
    C = rng.standard_normal((n_u, n_m))
    return LTISystemSpec(A, B, C, n_t)
