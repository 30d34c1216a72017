"""Block lower-triangular Toeplitz p2o operators and their FFT matvecs.

Array layouts used throughout:

* compact operator ``blocks``: ``(N_t, N_d, N_m)`` real, ``blocks[k] = F_{k+1,1}``
* spectral operator ``freq_blocks``: ``(2 N_t, N_d, N_m)`` complex, one
  block per frequency (TOSI, block diagonal)
* spectral operator in SOTI layout: ``(N_d, N_m, 2 N_t)`` complex, one
  length-``2 N_t`` spectrum per (sensor, source) pair
* a SOTI vector is viewed as ``(spatial_dim, N_t)``, a TOSI vector as
  ``(N_t, spatial_dim)``
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .counters import (
    COMPLEX_BYTES,
    REAL_BYTES,
    OpCounter,
    StageTimer,
    apply_bytes,
    apply_flops,
    fft_flops,
    maybe_stage,
    naive_bytes,
    naive_flops,
)
from .errors import DimensionError, OrderingError

IMAG_TOLERANCE = 1e-10


class Ordering(enum.IntEnum):
    TOSI = 0
    SOTI = 1


@dataclass(frozen=True)
class SpaceTimeVector:
    """A parameter or data vector tagged with its index ordering.

    TOSI stores entry ``(t, s)`` at ``values[t * spatial_dim + s]``; SOTI
    stores it at ``values[s * n_t + t]``.
    """

    spatial_dim: int
    n_t: int
    ordering: Ordering
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if self.spatial_dim < 1 or self.n_t < 1:
            raise DimensionError("spatial_dim and n_t must be positive")
        if vals.size != self.spatial_dim * self.n_t:
            raise DimensionError(
                f"expected {self.spatial_dim * self.n_t} values, got {vals.size}"
            )
        object.__setattr__(self, "ordering", Ordering(self.ordering))
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_soti(cls, arr) -> "SpaceTimeVector":
        """Wrap a ``(spatial_dim, n_t)`` array."""
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape[0], arr.shape[1], Ordering.SOTI, arr)

    @classmethod
    def from_tosi(cls, arr) -> "SpaceTimeVector":
        """Wrap a ``(n_t, spatial_dim)`` array."""
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape[1], arr.shape[0], Ordering.TOSI, arr)

    def as_array(self) -> np.ndarray:
        """2D view in storage order: ``(s, t)`` for SOTI, ``(t, s)`` for TOSI."""
        if self.ordering is Ordering.SOTI:
            return self.values.reshape(self.spatial_dim, self.n_t)
        return self.values.reshape(self.n_t, self.spatial_dim)

    def to(self, ordering: Ordering) -> "SpaceTimeVector":
        if self.ordering is Ordering(ordering):
            return self
        return tosi_to_soti(self) if self.ordering is Ordering.TOSI else soti_to_tosi(self)


def tosi_to_soti(v: SpaceTimeVector) -> SpaceTimeVector:
    if v.ordering is not Ordering.TOSI:
        raise OrderingError("tosi_to_soti expects a TOSI vector")
    arr = np.ascontiguousarray(v.as_array().T)
    return SpaceTimeVector(v.spatial_dim, v.n_t, Ordering.SOTI, arr)


def soti_to_tosi(v: SpaceTimeVector) -> SpaceTimeVector:
    if v.ordering is not Ordering.SOTI:
        raise OrderingError("soti_to_tosi expects a SOTI vector")
    arr = np.ascontiguousarray(v.as_array().T)
    return SpaceTimeVector(v.spatial_dim, v.n_t, Ordering.TOSI, arr)


@dataclass(frozen=True)
class CompactP2O:
    """First block column of the p2o map; this is the whole operator."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.ascontiguousarray(self.blocks, dtype=np.float64)
        if b.ndim != 3 or min(b.shape) < 1:
            raise DimensionError(f"blocks must be a non-empty (N_t, N_d, N_m) array, got {b.shape}")
        object.__setattr__(self, "blocks", b)

    @property
    def n_t(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_d(self) -> int:
        return self.blocks.shape[1]

    @property
    def n_m(self) -> int:
        return self.blocks.shape[2]

    def block(self, i: int, j: int) -> np.ndarray:
        """``F_ij`` with 1-based time indices; zero above the diagonal."""
        if i < j:
            return np.zeros((self.n_d, self.n_m))
        return self.blocks[i - j]

    def to_soti(self) -> np.ndarray:
        """``(N_d, N_m, N_t)`` array of per-(sensor, source) time series."""
        return np.ascontiguousarray(self.blocks.transpose(1, 2, 0))

    def shard(self, rows: slice, cols: slice) -> "CompactP2O":
        return CompactP2O(self.blocks[:, rows, cols])


@dataclass(frozen=True)
class SpectralP2O:
    """Frequency-domain operator produced by :func:`setup`.

    ``soti_blocks`` is only kept when requested; the elementwise-product
    backend needs it.
    """

    n_d: int
    n_m: int
    n_t: int
    freq_blocks: np.ndarray
    soti_blocks: np.ndarray | None = None

    def __post_init__(self):
        expected = (2 * self.n_t, self.n_d, self.n_m)
        if self.freq_blocks.shape != expected:
            raise DimensionError(f"freq_blocks must be {expected}, got {self.freq_blocks.shape}")
        if self.soti_blocks is not None and self.soti_blocks.shape != (self.n_d, self.n_m, 2 * self.n_t):
            raise DimensionError("soti_blocks has the wrong shape")
        self.freq_blocks.setflags(write=False)
        if self.soti_blocks is not None:
            self.soti_blocks.setflags(write=False)

    @classmethod
    def from_freq_blocks(cls, freq_blocks: np.ndarray, retain_soti: bool = False) -> "SpectralP2O":
        fb = np.ascontiguousarray(freq_blocks, dtype=np.complex128)
        n_f, n_d, n_m = fb.shape
        if n_f % 2:
            raise DimensionError("number of frequency blocks must be even")
        soti = np.ascontiguousarray(fb.transpose(1, 2, 0)) if retain_soti else None
        return cls(n_d, n_m, n_f // 2, fb, soti)

    def to_compact(self) -> CompactP2O:
        """Recover the time-domain first block column by inverse FFT."""
        series = np.fft.ifft(self.freq_blocks, axis=0)[: self.n_t].real
        return CompactP2O(series)


def setup(compact: CompactP2O, retain_soti: bool = False, counter: OpCounter | None = None) -> SpectralP2O:
    """Transform the compact operator into per-frequency blocks.

    Each (sensor, source) time series is zero padded to ``2 N_t`` and
    FFT'd, then the result is reordered so frequency is the outer index.
    """
    n_t, n_d, n_m = compact.blocks.shape
    with maybe_stage(counter, "setup_tosi_to_soti", nbytes=2 * REAL_BYTES * compact.blocks.size):
        soti = compact.to_soti()
    with maybe_stage(counter, "setup_fft", flops=fft_flops(2 * n_t, n_d * n_m)):
        soti_hat = np.fft.fft(soti, n=2 * n_t, axis=-1)
    with maybe_stage(counter, "setup_soti_to_tosi", nbytes=2 * COMPLEX_BYTES * soti_hat.size):
        freq = np.ascontiguousarray(soti_hat.transpose(2, 0, 1))
    return SpectralP2O(n_d, n_m, n_t, freq, soti_hat if retain_soti else None)


def _check_input(v: SpaceTimeVector, spatial_dim: int, n_t: int, ordering: Ordering, what: str) -> None:
    if v.ordering is not ordering:
        raise OrderingError(f"{what} must be {ordering.name}-ordered, got {v.ordering.name}")
    if v.spatial_dim != spatial_dim or v.n_t != n_t:
        raise DimensionError(
            f"{what} has shape (spatial_dim={v.spatial_dim}, n_t={v.n_t}), "
            f"expected ({spatial_dim}, {n_t})"
        )


def _pad_fft(x: np.ndarray, n_t: int, timer: StageTimer) -> np.ndarray:
    """Pad each row of a ``(channels, N_t)`` array to ``2 N_t`` and FFT it."""
    channels = x.shape[0]
    padded = np.zeros((channels, 2 * n_t))
    padded[:, :n_t] = x
    timer.mark("pad", nbytes=(REAL_BYTES * n_t + REAL_BYTES * 2 * n_t) * channels)
    x_hat = np.fft.fft(padded, axis=1)
    timer.mark("fft", flops=fft_flops(2 * n_t, channels))
    return x_hat


def _ifft_unpad(y_hat: np.ndarray, n_t: int, timer: StageTimer, check_imag: bool) -> np.ndarray:
    channels = y_hat.shape[0]
    y = np.fft.ifft(y_hat, axis=1)
    timer.mark("ifft", flops=fft_flops(2 * n_t, channels))
    out = y[:, :n_t]
    if check_imag:
        scale = max(np.linalg.norm(out.real), np.finfo(float).tiny)
        resid = np.abs(out.imag).max(initial=0.0)
        if resid >= IMAG_TOLERANCE * scale:
            raise ArithmeticError(f"imaginary residue {resid:.3e} exceeds tolerance")
    out = np.ascontiguousarray(out.real)
    timer.mark("unpad", nbytes=(COMPLEX_BYTES * 2 * n_t + REAL_BYTES * n_t) * channels)
    return out


def _reorder(x: np.ndarray, name: str, timer: StageTimer) -> np.ndarray:
    out = np.ascontiguousarray(x.T)
    timer.mark(name, nbytes=2 * COMPLEX_BYTES * x.size)
    return out


def forward_array(spec: SpectralP2O, m_soti: np.ndarray, counter: OpCounter | None = None,
                  check_imag: bool = False) -> np.ndarray:
    """Forward matvec on a raw ``(N_m, N_t)`` SOTI array; returns ``(N_d, N_t)``."""
    timer = StageTimer(counter)
    n_t = spec.n_t
    m_hat = _pad_fft(m_soti, n_t, timer)
    m_hat_t = _reorder(m_hat, "soti_to_tosi", timer)
    n_f = 2 * n_t
    d_hat_t = np.matmul(spec.freq_blocks, m_hat_t[:, :, None])[:, :, 0]
    timer.mark("apply", flops=apply_flops(spec.n_d, spec.n_m, n_f), nbytes=apply_bytes(spec.n_d, spec.n_m, n_f))
    d_hat = _reorder(d_hat_t, "tosi_to_soti", timer)
    return _ifft_unpad(d_hat, n_t, timer, check_imag)


def adjoint_array(spec: SpectralP2O, d_soti: np.ndarray, counter: OpCounter | None = None,
                  check_imag: bool = False) -> np.ndarray:
    """Adjoint matvec on a raw ``(N_d, N_t)`` SOTI array; returns ``(N_m, N_t)``.

    Uses ``F^H d = conj(d^H F)^T`` so only views of ``freq_blocks`` are touched.
    """
    timer = StageTimer(counter)
    n_t = spec.n_t
    d_hat = _pad_fft(d_soti, n_t, timer)
    d_hat_t = _reorder(d_hat, "soti_to_tosi", timer)
    n_f = 2 * n_t
    m_hat_t = np.conj(np.matmul(np.conj(d_hat_t)[:, None, :], spec.freq_blocks)[:, 0, :])
    timer.mark("apply", flops=apply_flops(spec.n_d, spec.n_m, n_f), nbytes=apply_bytes(spec.n_d, spec.n_m, n_f))
    m_hat = _reorder(m_hat_t, "tosi_to_soti", timer)
    return _ifft_unpad(m_hat, n_t, timer, check_imag)


def apply_forward(spec: SpectralP2O, m: SpaceTimeVector, counter: OpCounter | None = None,
                  check_imag: bool = False) -> SpaceTimeVector:
    """``d = F m`` for SOTI-ordered ``m``; the result is SOTI-ordered."""
    _check_input(m, spec.n_m, spec.n_t, Ordering.SOTI, "parameter vector")
    return SpaceTimeVector.from_soti(forward_array(spec, m.as_array(), counter, check_imag))


def apply_adjoint(spec: SpectralP2O, d: SpaceTimeVector, counter: OpCounter | None = None,
                  check_imag: bool = False) -> SpaceTimeVector:
    """``m = F* d`` reusing the forward spectral operator."""
    _check_input(d, spec.n_d, spec.n_t, Ordering.SOTI, "data vector")
    return SpaceTimeVector.from_soti(adjoint_array(spec, d.as_array(), counter, check_imag))


def _require_soti(spec: SpectralP2O) -> np.ndarray:
    if spec.soti_blocks is None:
        raise ValueError("elementwise-product backend needs setup(..., retain_soti=True)")
    return spec.soti_blocks


def forward_array_ewp(spec: SpectralP2O, m_soti: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    soti = _require_soti(spec)
    timer = StageTimer(counter)
    n_t = spec.n_t
    m_hat = _pad_fft(m_soti, n_t, timer)
    d_hat = (soti * m_hat[None, :, :]).sum(axis=1)
    timer.mark("apply", flops=apply_flops(spec.n_d, spec.n_m, 2 * n_t), nbytes=apply_bytes(spec.n_d, spec.n_m, 2 * n_t))
    return _ifft_unpad(d_hat, n_t, timer, False)


def adjoint_array_ewp(spec: SpectralP2O, d_soti: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    soti = _require_soti(spec)
    timer = StageTimer(counter)
    n_t = spec.n_t
    d_hat = _pad_fft(d_soti, n_t, timer)
    m_hat = (np.conj(soti) * d_hat[:, None, :]).sum(axis=0)
    timer.mark("apply", flops=apply_flops(spec.n_d, spec.n_m, 2 * n_t), nbytes=apply_bytes(spec.n_d, spec.n_m, 2 * n_t))
    return _ifft_unpad(m_hat, n_t, timer, False)


def apply_forward_ewp(spec: SpectralP2O, m: SpaceTimeVector, counter: OpCounter | None = None) -> SpaceTimeVector:
    """Forward matvec via elementwise products on the SOTI spectral layout."""
    _check_input(m, spec.n_m, spec.n_t, Ordering.SOTI, "parameter vector")
    return SpaceTimeVector.from_soti(forward_array_ewp(spec, m.as_array(), counter))


def apply_adjoint_ewp(spec: SpectralP2O, d: SpaceTimeVector, counter: OpCounter | None = None) -> SpaceTimeVector:
    _check_input(d, spec.n_d, spec.n_t, Ordering.SOTI, "data vector")
    return SpaceTimeVector.from_soti(adjoint_array_ewp(spec, d.as_array(), counter))


def naive_apply_forward(compact: CompactP2O, m: SpaceTimeVector, counter: OpCounter | None = None) -> SpaceTimeVector:
    """Literal block-triangular sum ``d_i = sum_{j<=i} F_{i-j} m_j`` (TOSI)."""
    _check_input(m, compact.n_m, compact.n_t, Ordering.TOSI, "parameter vector")
    n_t, n_d, n_m = compact.blocks.shape
    mt = m.as_array()
    d = np.zeros((n_t, n_d))
    with maybe_stage(counter, "naive_apply", flops=naive_flops(n_d, n_m, n_t),
                     nbytes=naive_bytes(n_d, n_m, n_t)):
        for i in range(n_t):
            for j in range(i + 1):
                d[i] += compact.blocks[i - j] @ mt[j]
    return SpaceTimeVector.from_tosi(d)


def naive_apply_adjoint(compact: CompactP2O, d: SpaceTimeVector, counter: OpCounter | None = None) -> SpaceTimeVector:
    """Transpose analogue: ``m_j = sum_{i>=j} F_{i-j}^T d_i`` (TOSI)."""
    _check_input(d, compact.n_d, compact.n_t, Ordering.TOSI, "data vector")
    n_t, n_d, n_m = compact.blocks.shape
    dt = d.as_array()
    m = np.zeros((n_t, n_m))
    with maybe_stage(counter, "naive_apply", flops=naive_flops(n_d, n_m, n_t),
                     nbytes=naive_bytes(n_d, n_m, n_t)):
        for j in range(n_t):
            for i in range(j, n_t):
                m[j] += compact.blocks[i - j].T @ dt[i]
    return SpaceTimeVector.from_tosi(m)


def to_dense(compact: CompactP2O) -> np.ndarray:
    """Assemble the full ``(N_d N_t) x (N_m N_t)`` TOSI matrix (small sizes only)."""
    n_t, n_d, n_m = compact.blocks.shape
    dense = np.zeros((n_d * n_t, n_m * n_t))
    for i in range(n_t):
        for j in range(i + 1):
            dense[i * n_d:(i + 1) * n_d, j * n_m:(j + 1) * n_m] = compact.blocks[i - j]
    return dense
