"""Scalar Toeplitz matvecs through a 2n circulant embedding.

The forward transform is unnormalized and the inverse divides by 2n
(numpy's default), which gives the same product as the unitary
convention with the 1/sqrt(2n) factor folded into the spectrum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class ToeplitzSpec:
    """An ``n x n`` Toeplitz matrix given by its first column and first row.

    ``first_col`` holds ``m_0 .. m_{n-1}`` and ``first_row_tail`` holds
    ``m_{-1} .. m_{-(n-1)}`` (the first row without the diagonal entry).
    """

    n: int
    first_col: np.ndarray
    first_row_tail: np.ndarray

    def __post_init__(self):
        col = np.asarray(self.first_col, dtype=np.float64)
        tail = np.asarray(self.first_row_tail, dtype=np.float64)
        if self.n < 1:
            raise DimensionError(f"matrix order must be positive, got {self.n}")
        if col.shape != (self.n,):
            raise DimensionError(f"first_col must have length {self.n}, got {col.shape}")
        if tail.shape != (self.n - 1,):
            raise DimensionError(
                f"first_row_tail must have length {self.n - 1}, got {tail.shape}"
            )
        object.__setattr__(self, "first_col", col)
        object.__setattr__(self, "first_row_tail", tail)

    @classmethod
    def lower_triangular(cls, first_col) -> "ToeplitzSpec":
        col = np.asarray(first_col, dtype=np.float64)
        return cls(len(col), col, np.zeros(len(col) - 1))

    @property
    def is_lower_triangular(self) -> bool:
        return not np.any(self.first_row_tail)


@dataclass(frozen=True)
class CirculantSpectrum:
    n: int
    spectrum: np.ndarray

    def __post_init__(self):
        if self.spectrum.shape != (2 * self.n,):
            raise DimensionError(
                f"spectrum must have length {2 * self.n}, got {self.spectrum.shape}"
            )


def embed_circulant_first_column(spec: ToeplitzSpec) -> np.ndarray:
    """First column of the 2n x 2n circulant containing ``spec``.

    Layout: ``[m_0, ..., m_{n-1}, 0, m_{-(n-1)}, ..., m_{-1}]``.
    """
    n = spec.n
    col = np.zeros(2 * n)
    col[:n] = spec.first_col
    col[n + 1:] = spec.first_row_tail[::-1]
    return col


def circulant_spectrum(spec: ToeplitzSpec) -> CirculantSpectrum:
    return CirculantSpectrum(spec.n, np.fft.fft(embed_circulant_first_column(spec)))


def _padded_fft(x: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise DimensionError(f"expected a vector of length {n}, got shape {x.shape}")
    return np.fft.fft(x, 2 * n)


def toeplitz_matvec(spec: ToeplitzSpec, x, spectrum: CirculantSpectrum | None = None) -> np.ndarray:
    """``M_toep @ x`` in O(n log n).

    A precomputed ``spectrum`` may be passed to skip the circulant FFT.
    """
    if spectrum is None:
        spectrum = circulant_spectrum(spec)
    u_hat = _padded_fft(x, spec.n)
    return np.fft.ifft(spectrum.spectrum * u_hat)[: spec.n].real


def toeplitz_adjoint_matvec(spec: ToeplitzSpec, y, spectrum: CirculantSpectrum | None = None) -> np.ndarray:
    """``M_toep.T @ y`` using the conjugated circulant spectrum."""
    if spectrum is None:
        spectrum = circulant_spectrum(spec)
    v_hat = _padded_fft(y, spec.n)
    return np.fft.ifft(np.conj(spectrum.spectrum) * v_hat)[: spec.n].real
