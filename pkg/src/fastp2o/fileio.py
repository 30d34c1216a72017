"""Little-endian binary formats for operators (``BTOP``) and vectors (``BTVC``).

Both headers are zero-padded to 64 bytes.

Operator header::

    magic "BTOP" | version u32 | ordering u8 | domain u8 | scalar u8 | pad u8
    | N_d u64 | N_m u64 | N_t u64 | zeros

Payload shapes (row-major): time/TOSI ``(N_t, N_d, N_m)``, time/SOTI
``(N_d, N_m, N_t)``, frequency/TOSI ``(2N_t, N_d, N_m)``, frequency/SOTI
``(N_d, N_m, 2N_t)``.

Vector header::

    magic "BTVC" | ordering u8 | pad 3 | spatial_dim u64 | N_t u64 | zeros

followed by ``spatial_dim * N_t`` float64 values in the declared ordering.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .block_operator import CompactP2O, Ordering, SpaceTimeVector, SpectralP2O
from .errors import FormatError

HEADER_SIZE = 64
FORMAT_VERSION = 1
OP_MAGIC = b"BTOP"
VEC_MAGIC = b"BTVC"
_OP_HEADER = struct.Struct("<4sIBBBxQQQ")
_VEC_HEADER = struct.Struct("<4sB3xQQ")


class Domain(enum.IntEnum):
    TIME = 0
    FREQUENCY = 1


class Scalar(enum.IntEnum):
    REAL64 = 0
    COMPLEX128 = 1


_DTYPES = {Scalar.REAL64: np.dtype("<f8"), Scalar.COMPLEX128: np.dtype("<c16")}


@dataclass(frozen=True)
class OperatorHeader:
    ordering: Ordering
    domain: Domain
    scalar: Scalar
    n_d: int
    n_m: int
    n_t: int

    def payload_shape(self) -> tuple[int, int, int]:
        n_f = self.n_t if self.domain is Domain.TIME else 2 * self.n_t
        if self.ordering is Ordering.TOSI:
            return (n_f, self.n_d, self.n_m)
        return (self.n_d, self.n_m, n_f)


def _pad(header: bytes) -> bytes:
    return header + b"\0" * (HEADER_SIZE - len(header))


def _read_exact(path: Path, magic: bytes) -> bytes:
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise FormatError(f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    if data[:4] != magic:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {magic!r}")
    return data


def write_operator(path, array: np.ndarray, header: OperatorHeader) -> None:
    dtype = _DTYPES[header.scalar]
    arr = np.ascontiguousarray(array, dtype=dtype)
    if arr.shape != header.payload_shape():
        raise FormatError(f"array shape {arr.shape} does not match header {header.payload_shape()}")
    raw = _OP_HEADER.pack(OP_MAGIC, FORMAT_VERSION, header.ordering, header.domain, header.scalar,
                          header.n_d, header.n_m, header.n_t)
    Path(path).write_bytes(_pad(raw) + arr.tobytes())


def read_operator(path) -> tuple[OperatorHeader, np.ndarray]:
    data = _read_exact(path, OP_MAGIC)
    _, version, ordering, domain, scalar, n_d, n_m, n_t = _OP_HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    try:
        header = OperatorHeader(Ordering(ordering), Domain(domain), Scalar(scalar), n_d, n_m, n_t)
    except ValueError as exc:
        raise FormatError(f"{path}: invalid header flag ({exc})") from None
    if min(n_d, n_m, n_t) < 1:
        raise FormatError(f"{path}: dimensions must be positive")
    dtype = _DTYPES[header.scalar]
    shape = header.payload_shape()
    expected = int(np.prod(shape)) * dtype.itemsize
    payload = data[HEADER_SIZE:]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    return header, np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def write_compact(path, compact: CompactP2O, ordering: Ordering = Ordering.TOSI) -> None:
    arr = compact.blocks if ordering is Ordering.TOSI else compact.to_soti()
    header = OperatorHeader(ordering, Domain.TIME, Scalar.REAL64, compact.n_d, compact.n_m, compact.n_t)
    write_operator(path, arr, header)


def write_spectral(path, spec: SpectralP2O) -> None:
    header = OperatorHeader(Ordering.TOSI, Domain.FREQUENCY, Scalar.COMPLEX128, spec.n_d, spec.n_m, spec.n_t)
    write_operator(path, spec.freq_blocks, header)


def load_operator(path) -> CompactP2O | SpectralP2O:
    """Read an operator file into the matching in-memory type."""
    header, arr = read_operator(path)
    if header.domain is Domain.TIME:
        if header.scalar is not Scalar.REAL64:
            raise FormatError(f"{path}: time-domain operators must be real64")
        if header.ordering is Ordering.SOTI:
            arr = arr.transpose(2, 0, 1)
        return CompactP2O(arr)
    if header.scalar is not Scalar.COMPLEX128:
        raise FormatError(f"{path}: frequency-domain operators must be complex128")
    if header.ordering is Ordering.SOTI:
        arr = arr.transpose(2, 0, 1)
    return SpectralP2O.from_freq_blocks(arr)


def write_vector(path, v: SpaceTimeVector) -> None:
    raw = _VEC_HEADER.pack(VEC_MAGIC, v.ordering, v.spatial_dim, v.n_t)
    Path(path).write_bytes(_pad(raw) + v.values.astype("<f8").tobytes())


def read_vector(path) -> SpaceTimeVector:
    data = _read_exact(path, VEC_MAGIC)
    _, ordering, spatial_dim, n_t = _VEC_HEADER.unpack_from(data)
    try:
        ordering = Ordering(ordering)
    except ValueError:
        raise FormatError(f"{path}: invalid ordering flag {ordering}") from None
    payload = data[HEADER_SIZE:]
    if len(payload) != 8 * spatial_dim * n_t or spatial_dim < 1 or n_t < 1:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, header implies {8 * spatial_dim * n_t}")
    return SpaceTimeVector(spatial_dim, n_t, ordering, np.frombuffer(payload, dtype="<f8").copy())
