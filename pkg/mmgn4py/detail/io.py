"""Internal module for reading and writing matrix files.

Two small binary formats are defined here, both little-endian:

- dense matrix: 8-byte magic ``MMGNMAT1``, ``uint64`` m and n, followed by
  ``m*n`` 64-bit reals in column-major order;
- factor pair: 8-byte magic ``MMGNFAC1``, ``uint64`` m, n and r, followed by
  ``U`` (m x r) and then ``V`` (n x r), both column-major.
"""

__all__ = ['FormatError', 'write_dense', 'read_dense', 'write_factors',
           'read_factors', 'write_dense_csv', 'read_dense_csv']

import struct
from typing import Tuple

import numpy as np

DENSE_MAGIC = b"MMGNMAT1"
FACTORS_MAGIC = b"MMGNFAC1"

_FLOAT = np.dtype('<f8')


class FormatError(Exception):
    """Class for exceptions raised for malformed binary files.
    """
    pass


def _read_header(file, magic: bytes, count: int) -> Tuple[int, ...]:
    lead = file.read(len(magic))
    if lead != magic:
        raise FormatError("Unexpected file signature {0!r}, expected {1!r}".format(lead, magic))
    data = file.read(8 * count)
    if len(data) != 8 * count:
        raise FormatError("Unexpected EOF while reading header")
    return struct.unpack("<{0}Q".format(count), data)


def _read_block(file, shape: Tuple[int, int]) -> np.ndarray:
    size = shape[0] * shape[1]
    data = file.read(size * _FLOAT.itemsize)
    if len(data) != size * _FLOAT.itemsize:
        raise FormatError("Unexpected EOF while reading {0}x{1} block".format(*shape))
    return np.frombuffer(data, dtype=_FLOAT).reshape(shape, order='F').astype(np.float64)


def write_dense(matrix: np.ndarray, path: str) -> None:
    """Write dense matrix in binary format."""
    matrix = np.asarray(matrix, dtype=np.float64)
    m, n = matrix.shape
    with open(path, "wb") as file:
        file.write(DENSE_MAGIC)
        file.write(struct.pack("<2Q", m, n))
        file.write(matrix.astype(_FLOAT).tobytes(order='F'))


def read_dense(path: str) -> np.ndarray:
    """Read dense matrix written by `write_dense`.

    Raises
    ------
    FormatError
        Raised if file signature is wrong or file is truncated.
    """
    with open(path, "rb") as file:
        m, n = _read_header(file, DENSE_MAGIC, 2)
        return _read_block(file, (m, n))


def write_factors(u: np.ndarray, v: np.ndarray, path: str) -> None:
    """Write factor pair in binary format."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape[1] != v.shape[1]:
        raise ValueError("Factors have different number of columns")
    with open(path, "wb") as file:
        file.write(FACTORS_MAGIC)
        file.write(struct.pack("<3Q", u.shape[0], v.shape[0], u.shape[1]))
        file.write(u.astype(_FLOAT).tobytes(order='F'))
        file.write(v.astype(_FLOAT).tobytes(order='F'))


def read_factors(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Read factor pair written by `write_factors`.

    Returns
    -------
    u : `numpy.ndarray`
        Left factor, m x r.
    v : `numpy.ndarray`
        Right factor, n x r.
    """
    with open(path, "rb") as file:
        m, n, r = _read_header(file, FACTORS_MAGIC, 3)
        u = _read_block(file, (m, r))
        v = _read_block(file, (n, r))
        return u, v


def write_dense_csv(matrix: np.ndarray, path: str) -> None:
    """Write dense matrix as comma-separated text, one matrix row per line."""
    np.savetxt(path, np.asarray(matrix, dtype=np.float64), delimiter=",", fmt="%.17g")


def read_dense_csv(path: str) -> np.ndarray:
    """Read dense matrix written by `write_dense_csv`."""
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
