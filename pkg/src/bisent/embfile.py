"""EMB1 binary embedding files: magic "EMB1", little-endian u64 row count,
u64 dimension, then n * dim little-endian f32 values row-major. Rows are
aligned to corpus line order."""

import struct

import numpy as np

from .errors import DataError

MAGIC = b"EMB1"


def write_embeddings(path, matrix):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f"embedding matrix must be 2-D, got shape {matrix.shape}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", matrix.shape[0], matrix.shape[1]))
        fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def read_embeddings(path):
    """Returns the stored (n, dim) matrix as float64."""
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != MAGIC:
            raise DataError(f"{path}: bad magic {got!r}, expected {MAGIC!r}")
        header = fh.read(16)
        if len(header) != 16:
            raise DataError(f"{path}: truncated header")
        n, dim = struct.unpack("<QQ", header)
        data = fh.read(4 * n * dim)
        if len(data) != 4 * n * dim:
            raise DataError(f"{path}: truncated data, expected {n}x{dim} f32 values")
    return np.frombuffer(data, dtype="<f4").reshape(n, dim).astype(np.float64)
