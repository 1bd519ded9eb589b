"""Matrix files: headerless CSV and raw little-endian float64.

The raw layout is a 16-byte header of two little-endian uint64 values
(rows, cols) followed by the matrix in row-major little-endian float64.
"""

from __future__ import annotations

import io
import os
import struct

import numpy as np

from .errors import DimensionError

_HEADER = struct.Struct("<QQ")


def encoding_for(path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "raw-f64-le"


def format_csv(X) -> str:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    buf = io.StringIO()
    for row in X:
        buf.write(",".join(format(float(v), ".17g") for v in row))
        buf.write("\n")
    return buf.getvalue()


def write_matrix(path, X, encoding=None) -> None:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {X.shape}")
    encoding = encoding or encoding_for(path)
    if encoding == "csv":
        with open(path, "w", newline="") as fh:
            fh.write(format_csv(X))
    elif encoding == "raw-f64-le":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(*X.shape))
            fh.write(np.ascontiguousarray(X, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown encoding {encoding!r}")


def read_matrix(path, encoding=None) -> np.ndarray:
    encoding = encoding or encoding_for(path)
    if encoding == "csv":
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append([float(v) for v in line.split(",")])
        if not rows:
            raise DimensionError(f"{path} is empty")
        if len({len(r) for r in rows}) != 1:
            raise DimensionError(f"{path} has ragged rows")
        return np.array(rows, dtype=float)
    if encoding == "raw-f64-le":
        size = os.path.getsize(path)
        with open(path, "rb") as fh:
            rows, cols = _HEADER.unpack(fh.read(_HEADER.size))
            if size != _HEADER.size + 8 * rows * cols:
                raise DimensionError(f"{path}: header says {rows}x{cols} but payload is {size - 16} bytes")
            data = np.frombuffer(fh.read(), dtype="<f8")
        return data.reshape(rows, cols).astype(float)
    raise ValueError(f"unknown encoding {encoding!r}")
