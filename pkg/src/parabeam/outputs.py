"""Output file contracts: trajectory CSV, report JSON, binary field snapshots.

All writers are deterministic (no timestamps, no locale) and atomic
(write to a temp file in the target directory, then rename).  CSV numbers
carry 17 significant digits so doubles round-trip exactly; JSON uses the
shortest round-trip float form and `null` for unavailable entries.
"""

from __future__ import annotations

import base64
import json
import math
import os
import struct
import tempfile

import numpy as np

from .errors import ParameterError

CSV_HEADER = ("u", "r2", "w2", "Q", "K", "V", "U", "H0", "MI4", "invR")

_FIELD_MAGIC = b"PBFD"
_FIELD_HEADER = struct.Struct("<4sIdd")  # magic, n, extent, u


def fmt17(x: float | None) -> str:
    """17-significant-digit decimal form; None and NaN serialize as 'nan'."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def trajectory_csv_text(columns: dict) -> str:
    """Render the fixed-schema trajectory CSV from a column mapping."""
    missing = [k for k in CSV_HEADER if k not in columns]
    if missing:
        raise ParameterError(f"trajectory columns missing {missing}")
    n = len(columns["u"])
    if any(len(columns[k]) != n for k in CSV_HEADER):
        raise ParameterError("trajectory columns must have equal length")
    lines = [",".join(CSV_HEADER)]
    for i in range(n):
        lines.append(",".join(fmt17(columns[k][i]) for k in CSV_HEADER))
    return "\n".join(lines) + "\n"


def report_json_text(payload: dict) -> str:
    """Canonical JSON form of a run report: sorted keys, stable layout."""
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path: str, data: str | bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def field_to_bytes(values: np.ndarray, extent: float, u: float) -> bytes:
    """Binary snapshot layout: little-endian header {n, L, u}, then row-major
    complex128 pairs."""
    v = np.ascontiguousarray(values, dtype=np.complex128)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ParameterError("field snapshot must be a square array")
    header = _FIELD_HEADER.pack(_FIELD_MAGIC, v.shape[0], float(extent), float(u))
    return header + v.astype("<c16").tobytes(order="C")


def field_from_bytes(buf: bytes) -> tuple[np.ndarray, float, float]:
    """Inverse of :func:`field_to_bytes`; returns (values, extent, u)."""
    if len(buf) < _FIELD_HEADER.size:
        raise ParameterError("field snapshot truncated")
    magic, n, extent, u = _FIELD_HEADER.unpack_from(buf)
    if magic != _FIELD_MAGIC:
        raise ParameterError("not a field snapshot file")
    expected = _FIELD_HEADER.size + 16 * n * n
    if len(buf) != expected:
        raise ParameterError(f"field snapshot has {len(buf)} bytes, expected {expected}")
    values = np.frombuffer(buf, dtype="<c16", offset=_FIELD_HEADER.size).reshape(n, n)
    return values.astype(np.complex128), extent, u


def read_field_file(path: str) -> tuple[np.ndarray, float, float]:
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


def snapshot_to_b64(values: np.ndarray, extent: float, u: float) -> str:
    return base64.b64encode(field_to_bytes(values, extent, u)).decode("ascii")


def snapshot_from_b64(data: str) -> tuple[np.ndarray, float, float]:
    return field_from_bytes(base64.b64decode(data.encode("ascii")))
