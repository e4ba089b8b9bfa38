"""
JSON persistence of matrices, states and channels, and content digests.

Matrix format: {"dims": [d_1, ..., d_m], "re": [...], "im": [...]}, entries in
row-major order. Python floats serialize with repr, so the round trip is exact.
"""

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from qmclab.channels import QuantumChannel
from qmclab.errors import MatrixFormatError
from qmclab.linalg import ComplexMatrix, SystemLayout
from qmclab.states import DensityOperator, validate_density


def matrix_to_json(m: ComplexMatrix, dims: Iterable[int] | None = None) -> dict[str, Any]:
    m = np.asarray(m, dtype=np.complex128)
    if dims is None:
        dims = [m.shape[0]] if m.shape[0] == m.shape[1] else list(m.shape)
    flat = m.reshape(-1)
    return {
        "dims": [int(d) for d in dims],
        "shape": [int(m.shape[0]), int(m.shape[1])],
        "re": [float(v) for v in flat.real],
        "im": [float(v) for v in flat.imag],
    }


def matrix_from_json(obj: Any) -> tuple[ComplexMatrix, SystemLayout]:
    """
    Decodes a JSON matrix.

    Returns
    -------
    tuple[ComplexMatrix, SystemLayout]: The matrix and its layout. Non-square
    matrices carry an explicit "shape" field and get a layout of their row dims.
    """
    if not isinstance(obj, dict):
        raise MatrixFormatError(f"expected a JSON object, got {type(obj).__name__}")
    for key in ("dims", "re", "im"):
        if key not in obj:
            raise MatrixFormatError(f"missing field {key!r}")
    try:
        dims = tuple(int(d) for d in obj["dims"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (TypeError, ValueError) as e:
        raise MatrixFormatError(f"malformed matrix fields: {e}")
    if re.ndim != 1 or re.shape != im.shape:
        raise MatrixFormatError(
            f"'re' and 'im' must be flat lists of equal length, got {re.shape} and {im.shape}"
        )
    total = math.prod(dims) if dims else 0
    if "shape" in obj:
        rows, cols = (int(s) for s in obj["shape"])
    else:
        rows = cols = total
    if rows * cols != re.size:
        raise MatrixFormatError(
            f"{re.size} entries do not fill a {rows}x{cols} matrix"
        )
    if rows == cols and total != rows:
        raise MatrixFormatError(
            f"dims {list(dims)} multiply to {total}, matrix dimension is {rows}"
        )
    if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        raise MatrixFormatError("matrix has non-finite entries")
    try:
        layout = SystemLayout(dims)
    except ValueError as e:
        raise MatrixFormatError(str(e))
    return (re + 1j * im).reshape(rows, cols), layout


def state_to_json(rho: DensityOperator) -> dict[str, Any]:
    obj = matrix_to_json(rho.matrix, rho.dims)
    if rho.layout.labels is not None:
        obj["labels"] = list(rho.layout.labels)
    return obj


def state_from_json(obj: Any) -> DensityOperator:
    m, layout = matrix_from_json(obj)
    if "labels" in obj:
        layout = SystemLayout(layout.dims, tuple(obj["labels"]))
    return validate_density(m, layout)


def save_state(path: str | Path, rho: DensityOperator) -> None:
    Path(path).write_text(json.dumps(state_to_json(rho)))


def load_state(path: str | Path) -> DensityOperator:
    """Loads and validates a state written by save_state."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise MatrixFormatError(f"{path}: not valid JSON ({e})")
    return state_from_json(obj)


def channel_to_json(phi: QuantumChannel) -> dict[str, Any]:
    return {
        "in_dim": phi.in_dim,
        "out_dim": phi.out_dim,
        "kraus": [matrix_to_json(a, [phi.out_dim]) for a in phi.kraus],
    }


def channel_from_json(obj: Any) -> QuantumChannel:
    try:
        in_dim, out_dim = int(obj["in_dim"]), int(obj["out_dim"])
        kraus = [matrix_from_json(k)[0] for k in obj["kraus"]]
    except (KeyError, TypeError) as e:
        raise MatrixFormatError(f"malformed channel: {e}")
    return QuantumChannel(tuple(kraus), in_dim, out_dim)


def content_digest(*arrays: np.ndarray) -> str:
    """sha256 over shapes and complex128 bytes of the arrays, in order."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=np.complex128)
        h.update(repr(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()
