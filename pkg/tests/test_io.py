import json

import numpy as np
import pytest

from qmclab.channels import random_channel
from qmclab.errors import MatrixFormatError, NotPSDError, TraceError
from qmclab.io import (
    channel_from_json,
    channel_to_json,
    content_digest,
    load_state,
    matrix_from_json,
    matrix_to_json,
    save_state,
    state_from_json,
    state_to_json,
)
from qmclab.linalg import identity
from qmclab.states import random_qmc


def test_state_file_is_exact(rng, tmp_path):
    rho = random_qmc((2, 3, 2), rng=rng)
    path = tmp_path / "state.json"
    save_state(path, rho)
    back = load_state(path)
    assert back.dims == (2, 3, 2)
    np.testing.assert_array_equal(back.matrix, rho.matrix)
    assert content_digest(back.matrix) == content_digest(rho.matrix)


def test_loading_validates(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(matrix_to_json(1.2 * identity(2) / 2)))
    with pytest.raises(TraceError) as e:
        load_state(path)
    assert e.value.violation == pytest.approx(0.2)
    with pytest.raises(NotPSDError):
        state_from_json(matrix_to_json(np.diag([1.5, -0.5])))
    path.write_text("{not json")
    with pytest.raises(MatrixFormatError):
        load_state(path)


def test_matrix_format_errors():
    obj = matrix_to_json(identity(4) / 4, [2, 3])
    with pytest.raises(MatrixFormatError):
        matrix_from_json(obj)
    with pytest.raises(MatrixFormatError):
        matrix_from_json({"dims": [2], "re": [1.0]})
    with pytest.raises(MatrixFormatError):
        matrix_from_json({"dims": [2], "re": [1.0] * 3, "im": [0.0] * 3})
    with pytest.raises(MatrixFormatError):
        matrix_from_json([1, 2, 3])


def test_labels_survive(rng):
    rho = random_qmc((2, 2, 2), rng=rng)
    obj = state_to_json(rho)
    obj["labels"] = ["A", "B", "C"]
    assert state_from_json(obj).layout.labels == ("A", "B", "C")


def test_channel_round_trip(rng):
    phi = random_channel(2, 3, 2, rng)
    back = channel_from_json(json.loads(json.dumps(channel_to_json(phi))))
    assert (back.in_dim, back.out_dim) == (2, 3)
    for a, b in zip(back.kraus, phi.kraus):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(MatrixFormatError):
        channel_from_json({"in_dim": 2})


def test_digest_sees_shape_and_content():
    a = identity(4)
    assert content_digest(a) != content_digest(a.reshape(2, 8))
    assert content_digest(a) != content_digest(2 * a)
    assert content_digest(a, a) != content_digest(a)
