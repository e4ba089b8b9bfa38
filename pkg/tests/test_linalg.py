import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmclab.config import max_total_dim
from qmclab.errors import (
    ConfigError,
    DimensionError,
    InvalidExponentError,
    NotHermitianError,
    NotPSDError,
    TraceError,
)
from qmclab.linalg import (
    SystemLayout,
    check_density_matrix,
    fidelity,
    herm_sqrt,
    identity,
    kron,
    partial_trace,
    permute_systems,
    pinv_sqrt,
    relative_entropy,
    schatten_norm,
    sqrt_overlap,
    support_projector,
    trace_distance,
    trace_distance_half,
    vn_entropy,
)
from qmclab.states import random_density, random_pure


def test_layout_rejects_bad_dimensions():
    with pytest.raises(DimensionError) as e:
        SystemLayout((2, 0, 3))
    assert e.value.subsystem == 1
    with pytest.raises(DimensionError):
        SystemLayout((2, 2), labels=("A",))


def test_partial_trace_of_product(rng):
    a = random_density(2, None, rng).matrix
    b = random_density(3, None, rng).matrix
    layout = SystemLayout((2, 3))
    np.testing.assert_allclose(partial_trace(kron(a, b), layout, [1]), a, atol=1e-12)
    np.testing.assert_allclose(partial_trace(kron(a, b), layout, [0]), b, atol=1e-12)
    full = partial_trace(kron(a, b), layout, [0, 1])
    assert full.shape == (1, 1)
    assert abs(full[0, 0] - 1) < 1e-12
    np.testing.assert_allclose(partial_trace(kron(a, b), layout, []), kron(a, b))


def test_partial_trace_checks_indices(rng):
    x = random_density(4, None, rng).matrix
    with pytest.raises(DimensionError):
        partial_trace(x, SystemLayout((2, 2)), [2])
    with pytest.raises(DimensionError):
        partial_trace(x, SystemLayout((2, 3)), [0])


def test_permute_systems_swaps_factors(rng):
    a = random_density(2, None, rng).matrix
    b = random_density(3, None, rng).matrix
    swapped, layout = permute_systems(kron(a, b), SystemLayout((2, 3)), [1, 0])
    assert layout.dims == (3, 2)
    np.testing.assert_allclose(swapped, kron(b, a), atol=1e-12)
    with pytest.raises(DimensionError):
        permute_systems(kron(a, b), SystemLayout((2, 3)), [0, 0])


def test_schatten_norms_of_diagonal():
    x = np.diag([1.0, -2.0]).astype(complex)
    assert schatten_norm(x, 1) == pytest.approx(3.0)
    assert schatten_norm(x, 2) == pytest.approx(math.sqrt(5))
    assert schatten_norm(x, math.inf) == pytest.approx(2.0)
    assert schatten_norm(x, 4) == pytest.approx((1 + 16) ** 0.25)
    assert schatten_norm(np.zeros((3, 3)), 3) == 0.0
    with pytest.raises(InvalidExponentError):
        schatten_norm(x, 0.5)


def test_square_roots(rng):
    p = random_density(4, None, rng).matrix
    root = herm_sqrt(p)
    np.testing.assert_allclose(root @ root, p, atol=1e-12)
    inv = pinv_sqrt(p)
    np.testing.assert_allclose(inv @ p @ inv, identity(4), atol=1e-8)


def test_pinv_sqrt_on_support():
    p = np.diag([0.25, 0.0]).astype(complex)
    np.testing.assert_allclose(pinv_sqrt(p), np.diag([2.0, 0.0]), atol=1e-12)
    np.testing.assert_allclose(support_projector(p), np.diag([1.0, 0.0]), atol=1e-12)


def test_fidelity_extremes(rng):
    rho = random_density(3, None, rng).matrix
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)
    zero = np.diag([1.0, 0.0]).astype(complex)
    one = np.diag([0.0, 1.0]).astype(complex)
    assert fidelity(zero, one) == pytest.approx(0.0, abs=1e-12)
    assert trace_distance_half(zero, one) == pytest.approx(1.0)
    assert trace_distance(zero, one) == pytest.approx(2.0)


def test_fidelity_of_pure_states(rng):
    psi = random_pure(3, rng).matrix
    phi = random_pure(3, rng).matrix
    # For pure states F = |<psi|phi>| = sqrt(tr(psi phi)).
    expected = math.sqrt(abs(np.trace(psi @ phi)))
    assert fidelity(psi, phi) == pytest.approx(expected, abs=1e-7)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_fuchs_van_de_graaf(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(3, None, rng).matrix
    sigma = random_density(3, None, rng).matrix
    f = fidelity(rho, sigma)
    t = trace_distance_half(rho, sigma)
    assert 0 <= f <= 1 + 1e-12
    assert f == pytest.approx(fidelity(sigma, rho), abs=1e-10)
    assert 1 - f <= t + 1e-10
    assert t <= math.sqrt(max(1 - f**2, 0.0)) + 1e-10
    assert sqrt_overlap(rho, sigma) <= f + 1e-10


def test_entropies(rng):
    assert vn_entropy(identity(4) / 4) == pytest.approx(2.0)
    assert vn_entropy(random_pure(3, rng).matrix) == pytest.approx(0.0, abs=1e-9)
    rho = random_density(3, None, rng).matrix
    assert relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-9)
    pure = np.diag([1.0, 0.0]).astype(complex)
    assert relative_entropy(identity(2) / 2, pure) == math.inf


def test_density_validation():
    with pytest.raises(TraceError) as e:
        check_density_matrix(1.2 * identity(2) / 2)
    assert e.value.violation == pytest.approx(0.2)
    with pytest.raises(NotPSDError):
        check_density_matrix(np.diag([1.5, -0.5]))
    with pytest.raises(NotHermitianError):
        check_density_matrix(np.array([[0.5, 1.0], [0.0, 0.5]]))


def test_dimension_cap(monkeypatch):
    monkeypatch.setenv("QMCLAB_MAX_DIM", "4")
    assert max_total_dim() == 4
    with pytest.raises(DimensionError):
        kron(identity(4), identity(2))
    monkeypatch.setenv("QMCLAB_MAX_DIM", "lots")
    with pytest.raises(ConfigError):
        max_total_dim()
