import numpy as np
import pytest

from qmclab.channels import (
    QuantumChannel,
    channel_adjoint_apply,
    channel_apply,
    compose_channels,
    depolarizing_channel,
    extend_channel,
    identity_channel,
    partial_trace_channel,
    random_channel,
    stinespring,
)
from qmclab.errors import ChannelError, DimensionError
from qmclab.linalg import SystemLayout, identity, kron, partial_trace
from qmclab.states import random_density


def _random_operator(d, rng):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def test_random_channel_is_trace_preserving(rng):
    phi = random_channel(3, 2, 2, rng)
    assert phi.n_kraus == 2
    assert phi.is_trace_preserving()
    with pytest.raises(ChannelError):
        random_channel(4, 1, 2, rng)


def test_stinespring_matches_kraus(rng):
    phi = random_channel(2, 3, 3, rng)
    iso = stinespring(phi)
    np.testing.assert_allclose(iso.v.conj().T @ iso.v, identity(2), atol=1e-12)
    rho = random_density(2, None, rng).matrix
    np.testing.assert_allclose(iso.apply(rho), channel_apply(phi, rho), atol=1e-12)
    back = iso.to_channel()
    for a, b in zip(back.kraus, phi.kraus):
        np.testing.assert_allclose(a, b)


def test_stinespring_needs_trace_preservation():
    half = QuantumChannel((identity(2) / 2,), 2, 2)
    with pytest.raises(ChannelError):
        stinespring(half)
    with pytest.raises(ChannelError):
        QuantumChannel.from_kraus([identity(2) / 2])
    assert QuantumChannel.from_kraus([identity(2) / 2], require_tp=False).in_dim == 2


def test_adjoint_pairing(rng):
    phi = random_channel(3, 2, 4, rng)
    x = _random_operator(3, rng)
    y = _random_operator(2, rng)
    lhs = np.trace(channel_apply(phi, x) @ y)
    rhs = np.trace(x @ channel_adjoint_apply(phi, y))
    assert lhs == pytest.approx(rhs, abs=1e-10)
    with pytest.raises(DimensionError):
        channel_apply(phi, identity(2))


def test_standard_channels(rng):
    rho = random_density(3, None, rng).matrix
    np.testing.assert_allclose(channel_apply(identity_channel(3), rho), rho)
    np.testing.assert_allclose(
        channel_apply(depolarizing_channel(3), rho), identity(3) / 3, atol=1e-12
    )
    layout = SystemLayout((2, 3, 2))
    big = random_density(12, None, rng).matrix
    for traced in range(3):
        np.testing.assert_allclose(
            channel_apply(partial_trace_channel(layout, traced), big),
            partial_trace(big, layout, [traced]),
            atol=1e-12,
        )


def test_extend_and_compose(rng):
    phi = random_channel(2, 2, 2, rng)
    a = random_density(3, None, rng).matrix
    b = random_density(2, None, rng).matrix
    wide = extend_channel(phi, left=3)
    np.testing.assert_allclose(
        channel_apply(wide, kron(a, b)), kron(a, channel_apply(phi, b)), atol=1e-12
    )
    psi = random_channel(2, 3, 1, rng)
    both = compose_channels(psi, phi)
    assert (both.in_dim, both.out_dim, both.n_kraus) == (2, 3, 2)
    np.testing.assert_allclose(
        channel_apply(both, b), channel_apply(psi, channel_apply(phi, b)), atol=1e-12
    )
    with pytest.raises(DimensionError):
        compose_channels(phi, psi)
