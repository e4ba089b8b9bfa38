"""Quantum channels in Kraus form, their adjoints and Stinespring isometries."""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qmclab.config import TP_TOL
from qmclab.errors import ChannelError, DimensionError
from qmclab.linalg import (
    ComplexMatrix,
    SystemLayout,
    as_matrix,
    hermitize,
    identity,
    kron,
    partial_trace,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """
    Completely positive map X -> sum_i A_i X A_i†.

    Parameters
    ----------
    kraus: tuple[ComplexMatrix, ...]
        Kraus operators, each out_dim x in_dim.
    in_dim: int
        Input dimension.
    out_dim: int
        Output dimension.
    """

    kraus: tuple[ComplexMatrix, ...]
    in_dim: int
    out_dim: int

    def __post_init__(self):
        kraus = []
        for i, a in enumerate(self.kraus):
            a = as_matrix(a).copy()
            if a.shape != (self.out_dim, self.in_dim):
                raise ChannelError(
                    f"Kraus operator {i} has shape {a.shape}, expected "
                    f"{(self.out_dim, self.in_dim)}"
                )
            a.flags.writeable = False
            kraus.append(a)
        if not kraus:
            raise ChannelError("a channel needs at least one Kraus operator")
        object.__setattr__(self, "kraus", tuple(kraus))

    @classmethod
    def from_kraus(
        cls, kraus: Sequence[ComplexMatrix], require_tp: bool = True
    ) -> "QuantumChannel":
        """Builds a channel, inferring dimensions and optionally checking TP."""
        kraus = [as_matrix(a) for a in kraus]
        if not kraus:
            raise ChannelError("a channel needs at least one Kraus operator")
        out_dim, in_dim = kraus[0].shape
        channel = cls(tuple(kraus), in_dim, out_dim)
        if require_tp:
            deviation = channel.tp_deviation()
            if deviation > TP_TOL:
                raise ChannelError(
                    f"channel is not trace preserving: ||sum A_i†A_i - I|| = {deviation:.3e}"
                )
        return channel

    @property
    def n_kraus(self) -> int:
        return len(self.kraus)

    def gram(self) -> ComplexMatrix:
        """sum_i A_i† A_i"""
        return hermitize(sum(a.conj().T @ a for a in self.kraus))

    def tp_deviation(self) -> float:
        return float(np.linalg.norm(self.gram() - identity(self.in_dim), 2))

    def is_trace_preserving(self, tol: float = TP_TOL) -> bool:
        return self.tp_deviation() <= tol


@dataclass(frozen=True, eq=False)
class StinespringIsometry:
    """V = sum_i A_i ⊗ |i>_E, with the output system first and E last."""

    v: ComplexMatrix
    env_dim: int

    @property
    def in_dim(self) -> int:
        return self.v.shape[1]

    @property
    def out_dim(self) -> int:
        return self.v.shape[0] // self.env_dim

    def apply(self, rho: ComplexMatrix) -> ComplexMatrix:
        """tr_E(V rho V†)"""
        out = self.v @ as_matrix(rho) @ self.v.conj().T
        return partial_trace(out, SystemLayout((self.out_dim, self.env_dim)), [1])

    def to_channel(self) -> QuantumChannel:
        blocks = self.v.reshape(self.out_dim, self.env_dim, self.in_dim)
        return QuantumChannel(
            tuple(blocks[:, i, :] for i in range(self.env_dim)), self.in_dim, self.out_dim
        )


def _check_input(phi: QuantumChannel, x: ComplexMatrix, dim: int, side: str):
    x = as_matrix(x)
    if x.shape != (dim, dim):
        raise DimensionError(
            f"channel {side} dimension is {dim} but the operator has shape {x.shape}"
        )
    return x


def channel_apply(phi: QuantumChannel, x: ComplexMatrix) -> ComplexMatrix:
    """sum_i A_i x A_i†"""
    x = _check_input(phi, x, phi.in_dim, "input")
    k = np.stack(phi.kraus)
    return np.einsum("kij,jl,kml->im", k, x, k.conj())


def channel_adjoint_apply(phi: QuantumChannel, x: ComplexMatrix) -> ComplexMatrix:
    """sum_i A_i† x A_i"""
    x = _check_input(phi, x, phi.out_dim, "output")
    k = np.stack(phi.kraus)
    return np.einsum("kji,jl,klm->im", k.conj(), x, k)


def stinespring(phi: QuantumChannel) -> StinespringIsometry:
    """
    Stinespring isometry of a trace-preserving channel.

    Raises ChannelError if sum_i A_i†A_i deviates from the identity by more than
    TP_TOL.
    """
    deviation = phi.tp_deviation()
    if deviation > TP_TOL:
        raise ChannelError(
            f"Stinespring dilation needs a trace-preserving channel; deviation {deviation:.3e}"
        )
    v = np.stack(phi.kraus, axis=1).reshape(phi.out_dim * phi.n_kraus, phi.in_dim)
    return StinespringIsometry(v, phi.n_kraus)


def identity_channel(d: int) -> QuantumChannel:
    return QuantumChannel((identity(d),), d, d)


def depolarizing_channel(d: int) -> QuantumChannel:
    """Completely depolarizing channel X -> tr(X) I/d with Kraus |i><j|/sqrt(d)."""
    kraus = []
    for i in range(d):
        for j in range(d):
            a = np.zeros((d, d), dtype=np.complex128)
            a[i, j] = 1 / np.sqrt(d)
            kraus.append(a)
    return QuantumChannel(tuple(kraus), d, d)


def partial_trace_channel(layout: SystemLayout, traced: int) -> QuantumChannel:
    """Channel tracing out one subsystem, Kraus I ⊗ <i| ⊗ I."""
    layout.check_index(traced)
    left = layout.dim_of(range(traced))
    right = layout.dim_of(range(traced + 1, len(layout)))
    d = layout.dims[traced]
    kraus = []
    for i in range(d):
        bra = np.zeros((1, d), dtype=np.complex128)
        bra[0, i] = 1.0
        kraus.append(kron(kron(identity(left), bra), identity(right)))
    return QuantumChannel(tuple(kraus), layout.total, left * right)


def random_channel(
    d_in: int, d_out: int, n_kraus: int, rng: np.random.Generator
) -> QuantumChannel:
    """Channel from a random isometry C^{d_in} -> C^{d_out} ⊗ C^{n_kraus}."""
    if d_out * n_kraus < d_in:
        raise ChannelError(
            f"{n_kraus} Kraus operators of shape {d_out}x{d_in} cannot be trace preserving"
        )
    g = rng.standard_normal((d_out * n_kraus, d_in)) + 1j * rng.standard_normal(
        (d_out * n_kraus, d_in)
    )
    q, r = np.linalg.qr(g)
    v = q * (np.diag(r) / np.abs(np.diag(r)))
    return StinespringIsometry(v, n_kraus).to_channel()


def extend_channel(phi: QuantumChannel, left: int = 1, right: int = 1) -> QuantumChannel:
    """id_left ⊗ phi ⊗ id_right, with the spectators made explicit."""
    kraus = tuple(kron(kron(identity(left), a), identity(right)) for a in phi.kraus)
    return QuantumChannel(kraus, left * phi.in_dim * right, left * phi.out_dim * right)


def compose_channels(second: QuantumChannel, first: QuantumChannel) -> QuantumChannel:
    """second ∘ first"""
    if second.in_dim != first.out_dim:
        raise DimensionError(
            f"cannot compose: first outputs dimension {first.out_dim}, "
            f"second expects {second.in_dim}"
        )
    kraus = tuple(b @ a for b in second.kraus for a in first.kraus)
    return QuantumChannel(kraus, first.in_dim, second.out_dim)
