"""
Petz recovery maps and Markov-chain diagnostics.

For a tripartite state the recovery from rho_AB is

    rho_BC^{1/2} (rho_B^{-1/2} rho_AB rho_B^{-1/2} ⊗ I_C) rho_BC^{1/2},

the Petz map of the partial trace over C with reference state rho_BC. The general
map of a channel Phi with reference state sigma is

    alpha -> sigma^{1/2} Phi*(Phi(sigma)^{-1/2} alpha Phi(sigma)^{-1/2}) sigma^{1/2}.
"""

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from qmclab.channels import (
    QuantumChannel,
    channel_adjoint_apply,
    channel_apply,
    extend_channel,
    stinespring,
)
from qmclab.config import MARGINAL_CONSISTENCY_TOL, TRACE_TOL
from qmclab.errors import DimensionError, InfeasibleTargetError
from qmclab.linalg import (
    ComplexMatrix,
    SystemLayout,
    as_matrix,
    hermitize,
    herm_sqrt,
    identity,
    kron,
    partial_trace,
    pinv_sqrt,
    relative_entropy,
    schatten_norm,
    support_projector,
    trace_distance,
    vn_entropy,
)
from qmclab.states import (
    DensityOperator,
    bisect_mixture,
    ghz_state,
)

logger = logging.getLogger(__name__)

MarginalConvention = Literal["bc", "ab"]


@dataclass(frozen=True, eq=False)
class PetzReconstruction:
    """Output of a tripartite recovery with its numerical side information."""

    state: DensityOperator
    trace_deviation: float
    support_leakage: float
    marginal_mismatch: float

    @property
    def flagged(self) -> bool:
        return self.marginal_mismatch > MARGINAL_CONSISTENCY_TOL


@dataclass(frozen=True, eq=False)
class PetzMap:
    """The Petz recovery of a forward channel with a reference state, as a channel."""

    channel: QuantumChannel
    forward: QuantumChannel
    reference: DensityOperator


def _check_pair(rho_ab: DensityOperator, rho_bc: DensityOperator) -> tuple[int, int, int]:
    if len(rho_ab.layout) != 2 or len(rho_bc.layout) != 2:
        raise DimensionError(
            f"expected bipartite marginals, got layouts {rho_ab.dims} and {rho_bc.dims}"
        )
    d_a, d_b = rho_ab.dims
    d_b2, d_c = rho_bc.dims
    if d_b != d_b2:
        raise DimensionError(
            f"d_B mismatch: rho_AB has {d_b}, rho_BC has {d_b2}", subsystem=1
        )
    return d_a, d_b, d_c


def _petz_step(
    x: ComplexMatrix,
    left_dim: int,
    pair: ComplexMatrix,
    pair_dims: tuple[int, int],
    reduced: ComplexMatrix,
    tol: float | None = None,
) -> ComplexMatrix:
    """
    Applies X -> P^{1/2} (r^{-1/2} X r^{-1/2} ⊗ I) P^{1/2} to the last factor of x,
    where P is the pair state on (B, C) and r its reduced state on B. The first
    left_dim dimensions of x are spectators.
    """
    d_b, d_c = pair_dims
    inv = kron(identity(left_dim), pinv_sqrt(reduced, tol))
    root = kron(identity(left_dim), herm_sqrt(pair))
    inner = hermitize(inv @ x @ inv)
    return hermitize(root @ kron(inner, identity(d_c)) @ root)


def petz_reconstruct_detailed(
    rho_ab: DensityOperator,
    rho_bc: DensityOperator,
    marginal: MarginalConvention = "bc",
    tol: float | None = None,
) -> PetzReconstruction:
    """
    Tripartite Petz reconstruction with trace and support diagnostics.

    Parameters
    ----------
    rho_ab: DensityOperator
        State on (A, B).
    rho_bc: DensityOperator
        State on (B, C).
    marginal: str, optional
        "bc" takes rho_B = tr_C rho_BC, "ab" takes rho_B = tr_A rho_AB.
        Defaults to "bc".
    tol: float, optional
        Support cutoff for rho_B^{-1/2}.

    Returns
    -------
    PetzReconstruction: The state on (A, B, C) and its diagnostics.
    """
    d_a, d_b, d_c = _check_pair(rho_ab, rho_bc)
    b_from_ab = partial_trace(rho_ab.matrix, rho_ab.layout, [0])
    b_from_bc = partial_trace(rho_bc.matrix, rho_bc.layout, [1])
    if marginal == "bc":
        rho_b = b_from_bc
    elif marginal == "ab":
        rho_b = b_from_ab
    else:
        raise ValueError(f"marginal must be 'bc' or 'ab', got {marginal!r}")

    out = _petz_step(rho_ab.matrix, d_a, rho_bc.matrix, (d_b, d_c), rho_b, tol)
    proj = support_projector(rho_b, tol)
    leakage = float(np.trace((identity(d_b) - proj) @ b_from_ab).real)
    mismatch = trace_distance(b_from_ab, b_from_bc)
    trace_dev = abs(float(np.trace(out).real) - 1.0)
    if leakage > TRACE_TOL:
        logger.warning(f"Petz reconstruction: support leakage {leakage:.3e} outside rho_B")
    if mismatch > MARGINAL_CONSISTENCY_TOL:
        logger.info(
            f"Petz reconstruction: B marginals disagree by {mismatch:.3e}; "
            f"output trace deviates by {trace_dev:.3e}"
        )
    state = DensityOperator(out, SystemLayout((d_a, d_b, d_c)))
    return PetzReconstruction(state, trace_dev, leakage, mismatch)


def petz_reconstruct(
    rho_ab: DensityOperator,
    rho_bc: DensityOperator,
    marginal: MarginalConvention = "bc",
    tol: float | None = None,
) -> DensityOperator:
    """rho_BC^{1/2} (rho_B^{-1/2} rho_AB rho_B^{-1/2} ⊗ I_C) rho_BC^{1/2}"""
    return petz_reconstruct_detailed(rho_ab, rho_bc, marginal, tol).state


def petz_reconstruct_swapped(
    rho_ab: DensityOperator,
    rho_bc: DensityOperator,
    marginal: MarginalConvention = "ab",
    tol: float | None = None,
) -> DensityOperator:
    """
    rho_AB^{1/2} (I_A ⊗ rho_B^{-1/2} rho_BC rho_B^{-1/2}) rho_AB^{1/2}, the recovery
    of C-side data from rho_BC. Agrees with petz_reconstruct on exact Markov chains.
    """
    d_a, d_b, d_c = _check_pair(rho_ab, rho_bc)
    if marginal == "ab":
        rho_b = partial_trace(rho_ab.matrix, rho_ab.layout, [0])
    else:
        rho_b = partial_trace(rho_bc.matrix, rho_bc.layout, [1])
    inv = kron(pinv_sqrt(rho_b, tol), identity(d_c))
    inner = hermitize(inv @ rho_bc.matrix @ inv)
    root = kron(herm_sqrt(rho_ab.matrix), identity(d_c))
    out = hermitize(root @ kron(identity(d_a), inner) @ root)
    return DensityOperator(out, SystemLayout((d_a, d_b, d_c)))


def petz_factor(
    rho_ab: DensityOperator,
    rho_bc: DensityOperator,
    marginal: MarginalConvention = "bc",
    tol: float | None = None,
) -> ComplexMatrix:
    """
    T = (I_A ⊗ rho_BC^{1/2}) (I_A ⊗ rho_B^{-1/2} ⊗ I_C) (rho_AB^{1/2} ⊗ I_C), so that
    T T† is the tripartite recovery. Its Hilbert-Schmidt norm is one whenever
    rho_B = tr_A rho_AB has full rank.
    """
    d_a, d_b, d_c = _check_pair(rho_ab, rho_bc)
    if marginal == "bc":
        rho_b = partial_trace(rho_bc.matrix, rho_bc.layout, [1])
    elif marginal == "ab":
        rho_b = partial_trace(rho_ab.matrix, rho_ab.layout, [0])
    else:
        raise ValueError(f"marginal must be 'bc' or 'ab', got {marginal!r}")
    left = kron(identity(d_a), herm_sqrt(rho_bc.matrix))
    middle = kron(kron(identity(d_a), pinv_sqrt(rho_b, tol)), identity(d_c))
    right = kron(herm_sqrt(rho_ab.matrix), identity(d_c))
    return left @ middle @ right


def petz_map_kraus(rho_bc: DensityOperator, tol: float | None = None) -> QuantumChannel:
    """
    The tripartite recovery as a channel B -> B ⊗ C with Kraus operators
    M_i = rho_BC^{1/2} (rho_B^{-1/2} ⊗ |i>_C). It is trace preserving on the
    support of rho_B.
    """
    if len(rho_bc.layout) != 2:
        raise DimensionError(f"expected a bipartite state, got layout {rho_bc.dims}")
    d_b, d_c = rho_bc.dims
    rho_b = partial_trace(rho_bc.matrix, rho_bc.layout, [1])
    root = herm_sqrt(rho_bc.matrix)
    inv = pinv_sqrt(rho_b, tol)
    kraus = []
    for i in range(d_c):
        ket = np.zeros((d_c, 1), dtype=np.complex128)
        ket[i, 0] = 1.0
        kraus.append(root @ kron(inv, ket))
    return QuantumChannel(tuple(kraus), d_b, d_b * d_c)


def general_petz(
    phi: QuantumChannel,
    sigma: DensityOperator | ComplexMatrix,
    alpha: ComplexMatrix,
    tol: float | None = None,
    via: Literal["kraus", "stinespring"] = "kraus",
) -> ComplexMatrix:
    """
    Petz recovery of phi with reference state sigma applied to alpha.

    Parameters
    ----------
    phi: QuantumChannel
        Forward channel.
    sigma: DensityOperator | ComplexMatrix
        Reference state on the input space of phi.
    alpha: ComplexMatrix
        Operator on the output space of phi.
    tol: float, optional
        Support cutoff for Phi(sigma)^{-1/2}.
    via: str, optional
        "kraus" evaluates through the adjoint map, "stinespring" through
        sigma^{1/2} V† (Phi(sigma)^{-1/2} alpha Phi(sigma)^{-1/2} ⊗ I_E) V sigma^{1/2}.
        Defaults to "kraus".

    Returns
    -------
    ComplexMatrix: The recovered operator on the input space of phi.
    """
    sig = sigma.matrix if isinstance(sigma, DensityOperator) else as_matrix(sigma)
    alpha = as_matrix(alpha)
    if sig.shape != (phi.in_dim, phi.in_dim):
        raise DimensionError(
            f"reference state has shape {sig.shape}, channel input dimension is {phi.in_dim}"
        )
    if alpha.shape != (phi.out_dim, phi.out_dim):
        raise DimensionError(
            f"alpha has shape {alpha.shape}, channel output dimension is {phi.out_dim}"
        )
    inv = pinv_sqrt(channel_apply(phi, sig), tol)
    inner = hermitize(inv @ alpha @ inv)
    if via == "kraus":
        pulled = channel_adjoint_apply(phi, inner)
    elif via == "stinespring":
        iso = stinespring(phi)
        pulled = iso.v.conj().T @ kron(inner, identity(iso.env_dim)) @ iso.v
    else:
        raise ValueError(f"via must be 'kraus' or 'stinespring', got {via!r}")
    root = herm_sqrt(sig)
    return hermitize(root @ pulled @ root)


def general_petz_channel(
    phi: QuantumChannel, sigma: DensityOperator | ComplexMatrix, tol: float | None = None
) -> PetzMap:
    """Recovery channel with Kraus operators sigma^{1/2} A_i† Phi(sigma)^{-1/2}."""
    sig = sigma.matrix if isinstance(sigma, DensityOperator) else as_matrix(sigma)
    if not isinstance(sigma, DensityOperator):
        sigma = DensityOperator(sig, SystemLayout((phi.in_dim,)))
    inv = pinv_sqrt(channel_apply(phi, sig), tol)
    root = herm_sqrt(sig)
    kraus = tuple(root @ a.conj().T @ inv for a in phi.kraus)
    return PetzMap(QuantumChannel(kraus, phi.out_dim, phi.in_dim), phi, sigma)


@dataclass(frozen=True, eq=False)
class ChainReconstruction:
    state: DensityOperator
    mismatches: tuple[float, ...] = field(default_factory=tuple)

    @property
    def consistent(self) -> bool:
        return all(m <= MARGINAL_CONSISTENCY_TOL for m in self.mismatches)


def chain_reconstruct_detailed(
    pair_marginals: Sequence[DensityOperator], tol: float | None = None
) -> ChainReconstruction:
    """
    Applies N_{m-1} ∘ ... ∘ N_2 to rho_{1,2}, where N_i acts on the last factor of
    the accumulated state through the Petz map of rho_{i,i+1}.

    Returns
    -------
    ChainReconstruction: The state on all m subsystems and the trace-norm
    disagreement of each pair of adjacent one-site marginals.
    """
    pairs = list(pair_marginals)
    if len(pairs) < 2:
        raise DimensionError(f"a chain needs at least 2 pair marginals, got {len(pairs)}")
    for i, p in enumerate(pairs):
        if len(p.layout) != 2:
            raise DimensionError(f"pair marginal {i} has layout {p.dims}", subsystem=i)
    for i in range(len(pairs) - 1):
        if pairs[i].dims[1] != pairs[i + 1].dims[0]:
            raise DimensionError(
                f"pair marginals {i} and {i + 1} disagree on the dimension of "
                f"subsystem {i + 1}",
                subsystem=i + 1,
            )

    mismatches = []
    x = pairs[0].matrix
    dims = list(pairs[0].dims)
    for i, pair in enumerate(pairs[1:], start=1):
        d_b, d_c = pair.dims
        reduced = partial_trace(pair.matrix, pair.layout, [1])
        previous = partial_trace(pairs[i - 1].matrix, pairs[i - 1].layout, [0])
        mismatch = trace_distance(reduced, previous)
        mismatches.append(mismatch)
        if mismatch > MARGINAL_CONSISTENCY_TOL:
            logger.warning(
                f"Chain reconstruction: marginals of subsystem {i} disagree by {mismatch:.3e}"
            )
        left = int(np.prod(dims[:-1]))
        x = _petz_step(x, left, pair.matrix, (d_b, d_c), reduced, tol)
        dims.append(d_c)
    return ChainReconstruction(DensityOperator(x, SystemLayout(tuple(dims))), tuple(mismatches))


def chain_reconstruct(
    pair_marginals: Sequence[DensityOperator], tol: float | None = None
) -> DensityOperator:
    return chain_reconstruct_detailed(pair_marginals, tol).state


def pair_marginals(rho: DensityOperator) -> list[DensityOperator]:
    """Nearest-neighbour marginals rho_{i,i+1}."""
    m = len(rho.layout)
    return [rho.marginal([i, i + 1]) for i in range(m - 1)]


def _check_tripartite(rho: DensityOperator) -> None:
    if len(rho.layout) != 3:
        raise DimensionError(
            f"expected a tripartite state, got {len(rho.layout)} subsystems"
        )


def cmi(rho_abc: DensityOperator) -> float:
    """I(A:C|B) = S(AB) + S(BC) - S(B) - S(ABC), in bits."""
    _check_tripartite(rho_abc)

    def s(keep: list[int]) -> float:
        return vn_entropy(rho_abc.marginal(keep).matrix, validate=False)

    return s([0, 1]) + s([1, 2]) - s([1]) - vn_entropy(rho_abc.matrix, validate=False)


def cmi_via_relative_entropy(rho_abc: DensityOperator) -> float:
    """S(rho_ABC || rho_A ⊗ rho_BC) - S(rho_AB || rho_A ⊗ rho_B)"""
    _check_tripartite(rho_abc)
    rho_a = rho_abc.marginal([0]).matrix
    rho_ab = rho_abc.marginal([0, 1]).matrix
    rho_bc = rho_abc.marginal([1, 2]).matrix
    rho_b = rho_abc.marginal([1]).matrix
    whole = relative_entropy(rho_abc.matrix, kron(rho_a, rho_bc), validate=False)
    part = relative_entropy(rho_ab, kron(rho_a, rho_b), validate=False)
    return whole - part


def data_processing_gap(
    phi: QuantumChannel, rho: ComplexMatrix, sigma: ComplexMatrix
) -> float:
    """S(rho || sigma) - S(Phi(rho) || Phi(sigma)); zero iff Petz recovery succeeds."""
    before = relative_entropy(rho, sigma)
    after = relative_entropy(
        hermitize(channel_apply(phi, rho)), hermitize(channel_apply(phi, sigma))
    )
    return before - after


def petz_distance(
    rho_abc: DensityOperator,
    p: float = 1,
    orientation: Literal["bc", "ab"] = "bc",
) -> float:
    """Schatten-p distance between rho_ABC and its recovery from its own marginals."""
    _check_tripartite(rho_abc)
    rho_ab = rho_abc.marginal([0, 1])
    rho_bc = rho_abc.marginal([1, 2])
    if orientation == "bc":
        rec = petz_reconstruct(rho_ab, rho_bc)
    else:
        rec = petz_reconstruct_swapped(rho_ab, rho_bc)
    return schatten_norm(rho_abc.matrix - rec.matrix, p)


def markov_diagnostics(rho_abc: DensityOperator) -> dict[str, float]:
    rho_ab = rho_abc.marginal([0, 1])
    rho_bc = rho_abc.marginal([1, 2])
    forward = petz_reconstruct(rho_ab, rho_bc)
    swapped = petz_reconstruct_swapped(rho_ab, rho_bc)
    return {
        "cmi": cmi(rho_abc),
        "petz_distance": trace_distance(rho_abc.matrix, forward.matrix),
        "petz_distance_swapped": trace_distance(rho_abc.matrix, swapped.matrix),
        "orderings_disagreement": trace_distance(forward.matrix, swapped.matrix),
    }


def far_from_markov(
    rho: DensityOperator,
    eps: float,
    mixer: DensityOperator | None = None,
) -> DensityOperator:
    """
    Mixes rho towards a GHZ state until its own recovery misses it by eps in trace
    norm.

    Raises InfeasibleTargetError if even the mixer is closer than eps to its
    recovery.
    """
    _check_tripartite(rho)
    if mixer is None:
        mixer = ghz_state(rho.dims)
    base, w = rho.matrix, mixer.matrix

    def distance(x: ComplexMatrix) -> float:
        return petz_distance(DensityOperator(x, rho.layout))

    found = bisect_mixture(lambda t: hermitize((1 - t) * base + t * w), distance, eps)
    if found is None:
        raise InfeasibleTargetError(
            f"recovery distance {eps} is not reachable at dims {rho.dims}"
        )
    return DensityOperator(found[1], rho.layout)
