"""
Density operators, random states and exact quantum Markov chains.

Markov chains are assembled from the direct-sum structure
rho_ABC = sum_k p_k rho_{A B_L,k} ⊗ rho_{B_R,k C}, with block k occupying the next
b_L,k * b_R,k basis vectors of H_B.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal, Sequence

import numpy as np

from qmclab.config import (
    PERTURB_MAX_BRACKETS,
    PERTURB_MAX_ITER,
    PERTURB_REL_TOL,
)
from qmclab.errors import DimensionError, InfeasibleTargetError
from qmclab.linalg import (
    ComplexMatrix,
    SystemLayout,
    as_matrix,
    check_density_matrix,
    fidelity,
    hermitize,
    identity,
    kron,
    kron_all,
    partial_trace,
    permute_systems,
    trace_distance,
)

logger = logging.getLogger(__name__)

TargetKind = Literal["infidelity", "trace"]


def as_layout(layout: SystemLayout | Sequence[int] | int) -> SystemLayout:
    if isinstance(layout, SystemLayout):
        return layout
    if isinstance(layout, (int, np.integer)):
        return SystemLayout((int(layout),))
    return SystemLayout(tuple(layout))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """
    A density matrix tagged with its subsystem layout. The stored matrix is
    read-only. Construct validated instances through validate_density; the
    constructor itself only checks the shape.
    """

    matrix: ComplexMatrix
    layout: SystemLayout

    def __post_init__(self):
        layout = as_layout(self.layout)
        m = as_matrix(self.matrix).copy()
        layout.check_square(m, "density matrix")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "layout", layout)

    @property
    def dim(self) -> int:
        return self.layout.total

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    def ptrace(self, traced: Sequence[int]) -> "DensityOperator":
        """Marginal after tracing out the listed subsystems."""
        kept = [i for i in range(len(self.layout)) if i not in set(traced)]
        if not kept:
            raise DimensionError("cannot trace out every subsystem of a state")
        return DensityOperator(
            hermitize(partial_trace(self.matrix, self.layout, traced)),
            self.layout.keep(kept),
        )

    def marginal(self, keep: Sequence[int]) -> "DensityOperator":
        return self.ptrace([i for i in range(len(self.layout)) if i not in set(keep)])

    def permuted(self, order: Sequence[int]) -> "DensityOperator":
        m, layout = permute_systems(self.matrix, self.layout, order)
        return DensityOperator(m, layout)

    def tensor(self, other: "DensityOperator") -> "DensityOperator":
        return DensityOperator(
            kron(self.matrix, other.matrix), self.layout.concat(other.layout)
        )

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


def validate_density(m: ComplexMatrix, layout) -> DensityOperator:
    """
    Validates m as a density matrix on layout.

    Parameters
    ----------
    m: ComplexMatrix
        Candidate matrix.
    layout: SystemLayout | Sequence[int]
        Subsystem dimensions; their product must equal the matrix dimension.

    Returns
    -------
    DensityOperator: The validated, hermitized state. Raises NotHermitianError,
    NotPSDError or TraceError with the measured violation; never normalizes.
    """
    layout = as_layout(layout)
    m = as_matrix(m)
    layout.check_square(m, "density matrix")
    return DensityOperator(check_density_matrix(m), layout)


@dataclass(frozen=True)
class BlockSpec:
    """
    Direct-sum decomposition of H_B into blocks B_L,k ⊗ B_R,k.

    Parameters
    ----------
    splits: tuple[tuple[int, int], ...]
        (b_L, b_R) per block, in basis order.
    weights: tuple[float, ...], optional
        Block probabilities. Drawn from Dirichlet(1) when None.
    """

    splits: tuple[tuple[int, int], ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        splits = tuple((int(l), int(r)) for l, r in self.splits)
        object.__setattr__(self, "splits", splits)
        if not splits:
            raise DimensionError("a block spec needs at least one block")
        for k, (l, r) in enumerate(splits):
            if l < 1 or r < 1:
                raise DimensionError(f"block {k} has split ({l}, {r}); need >= 1")
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            object.__setattr__(self, "weights", weights)
            if len(weights) != len(splits):
                raise DimensionError(
                    f"{len(weights)} weights given for {len(splits)} blocks"
                )
            if any(w < 0 for w in weights) or abs(sum(weights) - 1) > 1e-12:
                raise DimensionError(f"block weights {weights} are not a distribution")

    @property
    def d_b(self) -> int:
        return sum(l * r for l, r in self.splits)

    def offsets(self) -> list[int]:
        out, o = [], 0
        for l, r in self.splits:
            out.append(o)
            o += l * r
        return out


@lru_cache(maxsize=None)
def _n_factorizations(n: int) -> int:
    return sum(1 for l in range(1, n + 1) if n % l == 0)


@lru_cache(maxsize=None)
def _n_compositions(n: int) -> int:
    """Number of block specs whose block sizes sum to n."""
    if n == 0:
        return 1
    return sum(_n_factorizations(s) * _n_compositions(n - s) for s in range(1, n + 1))


def random_block_spec(d_b: int, rng: np.random.Generator) -> BlockSpec:
    """Draws a block spec uniformly over all valid decompositions of d_b."""
    if d_b < 1:
        raise DimensionError(f"d_B must be >= 1, got {d_b}")
    splits = []
    remaining = d_b
    while remaining > 0:
        sizes = np.arange(1, remaining + 1)
        counts = np.array(
            [_n_factorizations(s) * _n_compositions(remaining - s) for s in sizes],
            dtype=float,
        )
        s = int(rng.choice(sizes, p=counts / counts.sum()))
        divisors = [l for l in range(1, s + 1) if s % l == 0]
        b_l = int(divisors[rng.integers(len(divisors))])
        splits.append((b_l, s // b_l))
        remaining -= s
    weights = tuple(float(w) for w in rng.dirichlet(np.ones(len(splits))))
    return BlockSpec(tuple(splits), weights)


@dataclass(frozen=True, eq=False)
class MarkovBlock:
    weight: float
    left: DensityOperator  # on A ⊗ B_L
    right: DensityOperator  # on B_R ⊗ C

    @property
    def b_l(self) -> int:
        return self.left.dims[1]

    @property
    def b_r(self) -> int:
        return self.right.dims[0]


@dataclass(frozen=True, eq=False)
class MarkovStructure:
    """Explicit structure-theorem data of a tripartite Markov chain."""

    blocks: tuple[MarkovBlock, ...]

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise DimensionError("a Markov structure needs at least one block")
        total = sum(b.weight for b in blocks)
        if abs(total - 1) > 1e-12 or any(not 0 <= b.weight <= 1 for b in blocks):
            raise DimensionError(
                f"block weights {[b.weight for b in blocks]} are not a distribution"
            )
        for k, b in enumerate(blocks):
            if len(b.left.layout) != 2 or len(b.right.layout) != 2:
                raise DimensionError(f"block {k} factors must be bipartite")
            if b.left.dims[0] != blocks[0].left.dims[0]:
                raise DimensionError(f"block {k} has a different d_A", subsystem=0)
            if b.right.dims[1] != blocks[0].right.dims[1]:
                raise DimensionError(f"block {k} has a different d_C", subsystem=2)

    @property
    def d_a(self) -> int:
        return self.blocks[0].left.dims[0]

    @property
    def d_b(self) -> int:
        return sum(b.b_l * b.b_r for b in self.blocks)

    @property
    def d_c(self) -> int:
        return self.blocks[0].right.dims[1]

    @property
    def spec(self) -> BlockSpec:
        return BlockSpec(
            tuple((b.b_l, b.b_r) for b in self.blocks),
            tuple(b.weight for b in self.blocks),
        )


def random_pure(d: int, rng: np.random.Generator) -> DensityOperator:
    """Haar-random pure state from a normalized complex Gaussian vector."""
    if d < 1:
        raise DimensionError(f"dimension must be >= 1, got {d}")
    g = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    rho = np.outer(g, g.conj())
    return DensityOperator(hermitize(rho / np.trace(rho).real), SystemLayout((d,)))


def random_density(
    d: int, rank: int | None, rng: np.random.Generator
) -> DensityOperator:
    """
    Random mixed state: the marginal of a random pure state on d ⊗ rank.

    Parameters
    ----------
    d: int
        Dimension.
    rank: int | None
        Rank in [1, d]. None gives full rank.
    rng: np.random.Generator
        Seeded generator.

    Returns
    -------
    DensityOperator: A state of the given rank with probability one.
    """
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise DimensionError(f"rank must be in [1, {d}], got {rank}")
    psi = random_pure(d * rank, rng)
    rho = partial_trace(psi.matrix, SystemLayout((d, rank)), [1])
    return DensityOperator(hermitize(rho / np.trace(rho).real), SystemLayout((d,)))


def random_unitary(d: int, rng: np.random.Generator) -> ComplexMatrix:
    """Haar unitary from the QR decomposition of a Ginibre matrix."""
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def _with_layout(rho: DensityOperator, dims: Sequence[int]) -> DensityOperator:
    return DensityOperator(rho.matrix, SystemLayout(tuple(dims)))


def _embedding(offset: int, size: int, d: int) -> np.ndarray:
    """Isometry placing a size-dimensional block at basis offset of C^d."""
    w = np.zeros((d, size))
    w[offset + np.arange(size), np.arange(size)] = 1.0
    return w


def draw_markov_structure(
    layout,
    spec: BlockSpec | None,
    rng: np.random.Generator,
    rank: int | None = None,
) -> MarkovStructure:
    """
    Draws random factors for a block spec.

    Parameters
    ----------
    layout: SystemLayout | Sequence[int]
        (d_A, d_B, d_C).
    spec: BlockSpec | None
        Block decomposition of H_B. Drawn uniformly when None.
    rng: np.random.Generator
        Seeded generator.
    rank: int, optional
        Rank of every factor, capped by the factor dimension. Full rank when None.

    Returns
    -------
    MarkovStructure: Blocks with weights and random factor states.
    """
    layout = as_layout(layout)
    if len(layout) != 3:
        raise DimensionError(f"a Markov chain layout needs 3 subsystems, got {len(layout)}")
    d_a, d_b, d_c = layout.dims
    if spec is None:
        spec = random_block_spec(d_b, rng)
    if spec.d_b != d_b:
        raise DimensionError(
            f"block spec covers dimension {spec.d_b} but d_B is {d_b}", subsystem=1
        )
    weights = spec.weights
    if weights is None:
        weights = tuple(float(w) for w in rng.dirichlet(np.ones(len(spec.splits))))
    blocks = []
    for (b_l, b_r), p in zip(spec.splits, weights):
        left = random_density(d_a * b_l, _cap_rank(rank, d_a * b_l), rng)
        right = random_density(b_r * d_c, _cap_rank(rank, b_r * d_c), rng)
        blocks.append(
            MarkovBlock(p, _with_layout(left, (d_a, b_l)), _with_layout(right, (b_r, d_c)))
        )
    return MarkovStructure(tuple(blocks))


def _cap_rank(rank: int | None, d: int) -> int | None:
    return None if rank is None else min(int(rank), d)


def assemble_qmc(structure: MarkovStructure) -> DensityOperator:
    """Direct sum of the weighted block products, embedded into A ⊗ B ⊗ C."""
    d_a, d_b, d_c = structure.d_a, structure.d_b, structure.d_c
    rho = np.zeros((d_a * d_b * d_c,) * 2, dtype=np.complex128)
    offset = 0
    for block in structure.blocks:
        size = block.b_l * block.b_r
        w = kron_all(identity(d_a), _embedding(offset, size, d_b), identity(d_c))
        rho += block.weight * (w @ kron(block.left.matrix, block.right.matrix) @ w.T)
        offset += size
    return validate_density(hermitize(rho), (d_a, d_b, d_c))


def random_qmc(
    layout,
    structure: MarkovStructure | BlockSpec | None = None,
    rng: np.random.Generator | None = None,
) -> DensityOperator:
    """
    Exact tripartite quantum Markov chain from the structure theorem.

    Parameters
    ----------
    layout: SystemLayout | Sequence[int]
        (d_A, d_B, d_C).
    structure: MarkovStructure | BlockSpec | None
        Explicit structure, a block spec whose factors are drawn at random, or
        None to draw the block spec as well.
    rng: np.random.Generator, optional
        Seeded generator; required unless structure is a MarkovStructure.

    Returns
    -------
    DensityOperator: A validated state with zero conditional mutual information.
    """
    layout = as_layout(layout)
    if isinstance(structure, MarkovStructure):
        if (structure.d_a, structure.d_b, structure.d_c) != layout.dims:
            raise DimensionError(
                f"structure dimensions {(structure.d_a, structure.d_b, structure.d_c)} "
                f"do not match layout {layout.dims}"
            )
        return assemble_qmc(structure)
    assert rng is not None, "random_qmc needs a generator unless given a MarkovStructure"
    return assemble_qmc(draw_markov_structure(layout, structure, rng))


def random_markov_chain(
    dims: Sequence[int],
    rng: np.random.Generator,
    specs: Sequence[BlockSpec] | None = None,
) -> DensityOperator:
    """
    Exact m-partite Markov chain 1 - 2 - ... - m.

    Every middle system i carries a block decomposition ⊕_k L_k ⊗ R_k. The block
    labels follow a classical Markov chain, and neighbouring systems share one
    factor per pair of labels living on R_{k_i} ⊗ L_{k_{i+1}}. Conditioning on a
    middle system therefore decouples its left and right sides.

    Parameters
    ----------
    dims: Sequence[int]
        d_1..d_m with m >= 3.
    rng: np.random.Generator
        Seeded generator.
    specs: Sequence[BlockSpec], optional
        Block specs of the m-2 middle systems. Drawn when None.

    Returns
    -------
    DensityOperator: A validated state on dims.
    """
    dims = tuple(int(d) for d in dims)
    m = len(dims)
    if m < 3:
        raise DimensionError(f"a Markov chain needs at least 3 subsystems, got {m}")
    middles = list(range(1, m - 1))
    if specs is None:
        specs = [random_block_spec(dims[i], rng) for i in middles]
    specs = list(specs)
    if len(specs) != len(middles):
        raise DimensionError(f"expected {len(middles)} block specs, got {len(specs)}")
    for i, spec in zip(middles, specs):
        if spec.d_b != dims[i]:
            raise DimensionError(
                f"block spec covers dimension {spec.d_b} but subsystem {i} has {dims[i]}",
                subsystem=i,
            )

    n_labels = [len(s.splits) for s in specs]
    first = np.asarray(specs[0].weights or rng.dirichlet(np.ones(n_labels[0])))
    transitions = [
        rng.dirichlet(np.ones(n_labels[j + 1]), size=n_labels[j])
        for j in range(len(specs) - 1)
    ]

    def draw(d_left: int, d_right: int) -> np.ndarray:
        return random_density(d_left * d_right, None, rng).matrix

    head = [draw(dims[0], l) for l, _ in specs[0].splits]
    bonds = [
        [[draw(r, l2) for l2, _ in specs[j + 1].splits] for _, r in specs[j].splits]
        for j in range(len(specs) - 1)
    ]
    tail = [draw(r, dims[-1]) for _, r in specs[-1].splits]

    offsets = [s.offsets() for s in specs]
    total = math.prod(dims)
    rho = np.zeros((total, total), dtype=np.complex128)
    for labels in itertools.product(*(range(n) for n in n_labels)):
        p = first[labels[0]]
        for j, t in enumerate(transitions):
            p *= t[labels[j], labels[j + 1]]
        factors = [head[labels[0]]]
        factors += [bonds[j][labels[j]][labels[j + 1]] for j in range(len(bonds))]
        factors.append(tail[labels[-1]])
        w = kron_all(
            identity(dims[0]),
            *(
                _embedding(offsets[j][k], math.prod(specs[j].splits[k]), dims[i])
                for j, (i, k) in enumerate(zip(middles, labels))
            ),
            identity(dims[-1]),
        )
        rho += p * (w @ kron_all(*factors) @ w.T)
    return validate_density(hermitize(rho), dims)


def product_state(*states: DensityOperator) -> DensityOperator:
    result = states[0]
    for s in states[1:]:
        result = result.tensor(s)
    return result


def ghz_state(dims: Sequence[int]) -> DensityOperator:
    """(|0...0> + |1...1>)/sqrt(2) on subsystems of dimension >= 2."""
    layout = as_layout(dims)
    if min(layout.dims) < 2:
        raise DimensionError("a GHZ state needs every subsystem of dimension >= 2")
    psi = np.zeros(layout.total, dtype=np.complex128)
    psi[0] = 1.0
    ones = sum(math.prod(layout.dims[i + 1 :]) for i in range(len(layout)))
    psi[ones] = 1.0
    psi /= np.sqrt(2)
    return DensityOperator(np.outer(psi, psi.conj()), layout)


def embed_with_max_mixed(
    rho: DensityOperator, side: Literal["left", "right"], d: int
) -> DensityOperator:
    """rho ⊗ I_d/d (side="right") or I_d/d ⊗ rho (side="left")."""
    mixed = DensityOperator(identity(d) / d, SystemLayout((d,)))
    if side == "right":
        return rho.tensor(mixed)
    if side == "left":
        return mixed.tensor(rho)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def discrepancy(kind: TargetKind) -> Callable[[np.ndarray, np.ndarray], float]:
    """Infidelity 1 - F or the full trace norm, without validation."""
    if kind == "infidelity":
        return lambda a, b: 1.0 - fidelity(a, b, validate=False)
    if kind == "trace":
        return trace_distance
    raise ValueError(f"unknown discrepancy kind {kind!r}")


def bisect_mixture(
    path: Callable[[float], np.ndarray],
    measure: Callable[[np.ndarray], float],
    target: float,
) -> tuple[float, np.ndarray, float] | None:
    """
    Finds t in (0, 1] with measure(path(t)) within PERTURB_REL_TOL of target.

    The search runs on measured values. measure(path(0)) is assumed to be below
    target. Returns (t, path(t), measured) or None if measure(path(1)) < target.
    """
    hi, x_hi = 1.0, path(1.0)
    f_hi = measure(x_hi)
    if f_hi < target:
        return None
    lo = 0.0
    for _ in range(PERTURB_MAX_ITER):
        if f_hi - target <= PERTURB_REL_TOL * target or hi - lo < 1e-16:
            break
        mid = (lo + hi) / 2
        x_mid = path(mid)
        f_mid = measure(x_mid)
        if f_mid >= target:
            hi, x_hi, f_hi = mid, x_mid, f_mid
        else:
            lo = mid
    return hi, x_hi, f_hi


def perturb_away(
    rho: DensityOperator,
    kind: TargetKind,
    target: float,
    rng: np.random.Generator,
    mixer: DensityOperator | None = None,
) -> DensityOperator:
    """
    Moves rho along (1 - t) rho + t W until the discrepancy reaches target.

    Parameters
    ----------
    rho: DensityOperator
        Starting state.
    kind: str
        "infidelity" for 1 - F, "trace" for the full trace norm.
    target: float
        Requested discrepancy. Zero returns rho itself.
    rng: np.random.Generator
        Draws the mixing states W.
    mixer: DensityOperator, optional
        First mixing state to try. Later brackets use random full-rank states,
        then random pure states.

    Returns
    -------
    DensityOperator: A state at the requested discrepancy within relative 1e-7.
    """
    if target < 0:
        raise InfeasibleTargetError(f"target must be >= 0, got {target}")
    if target == 0:
        return rho
    measure = discrepancy(kind)
    base = rho.matrix
    d = rho.dim
    for attempt in range(PERTURB_MAX_BRACKETS):
        if attempt == 0 and mixer is not None:
            w = mixer.matrix
        elif attempt < PERTURB_MAX_BRACKETS // 2:
            w = random_density(d, None, rng).matrix
        else:
            w = random_pure(d, rng).matrix
        found = bisect_mixture(
            lambda t: hermitize((1 - t) * base + t * w),
            lambda x: measure(base, x),
            target,
        )
        if found is not None:
            return DensityOperator(found[1], rho.layout)
        logger.info(f"Mixing state {attempt} cannot reach {kind} {target}; redrawing")
    raise InfeasibleTargetError(
        f"no mixing path reached {kind} {target} after {PERTURB_MAX_BRACKETS} brackets"
    )


def perturb_markov_structure(
    structure: MarkovStructure,
    target: float,
    rng: np.random.Generator,
    kind: TargetKind = "infidelity",
) -> tuple[MarkovStructure, DensityOperator]:
    """
    Moves every factor of a Markov structure along a mixing path so the assembled
    chain sits at the requested discrepancy from the original. Block weights and
    splits are kept, so the result is again an exact Markov chain.

    Returns
    -------
    tuple[MarkovStructure, DensityOperator]: The perturbed structure and its state.
    """
    original = assemble_qmc(structure).matrix
    measure = discrepancy(kind)
    for attempt in range(PERTURB_MAX_BRACKETS):
        mixers = [
            (
                random_density(b.left.dim, None, rng).matrix,
                random_density(b.right.dim, None, rng).matrix,
            )
            for b in structure.blocks
        ]

        def moved(t: float) -> MarkovStructure:
            return MarkovStructure(
                tuple(
                    MarkovBlock(
                        b.weight,
                        DensityOperator(
                            hermitize((1 - t) * b.left.matrix + t * wl), b.left.layout
                        ),
                        DensityOperator(
                            hermitize((1 - t) * b.right.matrix + t * wr), b.right.layout
                        ),
                    )
                    for b, (wl, wr) in zip(structure.blocks, mixers)
                )
            )

        found = bisect_mixture(
            lambda t: assemble_qmc(moved(t)).matrix,
            lambda x: measure(original, x),
            target,
        )
        if found is not None:
            perturbed = moved(found[0])
            return perturbed, assemble_qmc(perturbed)
        logger.info(f"Factor mixers {attempt} cannot reach {kind} {target}; redrawing")
    raise InfeasibleTargetError(
        f"no factor mixing reached {kind} {target} after {PERTURB_MAX_BRACKETS} brackets"
    )
