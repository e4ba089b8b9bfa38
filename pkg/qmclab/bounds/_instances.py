"""Random instance drawing and input bookkeeping shared by the bound evaluators."""

import math
from typing import Any

import numpy as np

from qmclab.config import MARGINAL_CONSISTENCY_TOL, TRACE_TOL
from qmclab.errors import DegenerateInputError, DimensionError
from qmclab.linalg import (
    ComplexMatrix,
    SystemLayout,
    as_matrix,
    hermitize,
    identity,
    partial_trace,
    schatten_norm,
    support_projector,
    trace_distance,
)
from qmclab.states import (
    DensityOperator,
    assemble_qmc,
    draw_markov_structure,
    random_block_spec,
    random_density,
)

TRIPARTITE_MODES = ("independent", "global", "close", "qmc")


def state_rank(rank: int | None, d: int, d_kept: int = 1) -> int | None:
    """
    Rank to draw a state on d dimensions with, raised so that its marginal on
    d_kept dimensions is generically full rank.
    """
    if rank is None:
        return None
    return min(d, max(int(rank), math.ceil(d_kept * d_kept / d)))


def random_state(
    dims: tuple[int, ...],
    rng: np.random.Generator,
    rank: int | None = None,
    d_kept: int = 1,
) -> DensityOperator:
    d = math.prod(dims)
    rho = random_density(d, state_rank(rank, d, d_kept), rng)
    return DensityOperator(rho.matrix, SystemLayout(tuple(dims)))


def closeness(rng: np.random.Generator) -> float:
    """Log-uniform mixing weight in [1e-4, 1]."""
    return float(10 ** rng.uniform(-4, 0))


def mix(rho: DensityOperator, rng: np.random.Generator, t: float) -> DensityOperator:
    """(1 - t) rho + t W with W a random full-rank state."""
    w = random_density(rho.dim, None, rng).matrix
    return DensityOperator(hermitize((1 - t) * rho.matrix + t * w), rho.layout)


def as_array(x: Any) -> ComplexMatrix:
    return x.matrix if isinstance(x, DensityOperator) else as_matrix(x)


def ginibre(
    rows: int, cols: int, rng: np.random.Generator, rank: int | None = None
) -> ComplexMatrix:
    """Complex Gaussian matrix, of the given rank when rank is set."""

    def draw(r: int, c: int) -> ComplexMatrix:
        return (rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c))) / np.sqrt(2)

    if rank is None or rank >= min(rows, cols):
        return draw(rows, cols)
    return draw(rows, int(rank)) @ draw(int(rank), cols)


def ginibre_pair(
    d: int, rng: np.random.Generator, rank: int | None = None
) -> tuple[ComplexMatrix, ComplexMatrix]:
    """Two d x d Gaussian matrices; half of the draws put y close to x."""
    x = ginibre(d, d, rng, rank)
    if rng.random() < 0.5:
        y = x + closeness(rng) * ginibre(d, d, rng, rank)
    else:
        y = ginibre(d, d, rng, rank)
    return x, y


def normalized(x: ComplexMatrix, p: float = 2) -> tuple[ComplexMatrix, float]:
    """x / ||x||_p and the original norm."""
    norm = schatten_norm(x, p)
    if norm == 0.0:
        raise DegenerateInputError("cannot normalize the zero matrix")
    return x / norm, norm


def draw_tripartite(
    layout: SystemLayout,
    rng: np.random.Generator,
    rank: int | None = None,
    mode: str | None = None,
) -> dict[str, Any]:
    """
    Draws the data behind a (rho_AB, sigma_AB, rho_BC, sigma_BC) instance.

    Modes are "independent" (four unrelated states), "global" (marginals of two
    unrelated tripartite states), "close" (sigma a small mixture away from rho)
    and "qmc" (two Markov chains sharing a block spec). Every mode keeps the
    B marginals the evaluators invert generically full rank.
    """
    if len(layout) != 3:
        raise DimensionError(f"expected a tripartite layout, got {layout.dims}")
    d_a, d_b, d_c = layout.dims
    if mode is None:
        mode = TRIPARTITE_MODES[rng.integers(len(TRIPARTITE_MODES))]
    if mode == "independent":
        return {
            "rho_ab": random_state((d_a, d_b), rng, rank, d_b),
            "sig_ab": random_state((d_a, d_b), rng, rank),
            "rho_bc": random_state((d_b, d_c), rng, rank),
            "sig_bc": random_state((d_b, d_c), rng, rank, d_b),
        }
    if mode in ("global", "close"):
        rho = random_state(layout.dims, rng, rank, d_b)
        if mode == "global":
            sig = random_state(layout.dims, rng, rank, d_b)
        else:
            sig = mix(rho, rng, closeness(rng))
        return {"rho_abc": rho, "sig_abc": sig}
    if mode == "qmc":
        spec = random_block_spec(d_b, rng)
        rho = assemble_qmc(draw_markov_structure(layout, spec, rng))
        sig = assemble_qmc(draw_markov_structure(layout, spec, rng))
        return {"rho_abc": rho, "sig_abc": sig}
    raise ValueError(f"unknown instance mode {mode!r}")


def tripartite_inputs(drawn: dict[str, Any]) -> dict[str, Any]:
    """Maps drawn data to rho_ab, sig_ab, rho_bc, sig_bc keyword arguments."""
    if "rho_abc" not in drawn:
        return dict(drawn)
    rho, sig = drawn["rho_abc"], drawn["sig_abc"]
    return {
        "rho_ab": rho.marginal([0, 1]),
        "sig_ab": sig.marginal([0, 1]),
        "rho_bc": rho.marginal([1, 2]),
        "sig_bc": sig.marginal([1, 2]),
    }


def check_marginal_layouts(
    rho_ab: DensityOperator,
    sig_ab: DensityOperator,
    rho_bc: DensityOperator,
    sig_bc: DensityOperator,
) -> tuple[int, int, int]:
    for name, x in (("rho_ab", rho_ab), ("sig_ab", sig_ab), ("rho_bc", rho_bc), ("sig_bc", sig_bc)):
        if len(x.layout) != 2:
            raise DimensionError(f"{name} must be bipartite, got layout {x.dims}")
    if rho_ab.dims != sig_ab.dims:
        raise DimensionError(f"rho_ab has layout {rho_ab.dims}, sig_ab has {sig_ab.dims}")
    if rho_bc.dims != sig_bc.dims:
        raise DimensionError(f"rho_bc has layout {rho_bc.dims}, sig_bc has {sig_bc.dims}")
    d_a, d_b = rho_ab.dims
    if rho_bc.dims[0] != d_b:
        raise DimensionError(
            f"d_B mismatch: AB marginals have {d_b}, BC marginals have {rho_bc.dims[0]}",
            subsystem=1,
        )
    return d_a, d_b, rho_bc.dims[1]


def b_marginals(
    rho_ab: DensityOperator, sig_bc: DensityOperator
) -> tuple[ComplexMatrix, ComplexMatrix]:
    """rho_B = tr_A rho_AB and sigma_B = tr_C sigma_BC."""
    return (
        partial_trace(rho_ab.matrix, rho_ab.layout, [0]),
        partial_trace(sig_bc.matrix, sig_bc.layout, [1]),
    )


def leakage(x: ComplexMatrix, reference: ComplexMatrix) -> float:
    """Weight of x outside the support of reference."""
    proj = support_projector(reference)
    return float(np.trace((identity(len(proj)) - proj) @ x).real)


def marginal_tags(
    rho_ab: DensityOperator,
    sig_ab: DensityOperator,
    rho_bc: DensityOperator,
    sig_bc: DensityOperator,
) -> list[str]:
    """
    "support-mismatch" when a B marginal fed to an inverse square root leaves
    weight outside its partner's support; "inconsistent-marginals" when the two
    B marginals of rho or of sigma disagree.
    """
    tags = []
    rho_b, sig_b = b_marginals(rho_ab, sig_bc)
    rho_b_other = partial_trace(rho_bc.matrix, rho_bc.layout, [1])
    sig_b_other = partial_trace(sig_ab.matrix, sig_ab.layout, [0])
    leaks = (
        leakage(rho_b_other, rho_b),
        leakage(sig_b_other, sig_b),
        leakage(rho_b, sig_b),
        leakage(sig_b, rho_b),
    )
    if max(leaks) > TRACE_TOL:
        tags.append("support-mismatch")
    if (
        trace_distance(rho_b, rho_b_other) > MARGINAL_CONSISTENCY_TOL
        or trace_distance(sig_b, sig_b_other) > MARGINAL_CONSISTENCY_TOL
    ):
        tags.append("inconsistent-marginals")
    return tags


def layouts_of(*states: DensityOperator) -> list[tuple[int, ...]]:
    return [s.dims for s in states]
