"""
Closed-form sample budgets.

Every formula takes the subsystem dimensions, a target (an infidelity delta or a
trace distance eps, as the formula name says) and a map of constants, and returns
the raw real-valued count together with intermediate values. sample_budget rounds
up. C defaults to 100, c and k to 1.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Mapping, Sequence

from qmclab.errors import ConfigError, DimensionError, UnknownFormulaError

__all__ = ["SampleBudget", "FORMULAS", "sample_budget", "chain_deltas"]

DEFAULT_CONSTANTS = {"C": 100.0, "c": 1.0, "k": 1.0}

FormulaResult = tuple[float, dict[str, float]]
Formula = Callable[[tuple[int, ...], float, Mapping[str, float]], FormulaResult]


@dataclass(frozen=True)
class SampleBudget:
    """
    Number of copies a protocol needs.

    Parameters
    ----------
    n: int
        Copies, at least 1.
    formula_name: str
        Registered formula.
    dims: tuple[int, ...]
        Dimensions the formula was evaluated at.
    target: float
        Infidelity or trace distance.
    constants: dict[str, float]
        Constants used, defaults included.
    aux: dict[str, float]
        Branches of min-expressions and per-marginal costs.
    """

    n: int
    formula_name: str
    dims: tuple[int, ...]
    target: float
    constants: dict[str, float] = field(default_factory=dict)
    aux: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "formula_name": self.formula_name,
            "dims": list(self.dims),
            "target": self.target,
            "constants": dict(sorted(self.constants.items())),
            "aux": dict(sorted(self.aux.items())),
        }


def _tripartite(dims: tuple[int, ...]) -> tuple[int, int, int]:
    if len(dims) != 3:
        raise DimensionError(f"formula needs dims (d_A, d_B, d_C), got {dims}")
    return dims


def _log_ratio(d: float, delta: float) -> float:
    # Targets above d make the logarithm negative; the count bottoms out at 1.
    return max(0.0, math.log(d / delta))


def _hhj(d: int, delta: float, k: float) -> float:
    return 100 * k * d**2 * _log_ratio(d, delta) / delta


def hhj_fidelity(dims, delta, const) -> FormulaResult:
    """100 k d^2 ln(d / delta) / delta copies for infidelity delta."""
    d = math.prod(dims)
    return _hhj(d, delta, const["k"]), {}


def ow16_trace(dims, eps, const) -> FormulaResult:
    return const["C"] * math.prod(dims) ** 2 / eps**2, {}


def bow17_certify_trace(dims, eps, const) -> FormulaResult:
    return const["C"] * math.prod(dims) / eps**2, {}


def bow17_certify_fidelity(dims, delta, const) -> FormulaResult:
    return const["C"] * math.prod(dims) / delta, {}


def bow17_l2(dims, eps, const) -> FormulaResult:
    """Distinguishes ||rho - sigma||_2 < 0.99 eps from > eps."""
    return const["C"] / eps**2, {}


def thm1_fidelity(dims, delta, const) -> FormulaResult:
    """Markov-chain tomography at infidelity delta, the smaller of two branches."""
    d_a, d_b, d_c = _tripartite(dims)
    base = const["C"] * (d_a**2 + d_c**2) * d_b**2
    log_branch = base * _log_ratio(d_a * d_b * d_c, delta) / delta
    poly_branch = base / delta**4
    return min(log_branch, poly_branch), {"log_branch": log_branch, "poly_branch": poly_branch}


def thm1_trace(dims, eps, const) -> FormulaResult:
    """thm1_fidelity at delta = eps^2 / 2."""
    value, aux = thm1_fidelity(dims, eps**2 / 2, const)
    return value, {**aux, "delta": eps**2 / 2}


def thm1_proof(dims, delta, const) -> FormulaResult:
    """Copies the tripartite tomography uses: both pair marginals at 0.01 delta."""
    d_a, d_b, d_c = _tripartite(dims)
    cost_ab = _hhj(d_a * d_b, 0.01 * delta, const["k"])
    cost_bc = _hhj(d_b * d_c, 0.01 * delta, const["k"])
    return cost_ab + cost_bc, {"cost_ab": cost_ab, "cost_bc": cost_bc}


def thm2_fidelity(dims, delta, const) -> FormulaResult:
    d_a, d_b, d_c = _tripartite(dims)
    return const["C"] * (d_a + d_c) * d_b / delta, {}


def thm2_trace(dims, eps, const) -> FormulaResult:
    d_a, d_b, d_c = _tripartite(dims)
    return const["C"] * (d_a + d_c) * d_b / eps**2, {}


def thm3_trace(dims, eps, const) -> FormulaResult:
    """Markov-chain testing, up to logarithmic factors."""
    d_a, d_b, d_c = _tripartite(dims)
    bc_branch = const["C"] * d_a * d_b**3 * d_c**3 / eps**2
    ab_branch = const["C"] * d_a**3 * d_b**3 * d_c / eps**2
    return min(bc_branch, ab_branch), {"bc_branch": bc_branch, "ab_branch": ab_branch}


def thm3_proof(dims, eps, const) -> FormulaResult:
    """
    Copies the tester uses: tomography of one pair marginal at
    eps^2 / (400 d_A d_B d_C) plus an l2 comparison resolving the 0.2 eps / sqrt(d)
    gap, for the cheaper orientation.
    """
    d_a, d_b, d_c = _tripartite(dims)
    d = d_a * d_b * d_c
    delta = eps**2 / (400 * d)
    l2 = bow17_l2(dims, 0.2 * eps / math.sqrt(d), const)[0]
    bc = _hhj(d_b * d_c, delta, const["k"]) + l2
    ab = _hhj(d_a * d_b, delta, const["k"]) + l2
    return min(bc, ab), {"bc_branch": bc, "ab_branch": ab, "delta": delta, "l2_cost": l2}


def thm4_fidelity(dims, delta, const) -> FormulaResult:
    """Chain tomography, C m^2 max_i d_i^2 d_{i+1}^2 / delta up to logarithms."""
    m = len(dims)
    if m < 3:
        raise DimensionError(f"chain formula needs at least 3 subsystems, got {m}")
    worst = max(dims[i] ** 2 * dims[i + 1] ** 2 for i in range(m - 1))
    return const["C"] * m**2 * worst / delta, {}


def thm4_proof(dims, delta, const) -> FormulaResult:
    """
    Copies the chain tomography uses with the uniform allocation. Pairs of one
    parity share copies, so each pass costs its most expensive pair; every
    estimate carries k = ln(100 m) for a per-pair failure probability 1/(100 m).
    """
    m = len(dims)
    deltas = chain_deltas(dims, delta)
    k = max(const["k"], math.log(100 * m))
    costs = [_hhj(dims[i] * dims[i + 1], deltas[i], k) for i in range(m - 1)]
    even = max((c for i, c in enumerate(costs) if (i + 1) % 2 == 0), default=0.0)
    odd = max((c for i, c in enumerate(costs) if (i + 1) % 2 == 1), default=0.0)
    return even + odd, {"even_pass": even, "odd_pass": odd, "delta_i": deltas[0]}


def thm1_lower_fidelity(dims, delta, const) -> FormulaResult:
    d_a, d_b, d_c = _tripartite(dims)
    return const["c"] * d_b**2 * (d_a**2 + d_c**2) / delta, {}


def thm1_lower_trace(dims, eps, const) -> FormulaResult:
    d_a, d_b, d_c = _tripartite(dims)
    return const["c"] * d_b**2 * (d_a**2 + d_c**2) / eps**2, {}


def thm2_lower_fidelity(dims, delta, const) -> FormulaResult:
    d_a, d_b, d_c = _tripartite(dims)
    return const["c"] * max(d_a, d_c) * d_b / delta, {}


def thm2_lower_trace(dims, eps, const) -> FormulaResult:
    d_a, d_b, d_c = _tripartite(dims)
    return const["c"] * max(d_a, d_c) * d_b / eps**2, {}


FORMULAS: dict[str, Formula] = {
    "hhj_fidelity": hhj_fidelity,
    "ow16_trace": ow16_trace,
    "bow17_certify_trace": bow17_certify_trace,
    "bow17_certify_fidelity": bow17_certify_fidelity,
    "bow17_l2": bow17_l2,
    "thm1_fidelity": thm1_fidelity,
    "thm1_trace": thm1_trace,
    "thm1_proof": thm1_proof,
    "thm2_fidelity": thm2_fidelity,
    "thm2_trace": thm2_trace,
    "thm3_trace": thm3_trace,
    "thm3_proof": thm3_proof,
    "thm4_fidelity": thm4_fidelity,
    "thm4_proof": thm4_proof,
    "thm1_lower_fidelity": thm1_lower_fidelity,
    "thm1_lower_trace": thm1_lower_trace,
    "thm2_lower_fidelity": thm2_lower_fidelity,
    "thm2_lower_trace": thm2_lower_trace,
}


def sample_budget(
    formula_name: str,
    dims: Sequence[int] | int,
    target: float,
    constants: Mapping[str, float] | None = None,
) -> SampleBudget:
    """
    Evaluates a named budget formula and rounds up.

    Parameters
    ----------
    formula_name: str
        One of FORMULAS.
    dims: Sequence[int] | int
        Subsystem dimensions; a single int is one system.
    target: float
        Positive infidelity or trace distance.
    constants: Mapping[str, float], optional
        Overrides of C, c and k.

    Returns
    -------
    SampleBudget: n = max(1, ceil(value)).
    """
    try:
        formula = FORMULAS[formula_name]
    except KeyError:
        raise UnknownFormulaError(
            f"unknown formula {formula_name!r}; known formulas: {', '.join(FORMULAS)}"
        )
    dims = (int(dims),) if isinstance(dims, int) else tuple(int(d) for d in dims)
    if not dims or min(dims) < 1:
        raise DimensionError(f"dimensions must be positive, got {dims}")
    if not target > 0:
        raise ConfigError("target", f"must be positive, got {target}")
    const = {**DEFAULT_CONSTANTS, **(constants or {})}
    value, aux = formula(dims, float(target), const)
    return SampleBudget(
        n=max(1, math.ceil(value)),
        formula_name=formula_name,
        dims=dims,
        target=float(target),
        constants=const,
        aux=aux,
    )


def chain_deltas(
    dims: Sequence[int],
    delta: float,
    allocation: Literal["uniform", "weighted"] = "uniform",
) -> list[float]:
    """
    Per-pair infidelity targets delta_1..delta_{m-1} of chain tomography, all with
    sum_i sqrt(delta_i) <= sqrt(delta) / (2 sqrt(2)).

    "uniform" gives delta / (8 m^2) to every pair. "weighted" gives
    delta_i proportional to (d_i d_{i+1})^{4/3}, scaled to meet the sum with
    equality, which moves accuracy away from the most expensive pairs.
    """
    m = len(dims)
    if m < 2:
        raise DimensionError(f"a chain needs at least 2 subsystems, got {m}")
    if allocation == "uniform":
        return [delta / (8 * m**2)] * (m - 1)
    if allocation == "weighted":
        weights = [(dims[i] * dims[i + 1]) ** (4 / 3) for i in range(m - 1)]
        scale = delta / (8 * sum(math.sqrt(w) for w in weights) ** 2)
        return [scale * w for w in weights]
    raise ValueError(f"allocation must be 'uniform' or 'weighted', got {allocation!r}")
