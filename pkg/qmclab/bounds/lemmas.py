import math
from typing import Any

import numpy as np

from qmclab.base import BoundCheck, BoundReport
from qmclab.bounds._instances import (
    as_array,
    b_marginals,
    check_marginal_layouts,
    draw_tripartite,
    ginibre,
    ginibre_pair,
    marginal_tags,
    normalized,
    random_state,
    tripartite_inputs,
)
from qmclab.errors import DimensionError, InvalidExponentError
from qmclab.linalg import (
    ComplexMatrix,
    SystemLayout,
    check_density_matrix,
    fidelity,
    herm_sqrt,
    identity,
    kron,
    partial_trace,
    psd_spectrum,
    schatten_norm,
    sqrt_overlap,
)
from qmclab.petz import petz_factor
from qmclab.states import DensityOperator, as_layout

SCHATTEN_EXPONENTS = (1.0, 1.5, 2.0, 4.0)


def _sqrt_gap(x: ComplexMatrix, y: ComplexMatrix, p: float = 2) -> float:
    """||x^{1/2} - y^{1/2}||_p"""
    return schatten_norm(herm_sqrt(x) - herm_sqrt(y), p)


class _TripartiteBound(BoundCheck):
    """
    Evaluators over (rho_AB, sigma_AB, rho_BC, sigma_BC) with rho_B = tr_A rho_AB and
    sigma_B = tr_C sigma_BC.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        assert (
            self.__class__ is not _TripartiteBound
        ), "_TripartiteBound is a base class and should not be instantiated directly"

    def draw(self, layout: SystemLayout, rng: np.random.Generator, rank: int | None = None):
        return draw_tripartite(layout, rng, rank)

    def inputs(self, drawn: dict[str, Any]) -> dict[str, Any]:
        return tripartite_inputs(drawn)

    def _arrays(self, rho_ab, sig_ab, rho_bc, sig_bc) -> list[np.ndarray]:
        return [rho_ab.matrix, sig_ab.matrix, rho_bc.matrix, sig_bc.matrix]

    def _dims(self, rho_ab, sig_ab, rho_bc, sig_bc) -> list[tuple[int, ...]]:
        return [rho_ab.dims, sig_ab.dims, rho_bc.dims, sig_bc.dims]


class CoreL2(_TripartiteBound):
    """
    ||T_rho - T_sigma||_2 <= ||rho_AB^{1/2} - sigma_AB^{1/2}||_2
    + ||rho_BC^{1/2} - sigma_BC^{1/2}||_2 + ||rho_B^{1/2} - sigma_B^{1/2}||_2,
    where T is the factor of the recovery from petz_factor.
    """

    bound_name = "core_l2"
    rhs_terms = ("term_ab", "term_bc", "term_b")

    def evaluate(
        self,
        rho_ab: DensityOperator,
        sig_ab: DensityOperator,
        rho_bc: DensityOperator,
        sig_bc: DensityOperator,
    ) -> BoundReport:
        check_marginal_layouts(rho_ab, sig_ab, rho_bc, sig_bc)
        rho_b, sig_b = b_marginals(rho_ab, sig_bc)
        t_rho = petz_factor(rho_ab, rho_bc, marginal="ab")
        t_sig = petz_factor(sig_ab, sig_bc, marginal="bc")
        terms = {
            "term_ab": _sqrt_gap(rho_ab.matrix, sig_ab.matrix),
            "term_bc": _sqrt_gap(rho_bc.matrix, sig_bc.matrix),
            "term_b": _sqrt_gap(rho_b, sig_b),
        }
        lhs = schatten_norm(t_rho - t_sig, 2)
        rhs = sum(terms[k] for k in self.rhs_terms)
        return self.report(
            lhs,
            rhs,
            arrays=self._arrays(rho_ab, sig_ab, rho_bc, sig_bc),
            dims=self._dims(rho_ab, sig_ab, rho_bc, sig_bc),
            aux=terms,
            tags=marginal_tags(rho_ab, sig_ab, rho_bc, sig_bc),
        )


class CoreL2Simplified(CoreL2):
    """The two-term form with sigma_AB = rho_AB."""

    bound_name = "core_l2_simplified"
    rhs_terms = ("term_bc", "term_b")

    def inputs(self, drawn: dict[str, Any]) -> dict[str, Any]:
        kwargs = tripartite_inputs(drawn)
        kwargs["sig_ab"] = kwargs["rho_ab"]
        return kwargs


class InfidelitySqrt(BoundCheck):
    """sqrt(2) sqrt(1 - F) <= ||rho^{1/2} - sigma^{1/2}||_2 <= 2 sqrt(1 - F)"""

    bound_name = "infidelity_sqrt"

    def draw(self, layout, rng, rank=None):
        return {
            "rho": random_state((layout.total,), rng, rank),
            "sigma": random_state((layout.total,), rng, rank),
        }

    def evaluate(self, rho, sigma) -> BoundReport:
        rho = check_density_matrix(as_array(rho))
        sigma = check_density_matrix(as_array(sigma))
        f = fidelity(rho, sigma, validate=False)
        root = math.sqrt(max(1.0 - f, 0.0))
        middle = _sqrt_gap(rho, sigma)
        return self.binding(
            {
                "lower": (math.sqrt(2) * root, middle),
                "upper": (middle, 2 * root),
            },
            arrays=[rho, sigma],
            dims=[rho.shape[:1], sigma.shape[:1]],
            aux={"fidelity": f, "sqrt_gap": middle},
        )


class GramFidelity(BoundCheck):
    """F(x†x, y†y) >= 1 - ||x - y||_2^2 / 2 for ||x||_2 = ||y||_2 = 1"""

    bound_name = "gram_fidelity"

    def draw(self, layout, rng, rank=None):
        x, y = ginibre_pair(layout.total, rng, rank)
        return {"x": x, "y": y}

    def evaluate(self, x, y) -> BoundReport:
        x, x_norm = normalized(as_array(x))
        y, y_norm = normalized(as_array(y))
        if x.shape != y.shape:
            raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")
        f = fidelity(x.conj().T @ x, y.conj().T @ y, validate=False)
        gap = schatten_norm(x - y, 2)
        return self.report(
            1.0 - f,
            gap**2 / 2,
            arrays=[x, y],
            dims=[x.shape, y.shape],
            aux={"fidelity": f, "x_norm": x_norm, "y_norm": y_norm},
        )


class PowersStormer(BoundCheck):
    """
    ||p^{1/2} - q^{1/2}||_2^2 <= ||p - q||_1 <= 2 ||p^{1/2} - q^{1/2}||_2.

    The lower half holds for any PSD pair. The upper half only enters the slack
    when both inputs have unit trace; otherwise the report is tagged
    "non-unit-trace" and the upper slack is kept in aux alone.
    """

    bound_name = "powers_stormer"

    def draw(self, layout, rng, rank=None):
        return {
            "p": random_state((layout.total,), rng, rank),
            "q": random_state((layout.total,), rng, rank),
        }

    def evaluate(self, p, q) -> BoundReport:
        p, q = as_array(p), as_array(q)
        if p.shape != q.shape:
            raise DimensionError(f"shape mismatch: {p.shape} vs {q.shape}")
        # Raises NotPSDError on genuinely negative inputs.
        psd_spectrum(p)
        psd_spectrum(q)
        gap = _sqrt_gap(p, q)
        l1 = schatten_norm(p - q, 1)
        unit = all(abs(float(np.trace(m).real) - 1.0) <= self.tolerance for m in (p, q))
        pairs = {"lower": (gap**2, l1)}
        aux = {"sqrt_gap": gap, "trace_norm": l1, "upper_slack": 2 * gap - l1}
        kwargs = dict(arrays=[p, q], dims=[p.shape[:1], q.shape[:1]])
        if unit:
            pairs["upper"] = (l1, 2 * gap)
            return self.binding(pairs, aux=aux, **kwargs)
        return self.binding(pairs, aux=aux, tags=["non-unit-trace"], **kwargs)


class Schatten4To2(BoundCheck):
    """
    || |x| - |y| ||_{2p}^2 <= ||x†x - y†y||_p <= 2 ||x - y||_{2p}
    for ||x||_{2p} = ||y||_{2p} = 1.
    """

    bound_name = "schatten_4to2"

    def draw(self, layout, rng, rank=None):
        x, y = ginibre_pair(layout.total, rng, rank)
        return {"x": x, "y": y, "p": float(rng.choice(SCHATTEN_EXPONENTS))}

    def evaluate(self, x, y, p: float = 2.0) -> BoundReport:
        if not p >= 1:
            raise InvalidExponentError(f"exponent p must be >= 1, got {p}")
        x, x_norm = normalized(as_array(x), 2 * p)
        y, y_norm = normalized(as_array(y), 2 * p)
        if x.shape != y.shape:
            raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")
        gram_x, gram_y = x.conj().T @ x, y.conj().T @ y
        abs_gap = schatten_norm(herm_sqrt(gram_x) - herm_sqrt(gram_y), 2 * p)
        middle = schatten_norm(gram_x - gram_y, p)
        return self.binding(
            {
                "lower": (abs_gap**2, middle),
                "upper": (middle, 2 * schatten_norm(x - y, 2 * p)),
            },
            arrays=[x, y],
            dims=[x.shape, y.shape],
            aux={"p": p, "x_norm": x_norm, "y_norm": y_norm},
        )


class NormRelations(BoundCheck):
    """
    Relations between fidelity, trace distance and Hilbert-Schmidt distance of two
    states. The report carries the binding relation; every slack is in aux.
    """

    bound_name = "norm_relations"

    def draw(self, layout, rng, rank=None):
        return {
            "rho": random_state((layout.total,), rng, rank),
            "sigma": random_state((layout.total,), rng, rank),
        }

    def evaluate(self, rho, sigma) -> BoundReport:
        rho = check_density_matrix(as_array(rho))
        sigma = check_density_matrix(as_array(sigma))
        d = rho.shape[0]
        f = fidelity(rho, sigma, validate=False)
        delta = min(max(1.0 - f, 0.0), 1.0)
        l1 = schatten_norm(rho - sigma, 1)
        l2 = schatten_norm(rho - sigma, 2)
        overlap = sqrt_overlap(rho, sigma)
        half = l1 / 2
        return self.binding(
            {
                "infidelity_below_trace": (delta, half),
                "trace_below_root": (half, math.sqrt(2 * delta - delta**2)),
                "fidelity_plus_trace": (1.0, f + half),
                "fidelity_sq_plus_trace_sq": (1.0, f**2 + half**2),
                "overlap_above_fidelity_sq": (f**2, overlap),
                "overlap_below_fidelity": (overlap, f),
                "l2_below_l1": (l2, l1),
                "l1_below_scaled_l2": (l1, math.sqrt(d) * l2),
            },
            arrays=[rho, sigma],
            dims=[(d,), (d,)],
            aux={"fidelity": f, "trace_distance": l1, "hs_distance": l2, "overlap": overlap},
        )


class PartialTraceL2(BoundCheck):
    """||tr_A x||_2 <= d_A^{1/2} ||x||_2"""

    bound_name = "partial_trace_l2"

    def draw(self, layout, rng, rank=None):
        d_a = layout.dims[0]
        d_r = layout.total // d_a
        if rng.random() < 0.5:
            # Near the equality case I_A ⊗ y.
            x = kron(identity(d_a), ginibre(d_r, d_r, rng, rank))
            x = x + 1e-3 * ginibre(d_a * d_r, d_a * d_r, rng)
        else:
            x = ginibre(d_a * d_r, d_a * d_r, rng, rank)
        return {"x": x, "layout": SystemLayout((d_a, d_r)), "traced": 0}

    def evaluate(self, x, layout: SystemLayout, traced: int = 0) -> BoundReport:
        x = as_array(x)
        layout = as_layout(layout)
        if len(layout) != 2:
            raise DimensionError(f"expected a bipartite layout, got {layout.dims}")
        layout.check_index(traced)
        layout.check_square(x)
        reduced = partial_trace(x, layout, [traced])
        d_traced = layout.dims[traced]
        return self.report(
            schatten_norm(reduced, 2),
            math.sqrt(d_traced) * schatten_norm(x, 2),
            arrays=[x],
            dims=[layout.dims],
            aux={"d_traced": d_traced},
        )


def check_core_l2(rho_ab, sig_ab, rho_bc, sig_bc) -> BoundReport:
    return CoreL2().evaluate(rho_ab, sig_ab, rho_bc, sig_bc)


def check_infidelity_sqrt(rho, sigma) -> BoundReport:
    return InfidelitySqrt().evaluate(rho, sigma)


def check_gram_fidelity(x, y) -> BoundReport:
    return GramFidelity().evaluate(x, y)


def check_powers_stormer(p, q) -> BoundReport:
    return PowersStormer().evaluate(p, q)


def check_schatten_4to2(x, y, p: float = 2.0) -> BoundReport:
    return Schatten4To2().evaluate(x, y, p)


def check_norm_relations(rho, sigma) -> BoundReport:
    return NormRelations().evaluate(rho, sigma)


def check_partial_trace_l2(x, layout, traced: int = 0) -> BoundReport:
    return PartialTraceL2().evaluate(x, layout, traced)
