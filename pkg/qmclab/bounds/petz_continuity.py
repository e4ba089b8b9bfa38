"""
Continuity of the Petz recovery in its marginals.

Every tripartite evaluator here recovers rho with rho_B = tr_A rho_AB and sigma with
sigma_B = tr_C sigma_BC. The end-to-end inequality decides the slack; the steps it
is composed of are re-evaluated on the same instance and their slacks are stored
in aux as "<step>_slack".
"""

import math
from typing import Any

from qmclab.base import BoundCheck, BoundReport
from qmclab.bounds._instances import (
    b_marginals,
    check_marginal_layouts,
    closeness,
    marginal_tags,
    mix,
    random_state,
)
from qmclab.bounds.lemmas import _sqrt_gap, _TripartiteBound
from qmclab.channels import (
    QuantumChannel,
    channel_apply,
    extend_channel,
    random_channel,
)
from qmclab.errors import DimensionError, InvalidExponentError
from qmclab.linalg import (
    fidelity,
    hermitize,
    identity,
    kron,
    partial_trace,
    schatten_norm,
    trace_distance,
)
from qmclab.petz import general_petz, petz_factor, petz_reconstruct
from qmclab.states import DensityOperator

L2_EXPONENTS = (2.0, 3.0, math.inf)


def _recoveries(rho_ab, sig_ab, rho_bc, sig_bc):
    """Both recoveries and their factors under the mixed marginal convention."""
    rec_rho = petz_reconstruct(rho_ab, rho_bc, marginal="ab")
    rec_sig = petz_reconstruct(sig_ab, sig_bc, marginal="bc")
    t_rho = petz_factor(rho_ab, rho_bc, marginal="ab")
    t_sig = petz_factor(sig_ab, sig_bc, marginal="bc")
    return rec_rho.matrix, rec_sig.matrix, t_rho, t_sig


def _slacks(steps: dict[str, tuple[float, float]]) -> dict[str, float]:
    return {f"{name}_slack": rhs - lhs for name, (lhs, rhs) in steps.items()}


class PetzFidelity(_TripartiteBound):
    """
    F(Petz(rho), Petz(sigma)) >= 1 - 2 (delta_1^{1/2} + delta_2^{1/2} + delta_3^{1/2})^2
    with delta the infidelities of the AB, BC and B marginals. Reported as
    lhs = 1 - F and rhs = 2 (sum sqrt(delta))^2.
    """

    bound_name = "petz_fidelity"

    def evaluate(self, rho_ab, sig_ab, rho_bc, sig_bc) -> BoundReport:
        check_marginal_layouts(rho_ab, sig_ab, rho_bc, sig_bc)
        rho_b, sig_b = b_marginals(rho_ab, sig_bc)
        deltas = [
            max(1.0 - fidelity(rho_ab.matrix, sig_ab.matrix, validate=False), 0.0),
            max(1.0 - fidelity(rho_bc.matrix, sig_bc.matrix, validate=False), 0.0),
            max(1.0 - fidelity(rho_b, sig_b, validate=False), 0.0),
        ]
        roots = [math.sqrt(d) for d in deltas]
        rec_rho, rec_sig, t_rho, t_sig = _recoveries(rho_ab, sig_ab, rho_bc, sig_bc)
        infidelity = 1.0 - fidelity(rec_rho, rec_sig, validate=False)
        rhs = 2 * sum(roots) ** 2

        gaps = [
            _sqrt_gap(rho_ab.matrix, sig_ab.matrix),
            _sqrt_gap(rho_bc.matrix, sig_bc.matrix),
            _sqrt_gap(rho_b, sig_b),
        ]
        factor_gap = schatten_norm(t_rho - t_sig, 2)
        steps = {
            "sqrt_ab": (gaps[0], 2 * roots[0]),
            "sqrt_bc": (gaps[1], 2 * roots[1]),
            "sqrt_b": (gaps[2], 2 * roots[2]),
            "core": (factor_gap, sum(gaps)),
            "gram": (infidelity, factor_gap**2 / 2),
        }
        aux = {
            "delta_1": deltas[0],
            "delta_2": deltas[1],
            "delta_3": deltas[2],
            "fidelity": 1.0 - infidelity,
            "fidelity_floor": 1.0 - rhs,
            "factor_gap": factor_gap,
            **_slacks(steps),
        }
        return self.report(
            infidelity,
            rhs,
            arrays=self._arrays(rho_ab, sig_ab, rho_bc, sig_bc),
            dims=self._dims(rho_ab, sig_ab, rho_bc, sig_bc),
            aux=aux,
            tags=marginal_tags(rho_ab, sig_ab, rho_bc, sig_bc),
        )


class PetzTrace(_TripartiteBound):
    """
    ||Petz(rho) - Petz(sigma)||_1 <= 2 (eps_1^{1/2} + eps_2^{1/2} + eps_3^{1/2}) with
    eps the full trace norms of the AB, BC and B marginal differences.
    """

    bound_name = "petz_trace"

    def evaluate(self, rho_ab, sig_ab, rho_bc, sig_bc) -> BoundReport:
        check_marginal_layouts(rho_ab, sig_ab, rho_bc, sig_bc)
        rho_b, sig_b = b_marginals(rho_ab, sig_bc)
        eps = [
            trace_distance(rho_ab.matrix, sig_ab.matrix),
            trace_distance(rho_bc.matrix, sig_bc.matrix),
            trace_distance(rho_b, sig_b),
        ]
        roots = [math.sqrt(e) for e in eps]
        rec_rho, rec_sig, t_rho, t_sig = _recoveries(rho_ab, sig_ab, rho_bc, sig_bc)
        lhs = trace_distance(rec_rho, rec_sig)
        gaps = [
            _sqrt_gap(rho_ab.matrix, sig_ab.matrix),
            _sqrt_gap(rho_bc.matrix, sig_bc.matrix),
            _sqrt_gap(rho_b, sig_b),
        ]
        factor_gap = schatten_norm(t_rho - t_sig, 2)
        steps = {
            "sqrt_ab": (gaps[0], roots[0]),
            "sqrt_bc": (gaps[1], roots[1]),
            "sqrt_b": (gaps[2], roots[2]),
            "core": (factor_gap, sum(gaps)),
            "factor_to_trace": (lhs, 2 * factor_gap),
        }
        aux = {
            "eps_1": eps[0],
            "eps_2": eps[1],
            "eps_3": eps[2],
            "factor_gap": factor_gap,
            **_slacks(steps),
        }
        return self.report(
            lhs,
            2 * sum(roots),
            arrays=self._arrays(rho_ab, sig_ab, rho_bc, sig_bc),
            dims=self._dims(rho_ab, sig_ab, rho_bc, sig_bc),
            aux=aux,
            tags=marginal_tags(rho_ab, sig_ab, rho_bc, sig_bc),
        )


class PetzL2Dim(_TripartiteBound):
    """
    ||Petz(rho) - Petz(sigma)||_p <= 2 d_A^{1/2p'} ||sigma_BC^{1/2} - rho_BC^{1/2}||_{2p}
    + 2 (d_A d_C)^{1/2p'} ||sigma_B^{1/2} - rho_B^{1/2}||_{2p}
    + 2 d_C^{1/2p'} ||sigma_AB^{1/2} - rho_AB^{1/2}||_{2p}, with 1/p + 1/p' = 1.
    At p = 2 the exponents are 1/4 and the norms are Schatten-4.
    """

    bound_name = "petz_l2_dim"

    def draw(self, layout, rng, rank=None):
        drawn = super().draw(layout, rng, rank)
        drawn["p"] = float(rng.choice(L2_EXPONENTS))
        return drawn

    def inputs(self, drawn: dict[str, Any]) -> dict[str, Any]:
        kwargs = super().inputs({k: v for k, v in drawn.items() if k != "p"})
        kwargs["p"] = drawn.get("p", 2.0)
        return kwargs

    def evaluate(self, rho_ab, sig_ab, rho_bc, sig_bc, p: float = 2.0) -> BoundReport:
        if not p >= 1:
            raise InvalidExponentError(f"exponent p must be >= 1, got {p}")
        d_a, _, d_c = check_marginal_layouts(rho_ab, sig_ab, rho_bc, sig_bc)
        rho_b, sig_b = b_marginals(rho_ab, sig_bc)
        # 1 / (2 p') = (1 - 1/p) / 2
        exponent = (1.0 - 1.0 / p) / 2
        rec_rho, rec_sig, _, _ = _recoveries(rho_ab, sig_ab, rho_bc, sig_bc)
        terms = {
            "term_bc": 2 * d_a**exponent * _sqrt_gap(rho_bc.matrix, sig_bc.matrix, 2 * p),
            "term_b": 2 * (d_a * d_c) ** exponent * _sqrt_gap(rho_b, sig_b, 2 * p),
            "term_ab": 2 * d_c**exponent * _sqrt_gap(rho_ab.matrix, sig_ab.matrix, 2 * p),
        }
        return self.report(
            schatten_norm(rec_rho - rec_sig, p),
            sum(terms.values()),
            arrays=self._arrays(rho_ab, sig_ab, rho_bc, sig_bc),
            dims=self._dims(rho_ab, sig_ab, rho_bc, sig_bc),
            aux={"p": p if math.isfinite(p) else "inf", "exponent": exponent, **terms},
            tags=marginal_tags(rho_ab, sig_ab, rho_bc, sig_bc),
        )


class HalfMarginal(BoundCheck):
    """
    ||Petz(rho_AB, rho_BC) - Petz(rho_AB, sigma_BC)||_2 <= 8 delta^{1/2} with
    delta = 1 - F(rho_BC, sigma_BC). rho_AB and rho_BC must be marginals of one
    state; inconsistent inputs are evaluated and tagged.
    """

    bound_name = "half_marginal"

    def draw(self, layout, rng, rank=None):
        if len(layout) != 3:
            raise DimensionError(f"expected a tripartite layout, got {layout.dims}")
        rho = random_state(layout.dims, rng, rank, layout.dims[1])
        rho_bc = rho.marginal([1, 2])
        if rng.random() < 0.75:
            sig_bc = mix(rho_bc, rng, closeness(rng))
        else:
            sig_bc = random_state(rho_bc.dims, rng, rank, rho_bc.dims[0])
        return {"rho_abc": rho, "sig_bc": sig_bc}

    def inputs(self, drawn: dict[str, Any]) -> dict[str, Any]:
        rho = drawn["rho_abc"]
        return {
            "rho_ab": rho.marginal([0, 1]),
            "rho_bc": rho.marginal([1, 2]),
            "sig_bc": drawn["sig_bc"],
        }

    def evaluate(self, rho_ab, rho_bc, sig_bc) -> BoundReport:
        check_marginal_layouts(rho_ab, rho_ab, rho_bc, sig_bc)
        delta = max(1.0 - fidelity(rho_bc.matrix, sig_bc.matrix, validate=False), 0.0)
        exact = petz_reconstruct(rho_ab, rho_bc, marginal="ab").matrix
        moved = petz_reconstruct(rho_ab, sig_bc, marginal="bc").matrix
        tags = marginal_tags(rho_ab, rho_ab, rho_bc, sig_bc)
        return self.report(
            schatten_norm(exact - moved, 2),
            8 * math.sqrt(delta),
            arrays=[rho_ab.matrix, rho_bc.matrix, sig_bc.matrix],
            dims=[rho_ab.dims, rho_bc.dims, sig_bc.dims],
            aux={"delta": delta},
            tags=tags,
        )


class GeneralPetz(BoundCheck):
    """
    For a channel Phi: B -> B' applied as Phi ⊗ id_C, rho_B = tr_C rho_BC and
    sigma_B = tr_C sigma_source:

        ||R_rho((Phi ⊗ id)(rho_BC)) - R_sigma((Phi ⊗ id)(omega_BC))||_1
            <= 2 ||rho_B^{1/2} - sigma_B^{1/2}||_2
             + 2 ||Phi(rho_B)^{1/2} - Phi(sigma_B)^{1/2}||_2
             + 2 ||(Phi ⊗ id)(rho_BC)^{1/2} - (Phi ⊗ id)(omega_BC)^{1/2}||_2

    where R_x is the Petz recovery of Phi with reference state x_B, acting as
    R_x ⊗ id_C.
    """

    bound_name = "general_petz"

    def draw(self, layout, rng, rank=None):
        if len(layout) != 3:
            raise DimensionError(f"expected a tripartite layout, got {layout.dims}")
        d_out, d_b, d_c = layout.dims
        n_kraus = max(2, math.ceil(d_b / d_out))
        phi = random_channel(d_b, d_out, n_kraus, rng)
        rho_bc = random_state((d_b, d_c), rng, rank, d_b)
        if rng.random() < 0.5:
            sig_source = mix(rho_bc, rng, closeness(rng))
            omega_bc = mix(rho_bc, rng, closeness(rng))
        else:
            sig_source = random_state((d_b, d_c), rng, rank, d_b)
            omega_bc = random_state((d_b, d_c), rng, rank)
        return {
            "phi": phi,
            "rho_bc": rho_bc,
            "sig_source": sig_source,
            "omega_bc": omega_bc,
        }

    def evaluate(
        self,
        phi: QuantumChannel,
        rho_bc: DensityOperator,
        sig_source: DensityOperator,
        omega_bc: DensityOperator,
    ) -> BoundReport:
        for name, x in (("rho_bc", rho_bc), ("sig_source", sig_source), ("omega_bc", omega_bc)):
            if x.dims != rho_bc.dims or len(x.layout) != 2:
                raise DimensionError(
                    f"{name} has layout {x.dims}, expected a bipartite layout {rho_bc.dims}"
                )
        d_b, d_c = rho_bc.dims
        if phi.in_dim != d_b:
            raise DimensionError(
                f"channel input dimension {phi.in_dim} does not match d_B = {d_b}",
                subsystem=0,
            )
        rho_b = partial_trace(rho_bc.matrix, rho_bc.layout, [1])
        sig_b = partial_trace(sig_source.matrix, sig_source.layout, [1])
        extended = extend_channel(phi, right=d_c)
        out_rho = hermitize(channel_apply(extended, rho_bc.matrix))
        out_omega = hermitize(channel_apply(extended, omega_bc.matrix))
        out_sig = hermitize(channel_apply(extended, sig_source.matrix))
        phi_rho_b = hermitize(channel_apply(phi, rho_b))
        phi_sig_b = hermitize(channel_apply(phi, sig_b))

        # R_x ⊗ id_C is the recovery of Phi ⊗ id_C with reference x_B ⊗ I_C.
        spectator = identity(d_c)
        rec_rho = general_petz(extended, kron(rho_b, spectator), out_rho)
        rec_omega = general_petz(extended, kron(sig_b, spectator), out_omega)

        terms = {
            "term_input": 2 * _sqrt_gap(rho_b, sig_b),
            "term_output": 2 * _sqrt_gap(phi_rho_b, phi_sig_b),
            "term_joint": 2 * _sqrt_gap(out_rho, out_omega),
        }
        lhs = trace_distance(rec_rho, rec_omega)
        rhs = sum(terms.values())
        # Same right-hand side with the joint term read against sigma_BC.
        sigma_reading = (
            terms["term_input"] + terms["term_output"] + 2 * _sqrt_gap(out_sig, out_omega)
        )
        return self.report(
            lhs,
            rhs,
            arrays=[*phi.kraus, rho_bc.matrix, sig_source.matrix, omega_bc.matrix],
            dims=[(phi.out_dim, phi.in_dim), rho_bc.dims, sig_source.dims, omega_bc.dims],
            aux={
                **terms,
                "n_kraus": phi.n_kraus,
                "sigma_reading_slack": sigma_reading - lhs,
            },
        )

    def perturb(self, drawn, rng, scale):
        out = super().perturb(drawn, rng, scale)
        out["phi"] = drawn["phi"]
        return out


def check_petz_fidelity(rho_ab, sig_ab, rho_bc, sig_bc) -> BoundReport:
    return PetzFidelity().evaluate(rho_ab, sig_ab, rho_bc, sig_bc)


def check_petz_trace(rho_ab, sig_ab, rho_bc, sig_bc) -> BoundReport:
    return PetzTrace().evaluate(rho_ab, sig_ab, rho_bc, sig_bc)


def check_petz_l2_dim(rho_ab, sig_ab, rho_bc, sig_bc, p: float = 2.0) -> BoundReport:
    return PetzL2Dim().evaluate(rho_ab, sig_ab, rho_bc, sig_bc, p)


def check_half_marginal(rho_ab, rho_bc, sig_bc) -> BoundReport:
    return HalfMarginal().evaluate(rho_ab, rho_bc, sig_bc)


def check_general_petz(phi, rho_bc, sig_source, omega_bc) -> BoundReport:
    return GeneralPetz().evaluate(phi, rho_bc, sig_source, omega_bc)
