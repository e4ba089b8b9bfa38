"""
Tomography of quantum Markov chains from estimates of their nearest-neighbour
marginals.
"""

import logging
import math
from typing import Literal

import numpy as np

from qmclab.errors import DimensionError
from qmclab.io import content_digest
from qmclab.linalg import fidelity, trace_distance, trace_distance_half
from qmclab.petz import chain_reconstruct, pair_marginals, petz_distance, petz_reconstruct
from qmclab.protocols.budget import chain_deltas, sample_budget
from qmclab.protocols.oracle import EstimationOracleConfig, oracle_estimate_detailed
from qmclab.protocols.transcript import Guarantee, OracleCall, ProtocolTranscript
from qmclab.states import DensityOperator

__all__ = ["tomo_tripartite", "tomo_multipartite"]

logger = logging.getLogger(__name__)

TomographyRoute = Literal["fidelity", "fidelity-eps", "trace"]

# Marginal estimates are taken at this fraction of the overall target.
MARGINAL_FRACTION = 0.01
# Infidelity of the output is at most this multiple of delta.
FIDELITY_FACTOR = 0.18
# Trace-route claim: half trace norm at most this multiple of eps.
TRACE_ROUTE_FACTOR = 0.6


def _route_targets(
    route: TomographyRoute, delta: float | None, eps: float | None
) -> tuple[str, float, float]:
    """Returns (oracle mode, oracle target, headline target) of a route."""
    if route == "fidelity":
        if delta is None or not 0 < delta < 1:
            raise ValueError(f"route 'fidelity' needs delta in (0, 1), got {delta}")
        return "infidelity", MARGINAL_FRACTION * delta, delta
    if eps is None or not eps > 0:
        raise ValueError(f"route {route!r} needs a positive eps, got {eps}")
    if route == "fidelity-eps":
        return "infidelity", MARGINAL_FRACTION * eps**2 / 2, eps
    if route == "trace":
        return "trace", MARGINAL_FRACTION * eps**2, eps
    raise ValueError(f"unknown tomography route {route!r}")


def tomo_tripartite(
    rho_abc: DensityOperator,
    delta: float | None,
    rng: np.random.Generator,
    route: TomographyRoute = "fidelity",
    eps: float | None = None,
    stress: bool = True,
    failure_prob: float = 0.0,
    seed: int | None = None,
) -> ProtocolTranscript:
    """
    Learns a tripartite Markov chain from estimates of rho_AB and rho_BC.

    Parameters
    ----------
    rho_abc: DensityOperator
        The true state, expected to be (close to) a quantum Markov chain.
    delta: float | None
        Infidelity target of route "fidelity".
    rng: np.random.Generator
        Drives the oracle.
    route: str, optional
        "fidelity": marginals at infidelity 0.01 delta, claim F >= 1 - 0.18 delta.
        "fidelity-eps": the same at delta = eps^2 / 2, claim half trace norm <= eps.
        "trace": marginals at trace distance 0.01 eps^2, claim half trace norm
        <= 0.6 eps. Defaults to "fidelity".
    eps: float, optional
        Trace-distance target of the two eps routes.
    stress: bool, optional
        Oracle discrepancies near their maximum. Defaults to True.
    failure_prob: float, optional
        Injected failure rate per oracle call. Defaults to 0.
    seed: int, optional
        Recorded in the transcript.

    Returns
    -------
    ProtocolTranscript: Output digest and the measured guarantee.
    """
    if len(rho_abc.layout) != 3:
        raise DimensionError(f"expected a tripartite state, got layout {rho_abc.dims}")
    mode, oracle_target, target = _route_targets(route, delta, eps)
    cfg = EstimationOracleConfig(mode, oracle_target, failure_prob, stress)

    calls = []
    estimates = []
    for name, keep in (("AB", [0, 1]), ("BC", [1, 2])):
        est = oracle_estimate_detailed(rho_abc.marginal(keep), cfg, rng)
        calls.append(OracleCall(name, mode, oracle_target, est.discrepancy, est.failed))
        estimates.append(est.state)
    output = petz_reconstruct(*estimates, marginal="bc")
    injected = any(c.failed for c in calls)

    f = fidelity(rho_abc.matrix, output.matrix, validate=False)
    half_trace = trace_distance_half(rho_abc.matrix, output.matrix)
    if route == "fidelity":
        guarantee = Guarantee.at_least(
            "F(rho, output) >= 1 - 0.18 delta", 1 - FIDELITY_FACTOR * delta, f, not injected
        )
        budget = sample_budget("thm1_fidelity", rho_abc.dims, delta)
        proof = sample_budget("thm1_proof", rho_abc.dims, delta)
    else:
        factor = 1.0 if route == "fidelity-eps" else TRACE_ROUTE_FACTOR
        guarantee = Guarantee.at_most(
            f"(1/2)||rho - output||_1 <= {factor:g} eps", factor * eps, half_trace, not injected
        )
        budget = sample_budget("thm1_trace", rho_abc.dims, eps)
        proof = sample_budget("thm1_proof", rho_abc.dims, eps**2 / 2)

    aux = {
        "route": route,
        "target": target,
        "fidelity": f,
        "half_trace_distance": half_trace,
        "input_petz_distance": petz_distance(rho_abc),
        "proof_copies": proof.n,
    }
    if route == "trace":
        d_a, d_b, d_c = rho_abc.dims
        aux["copies_ab"] = sample_budget("ow16_trace", (d_a, d_b), oracle_target).n
        aux["copies_bc"] = sample_budget("ow16_trace", (d_b, d_c), oracle_target).n
    if guarantee.violated:
        logger.warning(
            f"tomo_tripartite: guarantee failed, {guarantee.statement}, "
            f"measured {guarantee.measured:.6e}"
        )

    return ProtocolTranscript(
        protocol_name="tomo_tripartite",
        seed=seed,
        dims=rho_abc.dims,
        inputs_digest=content_digest(rho_abc.matrix),
        oracle_calls=tuple(calls),
        budget=budget,
        output=content_digest(output.matrix),
        guarantee=guarantee,
        aux=aux,
        tags=("failure-injected",) if injected else (),
    )


def tomo_multipartite(
    rho: DensityOperator,
    delta: float,
    rng: np.random.Generator,
    allocation: Literal["uniform", "weighted"] = "uniform",
    stress: bool = True,
    failure_prob: float = 0.0,
    seed: int | None = None,
) -> ProtocolTranscript:
    """
    Learns an m-partite Markov chain by estimating every rho_{i,i+1} at infidelity
    delta_i and chaining their Petz maps.

    Pairs with odd i are estimated in one pass and pairs with even i in another;
    within a pass the marginals are disjoint and share copies. The guarantee is
    F(rho, output) >= 1 - 8 (sum_i sqrt(delta_i))^2, which is at least 1 - delta.

    Parameters
    ----------
    rho: DensityOperator
        The true state on m >= 3 subsystems.
    delta: float
        Overall infidelity target in (0, 1).
    rng: np.random.Generator
        Drives the oracle.
    allocation: str, optional
        How delta is split over pairs, see chain_deltas. Defaults to "uniform".
    stress, failure_prob, seed:
        As for tomo_tripartite.

    Returns
    -------
    ProtocolTranscript: Output digest and the measured guarantee.
    """
    m = len(rho.layout)
    if m < 3:
        raise DimensionError(f"chain tomography needs at least 3 subsystems, got {m}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    deltas = chain_deltas(rho.dims, delta, allocation)
    marginals = pair_marginals(rho)

    estimates: list[DensityOperator | None] = [None] * (m - 1)
    calls = []
    for group, parity in (("odd", 1), ("even", 0)):
        for i in range(m - 1):
            if (i + 1) % 2 != parity:
                continue
            cfg = EstimationOracleConfig("infidelity", deltas[i], failure_prob, stress)
            est = oracle_estimate_detailed(marginals[i], cfg, rng)
            calls.append(
                OracleCall(
                    f"{i + 1}{i + 2}", "infidelity", deltas[i], est.discrepancy, est.failed, group
                )
            )
            estimates[i] = est.state
    output = chain_reconstruct(estimates)
    injected = any(c.failed for c in calls)

    f = fidelity(rho.matrix, output.matrix, validate=False)
    floor = 1 - 8 * sum(math.sqrt(d) for d in deltas) ** 2
    guarantee = Guarantee.at_least(
        "F(rho, output) >= 1 - 8 (sum_i sqrt(delta_i))^2", floor, f, not injected
    )
    if guarantee.violated:
        logger.warning(f"tomo_multipartite: fidelity {f:.6e} below floor {floor:.6e}")
    proof = sample_budget("thm4_proof", rho.dims, delta)

    return ProtocolTranscript(
        protocol_name="tomo_multipartite",
        seed=seed,
        dims=rho.dims,
        inputs_digest=content_digest(rho.matrix),
        oracle_calls=tuple(calls),
        budget=sample_budget("thm4_fidelity", rho.dims, delta),
        output=content_digest(output.matrix),
        guarantee=guarantee,
        aux={
            "allocation": allocation,
            "deltas": list(deltas),
            "fidelity": f,
            "target_floor": 1 - delta,
            "meets_target": f >= 1 - delta,
            "input_chain_error": trace_distance(
                rho.matrix, chain_reconstruct(marginals).matrix
            ),
            "proof_copies": proof.n,
            "even_pass_copies": proof.aux["even_pass"],
            "odd_pass_copies": proof.aux["odd_pass"],
        },
        tags=("failure-injected",) if injected else (),
    )
