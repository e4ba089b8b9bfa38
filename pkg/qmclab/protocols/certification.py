"""
Certification of an unknown Markov chain against a known one.

Both states are assumed to be quantum Markov chains, and either equal or at
infidelity at least delta (the promise). Each of the marginals AB and BC is
certified at threshold 0.01 delta. If both certifiers accept, the chains are at
infidelity below 0.18 delta, which the promise rules out unless they are equal.
"""

import logging
from typing import Literal

import numpy as np

from qmclab.config import TRACE_TOL
from qmclab.errors import DimensionError
from qmclab.io import content_digest
from qmclab.linalg import fidelity, trace_distance
from qmclab.protocols.budget import sample_budget
from qmclab.protocols.transcript import Guarantee, OracleCall, ProtocolTranscript
from qmclab.states import DensityOperator

__all__ = ["certify"]

logger = logging.getLogger(__name__)

CERTIFY_FRACTION = 0.01
CHAIN_FACTOR = 0.18

Decision = Literal["equal", "far"]


def ground_truth(
    rho: DensityOperator, sigma: DensityOperator, delta: float
) -> Literal["equal", "far", "promise-violated"]:
    """Classifies a pair against the promise: equal, at infidelity >= delta, or neither."""
    if trace_distance(rho.matrix, sigma.matrix) <= TRACE_TOL:
        return "equal"
    if 1 - fidelity(rho.matrix, sigma.matrix, validate=False) >= delta:
        return "far"
    return "promise-violated"


def certify(
    rho: DensityOperator,
    sigma_known: DensityOperator,
    delta: float | None,
    rng: np.random.Generator,
    failure_prob: float = 0.01,
    mode: Literal["infidelity", "trace"] = "infidelity",
    eps: float | None = None,
    seed: int | None = None,
) -> ProtocolTranscript:
    """
    Decides whether rho equals the known chain sigma_known.

    Parameters
    ----------
    rho: DensityOperator
        The unknown tripartite state.
    sigma_known: DensityOperator
        The known tripartite state, same layout.
    delta: float | None
        Infidelity of the promise in infidelity mode.
    rng: np.random.Generator
        Draws the certifier failures.
    failure_prob: float, optional
        Probability that a marginal certifier returns the wrong answer. Defaults to
        0.01.
    mode: str, optional
        "infidelity", or "trace" with promise (1/2)||rho - sigma||_1 >= eps, run at
        delta = eps^2 / 2. Defaults to "infidelity".
    eps: float, optional
        Trace distance of the promise in trace mode.
    seed: int, optional
        Recorded in the transcript.

    Returns
    -------
    ProtocolTranscript: output is the decision "equal" or "far". Runs where the
    promise fails are tagged "promise-violated" and carry no claim.
    """
    if len(rho.layout) != 3 or rho.dims != sigma_known.dims:
        raise DimensionError(
            f"expected two tripartite states of equal layout, got {rho.dims} and "
            f"{sigma_known.dims}"
        )
    if mode == "trace":
        if eps is None or not 0 < eps <= 1:
            raise ValueError(f"trace mode needs eps in (0, 1], got {eps}")
        delta = eps**2 / 2
        budget = sample_budget("thm2_trace", rho.dims, eps)
    elif mode == "infidelity":
        if delta is None or not 0 < delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {delta}")
        budget = sample_budget("thm2_fidelity", rho.dims, delta)
    else:
        raise ValueError(f"mode must be 'infidelity' or 'trace', got {mode!r}")
    if not 0 <= failure_prob <= 1:
        raise ValueError(f"failure_prob must lie in [0, 1], got {failure_prob}")

    threshold = CERTIFY_FRACTION * delta
    calls = []
    accepted = []
    for name, keep in (("AB", [0, 1]), ("BC", [1, 2])):
        infidelity = 1 - fidelity(
            rho.marginal(keep).matrix, sigma_known.marginal(keep).matrix, validate=False
        )
        accept = infidelity < threshold
        failed = failure_prob > 0 and rng.random() < failure_prob
        if failed:
            accept = not accept
        calls.append(OracleCall(name, "certify", threshold, infidelity, failed))
        accepted.append(accept)
    decision: Decision = "equal" if all(accepted) else "far"
    injected = any(c.failed for c in calls)

    truth = ground_truth(rho, sigma_known, delta)
    f = fidelity(rho.matrix, sigma_known.matrix, validate=False)
    tags = []
    if injected:
        tags.append("failure-injected")
    if truth == "promise-violated":
        tags.append("promise-violated")
        logger.warning(
            f"certify: infidelity {1 - f:.3e} lies strictly between 0 and delta {delta:.3e}"
        )
    guarantee = Guarantee.decision(
        decision, truth, applicable=not injected and truth != "promise-violated"
    )
    if guarantee.violated:
        logger.warning(f"certify: decided {decision!r} on a {truth!r} pair")

    marginals_close = all(c.achieved < threshold for c in calls)
    aux = {
        "mode": mode,
        "delta": delta,
        "threshold": threshold,
        "truth": truth,
        "fidelity": f,
        # The promise gap the argument relies on: 0.18 delta < delta.
        "promise_margin": delta - CHAIN_FACTOR * delta,
        "marginals_close": marginals_close,
        "proof_copies": sum(
            sample_budget("bow17_certify_fidelity", rho.layout.dim_of(keep), threshold).n
            for keep in ([0, 1], [1, 2])
        ),
    }
    if marginals_close:
        # Both marginals within 0.01 delta force the chains within 0.18 delta.
        aux["chain_floor"] = 1 - CHAIN_FACTOR * delta
        aux["chain_floor_holds"] = f > 1 - CHAIN_FACTOR * delta - 1e-9

    return ProtocolTranscript(
        protocol_name="certify",
        seed=seed,
        dims=rho.dims,
        inputs_digest=content_digest(rho.matrix, sigma_known.matrix),
        oracle_calls=tuple(calls),
        budget=budget,
        output=decision,
        guarantee=guarantee,
        aux=aux,
        tags=tuple(tags),
    )
