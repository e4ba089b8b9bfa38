"""
Testing whether a tripartite state is a quantum Markov chain.

The tester estimates rho_BC at infidelity eps^2 / (400 d), recovers rho_ABC from
rho_AB and the estimate, and compares the recovery with rho_ABC in Schatten-2 norm
at threshold 0.4 eps / sqrt(d), d = d_A d_B d_C. On a Markov chain the statistic is
at most 0.4 eps / sqrt(d); on a state whose recovery misses it by eps in trace norm
it is at least 0.6 eps / sqrt(d).
"""

import logging
import math
from typing import Literal

import numpy as np

from qmclab.config import REPORT_TOL
from qmclab.errors import DimensionError
from qmclab.io import content_digest
from qmclab.linalg import schatten_norm
from qmclab.petz import petz_distance, petz_reconstruct
from qmclab.protocols.budget import sample_budget
from qmclab.protocols.oracle import EstimationOracleConfig, oracle_estimate_detailed
from qmclab.protocols.transcript import Guarantee, OracleCall, ProtocolTranscript
from qmclab.states import DensityOperator

__all__ = ["qmc_test"]

logger = logging.getLogger(__name__)

DELTA_DIVISOR = 400
THRESHOLD_FACTOR = 0.4
MARKOV_CEILING = 2 / 5
FAR_FLOOR = 3 / 5
# Inputs whose own recovery misses them by at most this (trace norm) count as chains.
MARKOV_TOL = REPORT_TOL

Truth = Literal["Markov", "far", "promise-violated"]


def ground_truth(rho_abc: DensityOperator, eps: float, orientation: str = "bc") -> Truth:
    distance = petz_distance(rho_abc, p=1, orientation=orientation)
    if distance <= MARKOV_TOL:
        return "Markov"
    if distance >= eps:
        return "far"
    return "promise-violated"


def qmc_test(
    rho_abc: DensityOperator,
    eps: float,
    rng: np.random.Generator,
    orientation: Literal["bc", "ab"] = "bc",
    stress: bool = True,
    failure_prob: float = 0.0,
    seed: int | None = None,
) -> ProtocolTranscript:
    """
    Decides "Markov" or "far" for a tripartite state.

    Parameters
    ----------
    rho_abc: DensityOperator
        The tested state.
    eps: float
        Trace-norm distance of the far promise.
    rng: np.random.Generator
        Drives the oracle and the comparator failures.
    orientation: str, optional
        "bc" estimates rho_BC and recovers from rho_AB. "ab" runs the mirrored
        tester on the state with A and C exchanged, estimating rho_AB, which is
        cheaper when d_A < d_C. Defaults to "bc".
    stress: bool, optional
        Oracle discrepancy near its maximum. Defaults to True.
    failure_prob: float, optional
        Injected failure rate of the estimate and of the comparator. Defaults to 0.
    seed: int, optional
        Recorded in the transcript.

    Returns
    -------
    ProtocolTranscript: output is the decision; aux holds the statistic.
    """
    if len(rho_abc.layout) != 3:
        raise DimensionError(f"expected a tripartite state, got layout {rho_abc.dims}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if orientation == "bc":
        rho = rho_abc
        estimated, exact = "BC", "AB"
    elif orientation == "ab":
        rho = rho_abc.permuted([2, 1, 0])
        estimated, exact = "AB", "BC"
    else:
        raise ValueError(f"orientation must be 'bc' or 'ab', got {orientation!r}")

    d = rho.dim
    delta = eps**2 / (DELTA_DIVISOR * d)
    cfg = EstimationOracleConfig("infidelity", delta, failure_prob, stress)
    est = oracle_estimate_detailed(rho.marginal([1, 2]), cfg, rng)
    calls = [OracleCall(estimated, "infidelity", delta, est.discrepancy, est.failed)]

    # The pair on the other side is used exactly.
    recovery = petz_reconstruct(rho.marginal([0, 1]), est.state, marginal="bc")
    statistic = schatten_norm(rho.matrix - recovery.matrix, 2)
    threshold = THRESHOLD_FACTOR * eps / math.sqrt(d)
    markov = statistic < threshold
    comparator_failed = failure_prob > 0 and rng.random() < failure_prob
    if comparator_failed:
        markov = not markov
    calls.append(OracleCall("ABC", "l2-compare", threshold, statistic, comparator_failed))
    decision = "Markov" if markov else "far"
    injected = est.failed or comparator_failed

    truth = ground_truth(rho, eps)
    tags = []
    if injected:
        tags.append("failure-injected")
    if truth == "promise-violated":
        tags.append("promise-violated")
        logger.warning(f"qmc_test: input lies strictly inside the promise gap at eps {eps:.3e}")
    guarantee = Guarantee.decision(
        decision, truth, applicable=not injected and truth != "promise-violated"
    )
    if guarantee.violated:
        logger.warning(f"qmc_test: decided {decision!r} on a {truth!r} input")

    return ProtocolTranscript(
        protocol_name="qmc_test",
        seed=seed,
        dims=rho_abc.dims,
        inputs_digest=content_digest(rho_abc.matrix),
        oracle_calls=tuple(calls),
        budget=sample_budget("thm3_trace", rho_abc.dims, eps),
        output=decision,
        guarantee=guarantee,
        aux={
            "orientation": orientation,
            "exact_marginal": exact,
            "delta": delta,
            "statistic": statistic,
            "threshold": threshold,
            "markov_ceiling": MARKOV_CEILING * eps / math.sqrt(d),
            "far_floor": FAR_FLOOR * eps / math.sqrt(d),
            "truth": truth,
            "proof_copies": sample_budget("thm3_proof", rho_abc.dims, eps).n,
        },
        tags=tuple(tags),
    )
