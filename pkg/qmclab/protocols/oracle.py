"""
Simulated estimation oracle.

The protocols only rely on what an estimator guarantees: an output within a given
infidelity or trace distance of the true state, with some failure probability.
The oracle produces exactly that, driving the discrepancy close to the allowed
maximum in stress mode.
"""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from qmclab.config import ORACLE_RESOLUTION
from qmclab.errors import ConfigError
from qmclab.states import DensityOperator, discrepancy, perturb_away, random_density

__all__ = [
    "EstimationOracleConfig",
    "OracleEstimate",
    "oracle_estimate",
    "oracle_estimate_detailed",
]

logger = logging.getLogger(__name__)

STRESS_RANGE = (0.9, 0.999)


@dataclass(frozen=True)
class EstimationOracleConfig:
    """
    Guarantee an estimator offers.

    Parameters
    ----------
    mode: str
        "infidelity" bounds 1 - F(rho, estimate), "trace" bounds ||rho - estimate||_1.
    target: float
        The bound. Below 1 in infidelity mode.
    failure_prob: float, optional
        Probability of returning an arbitrary state instead. Defaults to 0.
    stress: bool, optional
        Draw the discrepancy from [0.9, 0.999] * target instead of [0, target].
        Defaults to True.
    """

    mode: Literal["infidelity", "trace"]
    target: float
    failure_prob: float = 0.0
    stress: bool = True

    def __post_init__(self):
        if self.mode not in ("infidelity", "trace"):
            raise ConfigError("mode", f"expected 'infidelity' or 'trace', got {self.mode!r}")
        if not self.target > 0:
            raise ConfigError("target", f"must be positive, got {self.target}")
        if self.mode == "infidelity" and not self.target < 1:
            raise ConfigError("target", f"infidelity target must be below 1, got {self.target}")
        if not 0 <= self.failure_prob <= 1:
            raise ConfigError("failure_prob", f"must lie in [0, 1], got {self.failure_prob}")


@dataclass(frozen=True, eq=False)
class OracleEstimate:
    state: DensityOperator
    discrepancy: float
    failed: bool
    target: float


def oracle_estimate_detailed(
    rho: DensityOperator, cfg: EstimationOracleConfig, rng: np.random.Generator
) -> OracleEstimate:
    """
    Returns an estimate of rho meeting the configured guarantee.

    Parameters
    ----------
    rho: DensityOperator
        The true state.
    cfg: EstimationOracleConfig
        Guarantee to meet.
    rng: np.random.Generator
        Draws the failure event, the discrepancy level and the mixing state.

    Returns
    -------
    OracleEstimate: The estimate with its measured discrepancy. A failed estimate
    is a random full-rank state with no guarantee.
    """
    measure = discrepancy(cfg.mode)
    if cfg.failure_prob > 0 and rng.random() < cfg.failure_prob:
        state = random_density(rho.dim, None, rng)
        state = DensityOperator(state.matrix, rho.layout)
        logger.info(f"Oracle: simulated failure at {cfg.mode} target {cfg.target:.3e}")
        return OracleEstimate(state, measure(rho.matrix, state.matrix), True, cfg.target)

    if cfg.target < ORACLE_RESOLUTION:
        return OracleEstimate(rho, 0.0, False, cfg.target)

    if cfg.stress:
        level = cfg.target * rng.uniform(*STRESS_RANGE)
    else:
        level = cfg.target * rng.uniform(0.0, 1.0)
    state = perturb_away(rho, cfg.mode, level, rng)
    return OracleEstimate(state, measure(rho.matrix, state.matrix), False, cfg.target)


def oracle_estimate(
    rho: DensityOperator, cfg: EstimationOracleConfig, rng: np.random.Generator
) -> DensityOperator:
    return oracle_estimate_detailed(rho, cfg, rng).state
