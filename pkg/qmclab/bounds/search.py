"""Hill-climbing search for instances that minimize a bound's slack."""

import logging
from dataclasses import dataclass

import numpy as np

from qmclab.base import BoundCheck, BoundReport, get_bound
from qmclab.errors import QmclabError
from qmclab.linalg import SystemLayout
from qmclab.states import as_layout

logger = logging.getLogger(__name__)

MIN_SCALE = 1e-6
MAX_SCALE = 0.5


@dataclass(frozen=True)
class SearchResult:
    """
    Outcome of an adversarial search.

    Parameters
    ----------
    bound_name: str
        The searched bound.
    min_slack: float
        Smallest slack found, a tightness measure of the bound at this layout.
    report: BoundReport
        Report of the instance attaining min_slack.
    evaluations: int
        Number of successful evaluations.
    rejected: int
        Perturbed instances that left the precondition domain.
    """

    bound_name: str
    min_slack: float
    report: BoundReport
    evaluations: int
    rejected: int


def adversarial_search(
    bound: BoundCheck | str,
    layout: SystemLayout,
    rng: np.random.Generator,
    steps: int = 10_000,
    restarts: int = 4,
    rank: int | None = None,
    scale: float = 0.05,
) -> SearchResult:
    """
    Minimizes the slack of a bound by random restarts and accepted-if-better
    perturbations of the instance.

    Parameters
    ----------
    bound: BoundCheck | str
        Evaluator or its registered name.
    layout: SystemLayout
        Layout instances are drawn at.
    rng: np.random.Generator
        Seeded generator; the search is deterministic given it.
    steps: int, optional
        Total perturbation steps, split evenly over the restarts. Defaults to 10000.
    restarts: int, optional
        Number of independent starting instances. Defaults to 4.
    rank: int, optional
        Rank passed to the instance sampler.
    scale: float, optional
        Initial perturbation size. It grows by half on acceptance and shrinks by a
        tenth on rejection, within [1e-6, 0.5].

    Returns
    -------
    SearchResult: The smallest slack and the report attaining it.
    """
    if isinstance(bound, str):
        bound = get_bound(bound)
    layout = as_layout(layout)
    per_restart = max(steps // max(restarts, 1), 1)
    best: BoundReport | None = None
    evaluations = rejected = 0

    for restart in range(max(restarts, 1)):
        drawn = bound.draw(layout, rng, rank)
        current = bound.evaluate(**bound.inputs(drawn))
        evaluations += 1
        step_scale = scale
        for _ in range(per_restart):
            candidate = bound.perturb(drawn, rng, step_scale)
            try:
                report = bound.evaluate(**bound.inputs(candidate))
            except QmclabError:
                rejected += 1
                step_scale = max(step_scale * 0.9, MIN_SCALE)
                continue
            evaluations += 1
            if report.slack < current.slack:
                drawn, current = candidate, report
                step_scale = min(step_scale * 1.5, MAX_SCALE)
            else:
                step_scale = max(step_scale * 0.9, MIN_SCALE)
        logger.debug(f"{bound.bound_name}: restart {restart} ended at slack {current.slack:.3e}")
        if best is None or current.slack < best.slack:
            best = current

    if best.slack < -1e-6:
        logger.warning(f"{bound.bound_name}: search reached slack {best.slack:.3e}")
    return SearchResult(bound.bound_name, best.slack, best, evaluations, rejected)
