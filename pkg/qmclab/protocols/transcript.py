"""Records of simulated protocol runs."""

from dataclasses import dataclass, field
from typing import Any, Literal

from qmclab.protocols.budget import SampleBudget

__all__ = ["OracleCall", "Guarantee", "ProtocolTranscript"]

# Slack allowed on every recorded guarantee comparison.
GUARANTEE_TOL = 1e-9


@dataclass(frozen=True)
class OracleCall:
    """
    One estimation-oracle query.

    Parameters
    ----------
    marginal: str
        Which marginal was estimated, e.g. "AB" or "23".
    mode: str
        "infidelity", "trace" or "certify".
    target: float
        Requested discrepancy bound.
    achieved: float
        Measured discrepancy of the returned estimate.
    failed: bool
        A simulated failure was injected.
    group: str, optional
        Copy-sharing group, "odd" or "even" for chain tomography.
    """

    marginal: str
    mode: str
    target: float
    achieved: float
    failed: bool = False
    group: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "marginal": self.marginal,
            "mode": self.mode,
            "target": self.target,
            "achieved": self.achieved,
            "failed": self.failed,
            "group": self.group,
        }


@dataclass(frozen=True)
class Guarantee:
    """
    A claimed bound and the value measured against it.

    applicable is False when the claim does not cover the run: an injected failure
    occurred or the input broke the protocol's promise.
    """

    statement: str
    claimed: float
    measured: float
    passed: bool
    applicable: bool = True
    direction: Literal[">=", "<="] = ">="

    @classmethod
    def at_least(cls, statement: str, floor: float, measured: float, applicable: bool = True):
        floor, measured = float(floor), float(measured)
        return cls(statement, floor, measured, measured >= floor - GUARANTEE_TOL, applicable)

    @classmethod
    def at_most(cls, statement: str, ceiling: float, measured: float, applicable: bool = True):
        ceiling, measured = float(ceiling), float(measured)
        passed = measured <= ceiling + GUARANTEE_TOL
        return cls(statement, ceiling, measured, passed, applicable, "<=")

    @classmethod
    def decision(cls, decided: str, truth: str, applicable: bool = True):
        correct = decided == truth
        return cls(
            "decision matches the truth under the promise",
            1.0,
            float(correct),
            correct,
            applicable,
        )

    @property
    def slack(self) -> float:
        if self.direction == ">=":
            return self.measured - self.claimed
        return self.claimed - self.measured

    @property
    def violated(self) -> bool:
        return self.applicable and not self.passed

    def to_json(self) -> dict[str, Any]:
        return {
            "statement": self.statement,
            "direction": self.direction,
            "claimed": self.claimed,
            "measured": self.measured,
            "slack": self.slack,
            "passed": self.passed,
            "applicable": self.applicable,
        }


@dataclass(frozen=True)
class ProtocolTranscript:
    """
    Everything needed to recompute a protocol run.

    Parameters
    ----------
    protocol_name: str
        "tomo_tripartite", "tomo_multipartite", "certify" or "qmc_test".
    seed: int | None
        Seed of the run's generator, None when the caller supplied the generator.
    dims: tuple[int, ...]
        Layout of the input state.
    inputs_digest: str
        sha256 of the input matrices.
    oracle_calls: tuple[OracleCall, ...]
        Every oracle query, in order.
    budget: SampleBudget
        Headline copy count of the protocol.
    output: str
        Digest of the output state, or the decision.
    guarantee: Guarantee
        The protocol's claim for this run.
    aux: dict
        Intermediate quantities (margins, proof-level budgets, statistics).
    tags: tuple[str, ...]
        Flags such as "failure-injected" or "promise-violated".
    """

    protocol_name: str
    seed: int | None
    dims: tuple[int, ...]
    inputs_digest: str
    oracle_calls: tuple[OracleCall, ...]
    budget: SampleBudget
    output: str
    guarantee: Guarantee
    aux: dict[str, Any] = field(default_factory=dict)
    tags: tuple[str, ...] = ()

    @property
    def failure_injected(self) -> bool:
        return any(c.failed for c in self.oracle_calls) or "failure-injected" in self.tags

    def to_json(self) -> dict[str, Any]:
        return {
            "protocol_name": self.protocol_name,
            "seed": self.seed,
            "dims": list(self.dims),
            "inputs_digest": self.inputs_digest,
            "oracle_calls": [c.to_json() for c in self.oracle_calls],
            "budget": self.budget.to_json(),
            "output": self.output,
            "guarantee": self.guarantee.to_json(),
            "aux": dict(sorted(self.aux.items())),
            "tags": list(self.tags),
        }
