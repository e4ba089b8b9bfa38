import logging
from dataclasses import dataclass, field, replace
from typing import Any, ClassVar, Iterable

import numpy as np

from qmclab.config import REPORT_TOL
from qmclab.errors import UnknownBoundError
from qmclab.io import content_digest
from qmclab.linalg import SystemLayout, hermitize
from qmclab.states import DensityOperator, random_density


@dataclass(frozen=True)
class BoundReport:
    """
    One evaluated inequality lhs <= rhs.

    Parameters
    ----------
    bound_name: str
        Registered name of the evaluator.
    lhs: float
        Left-hand side, nonnegative.
    rhs: float
        Right-hand side, nonnegative.
    slack: float
        rhs - lhs as computed. Where an evaluator checks several inequalities this
        is the smallest slack, and lhs and rhs belong to that inequality.
    inputs_digest: str
        sha256 of the input matrices.
    seed: int | None
        Seed the instance was drawn from, None for supplied inputs.
    dims: tuple[tuple[int, ...], ...]
        Layouts of the inputs.
    aux: dict
        Intermediate quantities and per-step slacks.
    tags: tuple[str, ...]
        Flags such as "support-mismatch" or "non-unit-trace".
    """

    bound_name: str
    lhs: float
    rhs: float
    slack: float
    inputs_digest: str
    seed: int | None = None
    dims: tuple[tuple[int, ...], ...] = ()
    aux: dict[str, Any] = field(default_factory=dict)
    tags: tuple[str, ...] = ()

    def passed(self, tol: float = REPORT_TOL) -> bool:
        return self.slack >= -tol

    def to_json(self) -> dict[str, Any]:
        return {
            "bound_name": self.bound_name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "inputs_digest": self.inputs_digest,
            "seed": self.seed,
            "dims": [list(d) for d in self.dims],
            "aux": dict(sorted(self.aux.items())),
            "tags": list(self.tags),
        }


class BoundCheck:
    """
    Base class for inequality evaluators. Subclasses set bound_name and implement
    evaluate and draw. Every subclass with a bound_name is registered and can be
    looked up with get_bound.
    """

    bound_name: ClassVar[str] = ""
    _registry: ClassVar[dict[str, type["BoundCheck"]]] = {}

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.__dict__.get("bound_name"):
            BoundCheck._registry[cls.bound_name] = cls

    def __init__(self, tolerance: float = REPORT_TOL):
        self.tolerance = tolerance
        self.logger = logging.getLogger(f"qmclab.bounds.{self.bound_name}")

    def evaluate(self, **inputs) -> BoundReport:
        """Evaluates both sides of the inequality on the given inputs."""
        raise NotImplementedError

    def draw(
        self, layout: SystemLayout, rng: np.random.Generator, rank: int | None = None
    ) -> dict[str, Any]:
        """Draws a random instance. Returns the generator-side data."""
        raise NotImplementedError

    def inputs(self, drawn: dict[str, Any]) -> dict[str, Any]:
        """Maps drawn generator data to evaluate keyword arguments."""
        return drawn

    def perturb(
        self, drawn: dict[str, Any], rng: np.random.Generator, scale: float
    ) -> dict[str, Any]:
        """
        Moves an instance a small step. States are mixed with a random state of
        weight scale; plain matrices get complex Gaussian noise of size scale.
        """
        out = {}
        for key, value in drawn.items():
            if isinstance(value, DensityOperator):
                w = random_density(value.dim, None, rng).matrix
                out[key] = DensityOperator(
                    hermitize((1 - scale) * value.matrix + scale * w), value.layout
                )
            elif isinstance(value, np.ndarray) and value.ndim == 2:
                noise = rng.standard_normal(value.shape) + 1j * rng.standard_normal(
                    value.shape
                )
                out[key] = value + scale * noise * np.linalg.norm(value) / np.sqrt(
                    value.size
                )
            else:
                out[key] = value
        return out

    def run(
        self, layout: SystemLayout, seed: int, rank: int | None = None
    ) -> BoundReport:
        """Draws an instance from seed and evaluates it."""
        rng = np.random.default_rng(seed)
        report = self.evaluate(**self.inputs(self.draw(layout, rng, rank)))
        return replace(report, seed=seed)

    def report(
        self,
        lhs: float,
        rhs: float,
        arrays: Iterable[np.ndarray],
        dims: Iterable[Iterable[int]],
        aux: dict[str, Any] | None = None,
        tags: Iterable[str] = (),
    ) -> BoundReport:
        lhs, rhs = float(lhs), float(rhs)
        slack = rhs - lhs
        if slack < -self.tolerance:
            self.logger.warning(
                f"{self.bound_name}: slack {slack:.3e} below tolerance {self.tolerance:.1e}"
            )
        return BoundReport(
            bound_name=self.bound_name,
            lhs=lhs,
            rhs=rhs,
            slack=slack,
            inputs_digest=content_digest(*arrays),
            dims=tuple(tuple(int(d) for d in ds) for ds in dims),
            aux={k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                 for k, v in (aux or {}).items()},
            tags=tuple(tags),
        )

    def binding(
        self, pairs: dict[str, tuple[float, float]], **kwargs
    ) -> BoundReport:
        """
        Report for several inequalities at once: lhs and rhs of the one with the
        least slack, every slack in aux as "<name>_slack".
        """
        slacks = {name: rhs - lhs for name, (lhs, rhs) in pairs.items()}
        worst = min(slacks, key=slacks.get)
        aux = dict(kwargs.pop("aux", None) or {})
        aux.update({f"{name}_slack": s for name, s in slacks.items()})
        aux["binding"] = worst
        lhs, rhs = pairs[worst]
        return self.report(lhs, rhs, aux=aux, **kwargs)


def bound_names() -> list[str]:
    """Registered evaluator names, sorted."""
    import qmclab.bounds  # noqa: F401  registers the evaluators

    return sorted(BoundCheck._registry)


def get_bound(name: str, tolerance: float = REPORT_TOL) -> BoundCheck:
    import qmclab.bounds  # noqa: F401

    try:
        cls = BoundCheck._registry[name]
    except KeyError:
        raise UnknownBoundError(
            f"unknown bound {name!r}; known bounds: {', '.join(sorted(BoundCheck._registry))}"
        )
    return cls(tolerance=tolerance)
