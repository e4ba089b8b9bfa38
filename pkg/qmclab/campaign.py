"""
Seeded campaigns of bound checks and protocol simulations.

Trial t of an item with index i runs on the seed derived from
SeedSequence(entropy=seed, spawn_key=(t, i)), so adding trials or bounds never
changes the instances of earlier ones. Trials may run in a process pool; their
records are merged in (item, trial) order and written as JSON lines.
"""

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from qmclab.base import bound_names, get_bound
from qmclab.bounds.search import adversarial_search
from qmclab.config import REPORT_TOL, max_total_dim
from qmclab.errors import ConfigError, InfeasibleTargetError
from qmclab.io import load_state, save_state
from qmclab.linalg import SystemLayout
from qmclab.petz import far_from_markov
from qmclab.protocols.budget import FORMULAS, sample_budget
from qmclab.protocols.certification import certify
from qmclab.protocols.testing import qmc_test
from qmclab.protocols.tomography import tomo_multipartite, tomo_tripartite
from qmclab.states import (
    assemble_qmc,
    draw_markov_structure,
    perturb_markov_structure,
    random_markov_chain,
    random_qmc,
)

logger = logging.getLogger(__name__)

COMMANDS = (
    "verify-bounds",
    "tomo-sim",
    "tomo-chain-sim",
    "certify-sim",
    "qmc-test-sim",
    "gen-state",
    "budget",
)
PROTOCOL_COMMANDS = ("tomo-sim", "tomo-chain-sim", "certify-sim", "qmc-test-sim")
# Perturbation steps per trial when verify-bounds runs in stress mode.
STRESS_STEPS = 50


@dataclass(frozen=True)
class CampaignConfig:
    """
    A campaign, as built from the command line.

    Parameters
    ----------
    command: str
        One of COMMANDS.
    dims: tuple[int, ...]
        Subsystem dimensions.
    trials: int
        Seeded trials per bound or protocol.
    seed: int
        Campaign seed, 0 <= seed < 2^64.
    delta: float, optional
        Infidelity target.
    eps: float, optional
        Trace-distance target.
    bounds: tuple[str, ...]
        Bounds to verify; empty means all registered bounds.
    out: str, optional
        Detail stream path. The summary goes to "<out>.summary.json".
    stress: bool
        Oracle discrepancies near their maximum; for verify-bounds, a short
        adversarial search per trial.
    tol: float, optional
        Slack tolerance of bound reports. Defaults to REPORT_TOL.
    state: str, optional
        State file: written by gen-state, read as the input of the protocol
        commands.
    workers: int
        Process-pool size.
    formula: str, optional
        Formula of the budget command.
    constants: dict[str, float]
        Formula constant overrides.
    rank: int, optional
        Rank of drawn instances.
    failure_prob: float, optional
        Injected oracle failure rate; protocol defaults when None.
    """

    command: str
    dims: tuple[int, ...] = (2, 2, 2)
    trials: int = 1
    seed: int = 0
    delta: float | None = None
    eps: float | None = None
    bounds: tuple[str, ...] = ()
    out: str | None = None
    stress: bool = False
    tol: float | None = None
    state: str | None = None
    workers: int = 1
    formula: str | None = None
    constants: dict[str, float] = field(default_factory=dict)
    rank: int | None = None
    failure_prob: float | None = None

    def validate(self) -> "CampaignConfig":
        """Raises ConfigError naming the first invalid field; returns self."""
        if self.command not in COMMANDS:
            raise ConfigError(
                "command", f"expected one of {', '.join(COMMANDS)}, got {self.command!r}"
            )
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials", f"must be a positive integer, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", f"must be a 64-bit unsigned integer, got {self.seed}")
        if not self.dims or min(self.dims) < 1:
            raise ConfigError("dims", f"dimensions must be positive, got {self.dims}")
        if self.command not in ("budget",) and math.prod(self.dims) > max_total_dim():
            raise ConfigError(
                "dims", f"total dimension {math.prod(self.dims)} exceeds the cap {max_total_dim()}"
            )
        n = len(self.dims)
        if self.command in ("verify-bounds", "tomo-sim", "certify-sim", "qmc-test-sim") and n != 3:
            raise ConfigError("dims", f"{self.command} needs 3 subsystems, got {n}")
        if self.command in ("tomo-chain-sim", "gen-state") and n < 3:
            raise ConfigError("dims", f"{self.command} needs at least 3 subsystems, got {n}")
        if self.command == "budget":
            for name in ("delta", "eps"):
                value = getattr(self, name)
                if value is not None and not value > 0:
                    raise ConfigError(name, f"must be positive, got {value}")
        else:
            if self.delta is not None and not 0 < self.delta < 1:
                raise ConfigError("delta", f"must lie in (0, 1), got {self.delta}")
            if self.eps is not None and not 0 < self.eps <= 1:
                raise ConfigError("eps", f"must lie in (0, 1], got {self.eps}")
        if self.command in ("tomo-sim", "certify-sim", "budget"):
            if self.delta is None and self.eps is None:
                raise ConfigError("delta", f"{self.command} needs --delta or --eps")
        if self.command == "tomo-chain-sim" and self.delta is None:
            raise ConfigError("delta", "tomo-chain-sim needs --delta")
        if self.command == "qmc-test-sim" and self.eps is None:
            raise ConfigError("eps", "qmc-test-sim needs --eps")
        if self.command == "budget" and self.formula not in FORMULAS:
            raise ConfigError("formula", f"unknown formula {self.formula!r}")
        if self.command == "gen-state" and self.state is None and self.out is None:
            raise ConfigError("state", "gen-state needs --state or --out")
        unknown = sorted(set(self.bounds) - set(bound_names()))
        if unknown:
            raise ConfigError("bounds", f"unknown bounds {', '.join(unknown)}")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol", f"must be positive, got {self.tol}")
        if self.workers < 1:
            raise ConfigError("workers", f"must be at least 1, got {self.workers}")
        if self.rank is not None and self.rank < 1:
            raise ConfigError("rank", f"must be at least 1, got {self.rank}")
        if self.failure_prob is not None and not 0 <= self.failure_prob <= 1:
            raise ConfigError("failure_prob", f"must lie in [0, 1], got {self.failure_prob}")
        return self

    @property
    def tolerance(self) -> float:
        return REPORT_TOL if self.tol is None else self.tol


@dataclass
class GroupSummary:
    """Aggregate over the trials of one bound or protocol."""

    trials: int = 0
    applicable: int = 0
    passes: int = 0
    min_slack: float | None = None
    mean_slack: float | None = None
    worst_digest: str | None = None

    @property
    def failures(self) -> int:
        return self.applicable - self.passes


@dataclass
class CampaignSummary:
    command: str
    groups: dict[str, GroupSummary]
    wall_clock: float
    version: str
    config: dict[str, Any]
    budgets: dict[str, dict[str, Any]] = field(default_factory=dict)
    result: dict[str, Any] = field(default_factory=dict)

    @property
    def failures(self) -> int:
        return sum(g.failures for g in self.groups.values())

    @property
    def exit_code(self) -> int:
        return 2 if self.failures else 0

    def to_json(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "groups": {
                name: {**asdict(g), "failures": g.failures}
                for name, g in sorted(self.groups.items())
            },
            "wall_clock": self.wall_clock,
            "version": self.version,
            "config": self.config,
            "budgets": dict(sorted(self.budgets.items())),
            "result": self.result,
        }


def trial_seed(seed: int, trial: int, index: int = 0) -> int:
    """64-bit seed of one trial, independent of how many trials or items run."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial, index))
    return int(ss.generate_state(1, np.uint64)[0])


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (tuple, set)):
        return list(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def dump_record(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, default=_jsonable)


def _load_input(cfg: CampaignConfig):
    if cfg.state is None:
        return None
    state = load_state(cfg.state)
    if state.dims != tuple(cfg.dims):
        raise ConfigError("state", f"state layout {state.dims} does not match dims {cfg.dims}")
    return state


def _bound_trial(cfg: CampaignConfig, name: str, index: int, trial: int) -> dict[str, Any]:
    bound = get_bound(name, cfg.tolerance)
    seed = trial_seed(cfg.seed, trial, index)
    layout = SystemLayout(tuple(cfg.dims))
    if cfg.stress:
        rng = np.random.default_rng(seed)
        result = adversarial_search(
            bound, layout, rng, steps=STRESS_STEPS, restarts=1, rank=cfg.rank
        )
        report = result.report
        record = {**report.to_json(), "seed": seed}
        record["aux"]["search_evaluations"] = result.evaluations
        record["aux"]["search_rejected"] = result.rejected
    else:
        report = bound.run(layout, seed, cfg.rank)
        record = report.to_json()
    record["trial"] = trial
    record["passed"] = report.passed(cfg.tolerance)
    return record


def _protocol_trial(cfg: CampaignConfig, trial: int) -> dict[str, Any]:
    seed = trial_seed(cfg.seed, trial)
    rng = np.random.default_rng(seed)
    given = _load_input(cfg)
    fp = {} if cfg.failure_prob is None else {"failure_prob": cfg.failure_prob}
    aux: dict[str, Any] = {}

    if cfg.command == "tomo-sim":
        rho = given if given is not None else random_qmc(cfg.dims, None, rng)
        if cfg.delta is not None:
            t = tomo_tripartite(rho, cfg.delta, rng, stress=cfg.stress, seed=seed, **fp)
        else:
            t = tomo_tripartite(
                rho, None, rng, route="fidelity-eps", eps=cfg.eps,
                stress=cfg.stress, seed=seed, **fp,
            )
    elif cfg.command == "tomo-chain-sim":
        rho = given if given is not None else random_markov_chain(cfg.dims, rng)
        t = tomo_multipartite(rho, cfg.delta, rng, stress=cfg.stress, seed=seed, **fp)
    elif cfg.command == "certify-sim":
        structure = draw_markov_structure(SystemLayout(tuple(cfg.dims)), None, rng, cfg.rank)
        sigma = given if given is not None else assemble_qmc(structure)
        mode = "infidelity" if cfg.delta is not None else "trace"
        # Odd trials are far instances.
        if trial % 2 == 1 and given is None:
            if mode == "infidelity":
                target, kind = min(cfg.delta * rng.uniform(1.0, 2.0), 0.999), "infidelity"
            else:
                target, kind = min(2 * cfg.eps * rng.uniform(1.0, 1.5), 1.999), "trace"
            try:
                _, rho = perturb_markov_structure(structure, target, rng, kind)
                aux["instance"] = "far"
            except InfeasibleTargetError:
                rho = sigma
                aux["instance"] = "far-infeasible"
        else:
            rho = sigma
            aux["instance"] = "equal"
        t = certify(rho, sigma, cfg.delta, rng, mode=mode, eps=cfg.eps, seed=seed, **fp)
    elif cfg.command == "qmc-test-sim":
        rho = given if given is not None else random_qmc(cfg.dims, None, rng)
        aux["instance"] = "markov"
        if trial % 2 == 1:
            try:
                rho = far_from_markov(rho, cfg.eps)
                aux["instance"] = "far"
            except InfeasibleTargetError:
                aux["instance"] = "far-infeasible"
        t = qmc_test(rho, cfg.eps, rng, stress=cfg.stress, seed=seed, **fp)
    else:
        raise ConfigError("command", f"{cfg.command!r} is not a protocol command")

    record = t.to_json()
    record["trial"] = trial
    record["aux"].update(aux)
    return record


def _run_job(job: tuple[CampaignConfig, str | None, int, int]) -> dict[str, Any]:
    cfg, name, index, trial = job
    if name is None:
        return _protocol_trial(cfg, trial)
    return _bound_trial(cfg, name, index, trial)


def _summarize(records: Iterable[dict[str, Any]], key: str) -> dict[str, GroupSummary]:
    groups: dict[str, GroupSummary] = {}
    slacks: dict[str, list[float]] = {}
    for r in records:
        name = r[key]
        g = groups.setdefault(name, GroupSummary())
        g.trials += 1
        if "guarantee" in r:
            applicable = r["guarantee"]["applicable"]
            passed = r["guarantee"]["passed"]
            slack = r["guarantee"]["slack"]
        else:
            applicable, passed, slack = True, r["passed"], r["slack"]
        if not applicable:
            continue
        g.applicable += 1
        g.passes += int(passed)
        slacks.setdefault(name, []).append(slack)
        if g.min_slack is None or slack < g.min_slack:
            g.min_slack = slack
            g.worst_digest = r["inputs_digest"]
    for name, values in slacks.items():
        groups[name].mean_slack = float(np.mean(values))
    return groups


def _budget_table(records: Iterable[dict[str, Any]]) -> dict[str, dict[str, Any]]:
    table = {}
    for r in records:
        b = r["budget"]
        key = f"{'x'.join(map(str, b['dims']))}@{b['target']:g}"
        table[key] = {
            "formula_name": b["formula_name"],
            "n": b["n"],
            "proof_copies": r["aux"].get("proof_copies"),
        }
    return table


def _version() -> str:
    from qmclab import __version__

    return __version__


def _write(cfg: CampaignConfig, records: list[dict[str, Any]], summary: CampaignSummary):
    if cfg.out is None:
        return
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        for r in records:
            f.write(dump_record(r) + "\n")
    Path(f"{cfg.out}.summary.json").write_text(
        json.dumps(summary.to_json(), indent=2, sort_keys=True, default=_jsonable) + "\n"
    )


def run_campaign(cfg: CampaignConfig) -> CampaignSummary:
    """
    Executes a campaign and writes its detail stream and summary.

    Parameters
    ----------
    cfg: CampaignConfig
        The campaign. Validated before anything runs.

    Returns
    -------
    CampaignSummary: Per-bound or per-protocol aggregates. exit_code is 2 when any
    applicable trial failed.
    """
    cfg.validate()
    start = time.perf_counter()
    config_echo = {k: v for k, v in asdict(cfg).items()}
    config_echo["dims"] = list(cfg.dims)
    config_echo["bounds"] = list(cfg.bounds)

    if cfg.command == "budget":
        target = cfg.delta if cfg.delta is not None else cfg.eps
        budget = sample_budget(cfg.formula, cfg.dims, target, cfg.constants)
        summary = CampaignSummary(
            cfg.command, {}, time.perf_counter() - start, _version(), config_echo,
            result=budget.to_json(),
        )
        _write(cfg, [budget.to_json()], summary)
        return summary

    if cfg.command == "gen-state":
        rng = np.random.default_rng(trial_seed(cfg.seed, 0))
        if len(cfg.dims) == 3:
            rho = random_qmc(cfg.dims, None, rng)
        else:
            rho = random_markov_chain(cfg.dims, rng)
        path = cfg.state or cfg.out
        save_state(path, rho)
        logger.info(f"Wrote a Markov chain on {rho.dims} to {path}")
        return CampaignSummary(
            cfg.command, {}, time.perf_counter() - start, _version(), config_echo,
            result={"path": str(path), "dims": list(rho.dims)},
        )

    if cfg.command == "verify-bounds":
        names = bound_names()
        selected = [n for n in names if not cfg.bounds or n in cfg.bounds]
        jobs = [
            (cfg, name, names.index(name), trial)
            for name in selected
            for trial in range(cfg.trials)
        ]
        key = "bound_name"
    else:
        jobs = [(cfg, None, 0, trial) for trial in range(cfg.trials)]
        key = "protocol_name"

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            records = list(ex.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        records = [_run_job(job) for job in jobs]

    groups = _summarize(records, key)
    summary = CampaignSummary(
        cfg.command,
        groups,
        time.perf_counter() - start,
        _version(),
        config_echo,
        budgets=_budget_table(records) if cfg.command in PROTOCOL_COMMANDS else {},
    )
    for name, g in groups.items():
        if g.failures:
            logger.warning(f"{name}: {g.failures} of {g.applicable} applicable trials failed")
    _write(cfg, records, summary)
    return summary
