"""
Command-line entry point.

Exit codes: 0 when every applicable trial passed, 2 when a bound or guarantee
failed, 1 on usage or runtime errors.
"""

import argparse
import json
import logging
import sys

from qmclab.campaign import COMMANDS, CampaignConfig, run_campaign
from qmclab.errors import ConfigError, QmclabError


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _name_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _constants(text: str) -> dict[str, float]:
    out = {}
    for item in _name_list(text):
        key, sep, value = item.partition("=")
        try:
            if not sep:
                raise ValueError
            out[key.strip()] = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected key=value pairs, got {item!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qmclab",
        description="Bound-verification and protocol-simulation campaigns for "
        "quantum Markov chains.",
    )
    ap.add_argument("--command", required=True, choices=COMMANDS)
    ap.add_argument("--dims", type=_int_list, default=(2, 2, 2), help="a,b,c[,...]")
    ap.add_argument("--trials", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--delta", type=float, default=None, help="infidelity target")
    ap.add_argument("--eps", type=float, default=None, help="trace-distance target")
    ap.add_argument("--bounds", type=_name_list, default=(), help="name[,name...]")
    ap.add_argument("--stress", action="store_true")
    ap.add_argument("--tol", type=float, default=None)
    ap.add_argument("--out", default=None, help="JSON-lines detail stream")
    ap.add_argument("--state", default=None, help="state file to write or read")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--formula", default=None, help="formula of the budget command")
    ap.add_argument("--constants", type=_constants, default={}, help="k=v[,k=v...]")
    ap.add_argument("--rank", type=int, default=None)
    ap.add_argument("--failure-prob", type=float, default=None)
    ap.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    return ap


def config_from_args(args: argparse.Namespace) -> CampaignConfig:
    return CampaignConfig(
        command=args.command,
        dims=tuple(args.dims),
        trials=args.trials,
        seed=args.seed,
        delta=args.delta,
        eps=args.eps,
        bounds=tuple(args.bounds),
        out=args.out,
        stress=args.stress,
        tol=args.tol,
        state=args.state,
        workers=args.workers,
        formula=args.formula,
        constants=dict(args.constants),
        rank=args.rank,
        failure_prob=args.failure_prob,
    )


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        summary = run_campaign(config_from_args(args))
    except ConfigError as e:
        print(f"qmclab: invalid configuration: {e}", file=sys.stderr)
        return 1
    except (QmclabError, OSError) as e:
        print(f"qmclab: {e}", file=sys.stderr)
        return 1

    if args.command == "budget":
        print(summary.result["n"])
    else:
        print(json.dumps(summary.to_json(), indent=2, sort_keys=True, default=str))
    return summary.exit_code


if __name__ == "__main__":
    sys.exit(main())
