"""Command line entry point: ``concentrate run`` and ``concentrate exact``.

Exit status: 0 on success (or a passing verdict with ``--check``), 1 when
``--check`` is given and the verdict is "fail", 2 for usage or output errors.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys

from .errors import ConcentrationError
from .harness import CampaignConfig, PROTOCOL_IDS, emit_report, run_campaign, run_exact

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

# config-file key -> value parser
_KEYS = {
    "protocol": str,
    "alpha_sq": float,
    "trials": int,
    "seed": int,
    "rounds": int,
    "parties": int,
    "method": str,
    "actor": str,
    "check_tolerance_sigma": float,
    "format": str,
    "out": str,
    "check": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
    "workers": int,
}
_CONFIG_FIELDS = (
    "protocol", "alpha_sq", "trials", "seed", "rounds", "parties", "method", "actor",
    "check_tolerance_sigma",
)
_NOT_FOR_EXACT = ("trials", "seed", "workers")


class _UsageProblem(Exception):
    pass


def read_config_file(path: str) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments) into typed values."""
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None,
    )
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_string("[config]\n" + handle.read(), source=path)
    except (OSError, configparser.Error) as exc:
        raise _UsageProblem(f"cannot read config file {path}: {exc}") from None
    if parser.sections() != ["config"]:
        raise _UsageProblem(f"{path}: section headers are not allowed in a flat config file")
    values = {}
    for raw_key, raw_value in parser["config"].items():
        key = raw_key.strip().replace("-", "_")
        if key not in _KEYS:
            raise _UsageProblem(f"{path}: unknown key {raw_key!r}")
        try:
            values[key] = _KEYS[key](raw_value.strip())
        except ValueError:
            raise _UsageProblem(f"{path}: bad value for {raw_key}: {raw_value!r}") from None
    return values


def _add_common(sub: argparse.ArgumentParser, sampled: bool) -> None:
    sub.add_argument("--protocol", choices=PROTOCOL_IDS)
    sub.add_argument("--alpha-sq", dest="alpha_sq", type=float,
                     help="larger squared Schmidt coefficient, in [0.5, 1)")
    if sampled:
        sub.add_argument("--trials", type=int, help="number of trials (pairs for proposal1-iterate)")
        sub.add_argument("--seed", type=int, help="unsigned 64-bit campaign seed")
        sub.add_argument("--workers", type=int, help="threads; never changes results")
    sub.add_argument("--rounds", type=int, help="rounds for proposal1-iterate")
    sub.add_argument("--parties", type=int, help="number of parties for cat")
    sub.add_argument("--method", choices=("proposal1", "proposal2"), help="scheme used for cat")
    sub.add_argument("--actor", help="cat party holding the ancilla")
    sub.add_argument("--sigma", dest="check_tolerance_sigma", type=float,
                     help="z-score tolerance of the statistical verdict (default 4)")
    sub.add_argument("--format", choices=("json", "csv"))
    sub.add_argument("--out", help="output file (default: standard output)")
    sub.add_argument("--check", action="store_true", default=None,
                     help="exit with status 1 when the verdict is fail")
    sub.add_argument("--config", help="flat key=value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="concentrate",
        description="Monte Carlo and exact verification of entanglement concentration protocols.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    _add_common(subs.add_parser("run", help="seeded Monte Carlo campaign"), sampled=True)
    _add_common(subs.add_parser("exact", help="exhaustive branch enumeration"), sampled=False)
    return parser


def _settings(args: argparse.Namespace) -> dict:
    values = read_config_file(args.config) if args.config else {}
    if args.command == "exact":
        for key in _NOT_FOR_EXACT:
            values.pop(key, None)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        values[key] = value
    if "protocol" not in values or "alpha_sq" not in values:
        raise _UsageProblem("--protocol and --alpha-sq are required (as flags or in --config)")
    return values


def _configure_logging() -> None:
    name = os.environ.get("CONCENTRATE_LOG", "error").strip().lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.ERROR, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if level is None:
        logging.getLogger(__name__).error("ignoring CONCENTRATE_LOG=%r; use error, info or debug", name)


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        values = _settings(args)
        cfg = CampaignConfig(**{k: values[k] for k in _CONFIG_FIELDS if k in values})
        workers = int(values.get("workers", 1))
        if workers < 1:
            raise _UsageProblem("--workers must be at least 1")
        report = run_campaign(cfg, workers=workers) if args.command == "run" else run_exact(cfg)
        emit_report(report, values.get("format", "json"), values.get("out"))
    except (_UsageProblem, ConcentrationError, ValueError) as exc:
        print(f"concentrate: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"concentrate: cannot write report: {exc}", file=sys.stderr)
        return 2
    if values.get("check") and not report.passed:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
