"""``bandlab`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime or numerical error.
Failures print exactly one line ``bandlab: error[<kind>]: <message>`` to stderr.
"""
import argparse
import logging
import os
import sys
from datetime import datetime, timezone

from . import __version__
from .config import parse_config
from .errors import BandlabError, ConfigError
from .experiments import run_experiment
from .records import write_manifest, write_results
from .selftest import failed

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

SUBCOMMANDS = {
    "sample": "sample",
    "decay": "decay",
    "fluctuations": "fluctuations",
    "lemma21": "lemma21",
    "lemma22": "lemma22",
    "decompose": "decomposition",
    "conjecture": "conjecture_scan",
    "selftest": "selftest",
}

SELFTEST_DEFAULTS = {"M_list": [1, 2, 4], "N_list": [2, 3, 5], "replicas": 20, "master_seed": 0}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    parser = _Parser(prog="bandlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bandlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=_u64, help="override master_seed")
        p.add_argument("--replicas", type=_positive, help="override replicas")
        p.add_argument("--out", help="override output_dir")
        p.add_argument("--workers", type=_positive,
                       help="worker processes (default: $BANDLAB_WORKERS or 1)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _workers(args):
    if args.workers is not None:
        return args.workers
    env = os.environ.get("BANDLAB_WORKERS")
    if env is None:
        return 1
    try:
        value = int(env)
    except ValueError:
        raise ConfigError(f"BANDLAB_WORKERS={env!r} is not an integer", field="workers")
    if value < 1:
        raise ConfigError("BANDLAB_WORKERS must be >= 1", field="workers")
    return value


def _fail(kind, message, code):
    text = " ".join(str(message).split())
    print(f"bandlab: error[{kind}]: {text}", file=sys.stderr)
    return code


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run(args):
    kind = SUBCOMMANDS[args.command]
    overrides = {"master_seed": args.seed, "replicas": args.replicas, "output_dir": args.out}
    if args.config is None:
        if kind != "selftest":
            raise ConfigError("--config is required for this subcommand", field="config")
        overrides = {**SELFTEST_DEFAULTS, **{k: v for k, v in overrides.items() if v is not None}}
    cfg = parse_config(args.config, kind=kind, overrides=overrides)
    workers = _workers(args)

    started = _now()
    result = run_experiment(cfg, workers=workers)
    experiments = [kind] if kind == "selftest" else [kind, f"{kind}_summary"]
    paths = write_results(result.all_records(), cfg.output_dir, experiments=experiments)
    manifest = {
        "tool": "bandlab",
        "version": __version__,
        "config": cfg.to_json_dict(),
        "master_seed": cfg.master_seed,
        "workers": workers,
        "started": started,
        "finished": _now(),
        "files": [p.name for p in paths],
        "exclusions": result.exclusions,
    }
    manifest_path = write_manifest(manifest, cfg.output_dir)
    for p in paths:
        print(p)
    print(manifest_path)

    if kind == "selftest":
        bad = failed(result.records)
        if bad:
            return _fail("selftest", "failed checks: " + ", ".join(bad), EXIT_RUNTIME)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return _fail("usage", exc, EXIT_CONFIG)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (BandlabError, ArithmeticError, ValueError, OSError) as exc:
        return _fail("runtime", exc, EXIT_RUNTIME)
