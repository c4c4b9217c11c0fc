"""
Command-line entry point: ``cmibound-cli <command> [options]``.

Exit codes: 0 success, 1 invariant failure, 2 usage or validation error,
3 resource budget exceeded.
"""
import os
import sys
import argparse
import logging

from dotenv import load_dotenv

from plugins.common.errors import BoundError, ValidationError, InvariantViolation, ResourceExceededError
from plugins.common.logging_config import configure_logging
from plugins.common.serialization import dumps, read_json, write_json
from plugins.baselines.baselines import BASELINE_KINDS
from plugins.registry import PLUGINS, invoke

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3

EXPERIMENT_COMMANDS = ("ld-bound", "compare", "theta-opt")
INFO_COMMANDS = ("fano", "improved-constant", "lipschitz")


def parse_baselines(text):
    """'all', 'none' or a comma-separated list of baseline names."""
    if text is None:
        return None
    text = text.strip()
    if text == "all":
        return list(BASELINE_KINDS)
    if text in ("none", ""):
        return []
    return [name.strip() for name in text.split(",") if name.strip()]


def _add_experiment_flags(parser):
    parser.add_argument("--config", help="Experiment config JSON")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--threads", type=int, help="Worker threads")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--theta", help="Decision function, e.g. erf:2.5, tanh:1, sign, constant-half")
    parser.add_argument("--baselines", help="'all', 'none' or a comma-separated list")
    parser.add_argument("--dump-trajectories", action="store_true",
                        help="Write every trajectory under <out>/trajectories")
    parser.add_argument("--records-csv", action="store_true",
                        help="Write per-step records (t, ‖ζ‖², ΔY, θ, squared test error, KL)")


def build_parser():
    parser = argparse.ArgumentParser(prog="cmibound-cli",
                                     description="Information-theoretic generalization bounds")
    parser.add_argument("--log-level", default=None, help="Logging level (default CMIBOUND_LOG_LEVEL or INFO)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    exact = subparsers.add_parser("verify-exact", help=PLUGINS["verify-exact"]["description"])
    exact.add_argument("--config", help="Problem config JSON (defaults to the identity instance)")
    exact.add_argument("--k", type=int, help="Supersample rows for CMI^k")
    exact.add_argument("--bits", action="store_true", help="Report information in bits as well")
    exact.add_argument("--out", help="Write the report JSON into this directory")

    for name in EXPERIMENT_COMMANDS:
        _add_experiment_flags(subparsers.add_parser(name, help=PLUGINS[name]["description"]))

    info = subparsers.add_parser("info", help="Evaluate closed-form bounds")
    formulas = info.add_subparsers(dest="formula", required=True)
    fano = formulas.add_parser("fano", help=PLUGINS["fano"]["description"])
    fano.add_argument("--cmi", type=float, required=True)
    fano.add_argument("--n", type=int, required=True)
    fano.add_argument("--k", type=int, default=2)
    improved = formulas.add_parser("improved-constant", help=PLUGINS["improved-constant"]["description"])
    improved.add_argument("--cmi", type=float, required=True)
    improved.add_argument("--n", type=int, required=True)
    improved.add_argument("--k", type=int, default=3)
    lipschitz = formulas.add_parser("lipschitz", help=PLUGINS["lipschitz"]["description"])
    lipschitz.add_argument("--L", type=float, required=True)
    lipschitz.add_argument("--n", type=int, required=True)
    lipschitz.add_argument("--T", type=int, default=500)
    lipschitz.add_argument("--eta", type=float, default=0.01)
    lipschitz.add_argument("--beta", type=float, default=1e4)

    subparsers.add_parser("list", help="List available commands")
    return parser


def _load_config(path):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ValidationError(f"Config file not found: {path}")
    try:
        config = read_json(path)
    except ValueError as e:
        raise ValidationError(f"Malformed JSON in {path}", param_info=str(e))
    if not isinstance(config, dict):
        raise ValidationError(f"Config in {path} must be a JSON object")
    return config


def command_params(args):
    """Translate parsed arguments into registry parameters."""
    if args.command == "verify-exact":
        config = _load_config(args.config)
        params = dict(config) if "problem" in config else ({"problem": config} if config else {})
        if args.k is not None:
            params["k"] = args.k
        if args.bits:
            params["bits"] = True
        return args.command, params
    if args.command in EXPERIMENT_COMMANDS:
        return args.command, {
            "config": _load_config(args.config),
            "seed": args.seed,
            "threads": args.threads,
            "out": args.out,
            "theta": args.theta,
            "baselines": parse_baselines(args.baselines),
            "dump_trajectories": args.dump_trajectories,
            "records_csv": args.records_csv,
        }
    if args.formula == "fano":
        return "fano", {"cmi": args.cmi, "n": args.n, "k": args.k}
    if args.formula == "improved-constant":
        return "improved-constant", {"cmi": args.cmi, "n": args.n, "k": args.k}
    return "lipschitz", {"L": args.L, "n": args.n, "T": args.T, "eta": args.eta, "beta": args.beta}


def _emit(result, out_dir=None, name=None):
    log = result.pop("log", "")
    if log:
        print(log, file=sys.stderr)
    if out_dir and name:
        write_json(os.path.join(out_dir, name), result)
    sys.stdout.write(dumps(result).decode() + "\n")


def main(argv=None):
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    configure_logging(level=args.log_level)

    if args.command == "list":
        for key, plugin in PLUGINS.items():
            print(f"{key:<18} {plugin['description']}")
        return EXIT_OK

    try:
        key, params = command_params(args)
        result = invoke(key, params)
    except InvariantViolation as e:
        logger.error(f"Invariant failure: {e.describe()}")
        print(f"invariant failed: {e.invariant}", file=sys.stderr)
        return EXIT_INVARIANT
    except ResourceExceededError as e:
        logger.error(f"Resource limit: {e.describe()}")
        return EXIT_RESOURCE
    except ValidationError as e:
        logger.error(f"Invalid input: {e.describe()}")
        return EXIT_USAGE
    except BoundError as e:
        logger.error(e.describe())
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"I/O error on {e.filename}: {e.strerror}")
        return EXIT_USAGE

    out_dir = args.out if args.command == "verify-exact" else None
    _emit(result, out_dir, "verify_exact.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
