import argparse
import json
import logging
import os
import sys
import traceback
from typing import List

from wai.logging import init_logging, set_logging_level, add_logging_level

from dmilo.api import ExperimentConfig, ConfigurationError, load_config
from dmilo.harness import run_experiment, ablate, parse_values, report
from dmilo.theory import verify_theory, STATUS_PASS

LAB = "dmilo-lab"

ENV_DMILO_LOGLEVEL = "DMILO_LOGLEVEL"

THEORY_JSON = "theory.json"

EXIT_SUCCESS = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUN_FAILURE = 2

_logger = None


def _get_logger() -> logging.Logger:
    """
    Returns the logger instance to use, initializes it if necessary.

    :return: the logger instance
    :rtype: logging.Logger
    """
    global _logger
    if _logger is None:
        _logger = logging.getLogger(LAB)
    return _logger


def _add_overrides(parser: argparse.ArgumentParser):
    parser.add_argument("config", type=str, help="The JSON experiment configuration.")
    parser.add_argument("--trials", type=int, help="Overrides the number of trials.", required=False, default=None)
    parser.add_argument("--seed", type=int, help="Overrides the master seed.", required=False, default=None)
    parser.add_argument("--out", type=str, metavar="DIR", help="Overrides the output directory.", required=False, default=None)


def _create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Laboratory for diffusion-prior inverse problem solvers based on intermediate layer optimization.",
        prog=LAB,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    add_logging_level(parser, short_opt="-l", long_opt="--logging_level")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("solve", help="Runs all trials of an experiment and writes results.csv/results.json.")
    _add_overrides(p)

    p = sub.add_parser("verify-theory", help="Runs the theory checks and outputs a JSON report.")
    _add_overrides(p)

    p = sub.add_parser("ablate", help="Runs the experiment once per value of a configuration field.")
    _add_overrides(p)
    p.add_argument("--axis", type=str, metavar="FIELD", help="The dotted field to vary, e.g., solver.sparse_deviation", required=True)
    p.add_argument("--values", type=str, metavar="LIST", help="The comma-separated values, e.g., on,off", required=True)

    p = sub.add_parser("report", help="Outputs a table with one row per solver kind.")
    p.add_argument("results", type=str, nargs="+", help="The results.json file(s) to summarize.")
    return parser


def _load(ns: argparse.Namespace) -> ExperimentConfig:
    """
    Loads the configuration and applies the command-line overrides.
    """
    result = load_config(ns.config)
    if ns.trials is not None:
        result = result.with_value("trials", ns.trials)
    if ns.seed is not None:
        result = result.with_value("seed", ns.seed)
    if ns.out is not None:
        result = result.with_value("output", ns.out)
    return result


def _solve(ns: argparse.Namespace) -> int:
    cfg = _load(ns)
    result = run_experiment(cfg, logging_level=ns.logging_level)
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    if result.failed:
        _get_logger().error("%d trial(s) failed: %s" % (result.summary["failures"], str(result.summary["failed_trials"])))
        return EXIT_RUN_FAILURE
    return EXIT_SUCCESS


def _verify_theory(ns: argparse.Namespace) -> int:
    cfg = _load(ns)
    result = verify_theory(cfg)
    output = json.dumps(result, indent=2, sort_keys=True)
    print(output)
    if cfg.output is not None:
        os.makedirs(cfg.output, exist_ok=True)
        with open(os.path.join(cfg.output, THEORY_JSON), "w") as fp:
            fp.write(output)
    if result["status"] != STATUS_PASS:
        failed = [k for k, v in result["checks"].items() if v["status"] != STATUS_PASS]
        _get_logger().error("Theory check(s) failed: %s" % ", ".join(failed))
        return EXIT_RUN_FAILURE
    return EXIT_SUCCESS


def _ablate(ns: argparse.Namespace) -> int:
    cfg = _load(ns)
    values = parse_values(ns.values)
    if len(values) == 0:
        raise ConfigurationError("No values to sweep for: %s" % ns.axis)
    results = ablate(cfg, ns.axis, values, logging_level=ns.logging_level)
    failed = False
    for value, res in results:
        print("%s=%s: psnr=%s mse=%s failures=%d"
              % (ns.axis, json.dumps(value), str(res.median("psnr")), str(res.median("mse")), res.summary["failures"]))
        failed = failed or res.failed
    return EXIT_RUN_FAILURE if failed else EXIT_SUCCESS


def _report(ns: argparse.Namespace) -> int:
    print(report(ns.results))
    return EXIT_SUCCESS


COMMANDS = {
    "solve": _solve,
    "verify-theory": _verify_theory,
    "ablate": _ablate,
    "report": _report,
}


def main(args: List[str] = None) -> int:
    """
    The main method for parsing command-line arguments.

    :param args: the commandline arguments, uses sys.argv if not supplied
    :type args: list
    :return: the exit code
    :rtype: int
    """
    init_logging(env_var=ENV_DMILO_LOGLEVEL)
    parser = _create_parser()
    try:
        ns = parser.parse_args(args=args)
    except SystemExit as e:
        # argparse exits with 2 on usage errors
        return EXIT_SUCCESS if (e.code in (0, None)) else EXIT_CONFIG_ERROR
    if ns.command not in COMMANDS:
        parser.print_usage(file=sys.stderr)
        return EXIT_CONFIG_ERROR
    set_logging_level(_get_logger(), ns.logging_level)
    set_logging_level(logging.getLogger("dmilo"), ns.logging_level)
    try:
        return COMMANDS[ns.command](ns)
    except ConfigurationError as e:
        _get_logger().error(str(e))
        print("%s: %s" % (LAB, str(e)), file=sys.stderr)
        return EXIT_CONFIG_ERROR


def sys_main() -> int:
    """
    Runs the main function using the system cli arguments, and
    returns a system error code.

    :return: 0 for success, 1 for configuration errors, 2 for failed runs
    :rtype: int
    """
    try:
        return main()
    except Exception:
        traceback.print_exc()
        return EXIT_RUN_FAILURE


if __name__ == '__main__':
    sys.exit(sys_main())
