import json
import logging
import os
from typing import Any, List, Tuple

from dmilo.api import ExperimentConfig
from ._experiment import ExperimentResult, run_experiment, write_results

_logger = logging.getLogger("dmilo.harness.ablate")

ABLATION_JSON = "ablation.json"

VALUE_ALIASES = {
    "on": True,
    "off": False,
    "true": True,
    "false": False,
    "none": None,
    "null": None,
}


def parse_value(s: str) -> Any:
    """
    Parses a command-line value: on/off/true/false/none, JSON numbers/lists or plain strings.

    :param s: the string to parse
    :type s: str
    :return: the value
    """
    if s.lower() in VALUE_ALIASES:
        return VALUE_ALIASES[s.lower()]
    try:
        return json.loads(s)
    except ValueError:
        return s


def parse_values(s: str) -> List[Any]:
    """
    Parses a comma-separated list of values.
    """
    return [parse_value(v.strip()) for v in s.split(",") if len(v.strip()) > 0]


def ablate(cfg: ExperimentConfig, axis: str, values: List[Any], output_dir: str = None,
           logging_level: str = None) -> List[Tuple[Any, ExperimentResult]]:
    """
    Runs the experiment once per value of the field. All variants keep the master seed, so trial i of every
    variant uses the same trial seed (paired rows).

    :param cfg: the base configuration
    :type cfg: ExperimentConfig
    :param axis: the dotted field path, e.g., solver.sparse_deviation
    :type axis: str
    :param values: the values to sweep
    :type values: list
    :param output_dir: the directory for the per-variant results, optional
    :type output_dir: str
    :param logging_level: the logging level for the plugins
    :type logging_level: str
    :return: the (value, result) pairs
    :rtype: list
    """
    if output_dir is None:
        output_dir = cfg.output
    result = []
    for value in values:
        variant = cfg.with_value(axis, value)
        label = "%s=%s" % (axis, json.dumps(value))
        _logger.info("Ablation variant: %s" % label)
        res = run_experiment(variant, logging_level=logging_level, write=False)
        for record in res.records:
            record.label = label
        if output_dir is not None:
            write_results(res, os.path.join(output_dir, "%s=%s" % (axis, str(value))), logging_level=logging_level)
        result.append((value, res))
    if output_dir is not None:
        data = {
            "axis": axis,
            "variants": [{"value": v, "config_hash": r.config.hash(), "summary": r.summary} for v, r in result],
        }
        os.makedirs(output_dir, exist_ok=True)
        with open(os.path.join(output_dir, ABLATION_JSON), "w") as fp:
            json.dump(data, fp, indent=2, sort_keys=True)
    return result
