import copy
import hashlib
import json
import logging
import os
from typing import List

import numpy as np

from dmilo.api import ConfigurationError

_logger = logging.getLogger("dmilo.harness.report")

REPORT_COLUMNS = ["solver", "trials", "failures", "mse", "psnr", "ssim", "residual_final", "nfe", "context_peak"]


def load_results(path: str) -> dict:
    """
    Loads a results.json file.

    :param path: the file to load
    :type path: str
    :return: the results
    :rtype: dict
    """
    if not os.path.exists(path):
        raise ConfigurationError("Results file not found: %s" % path)
    try:
        with open(path, "r") as fp:
            data = json.load(fp)
    except json.JSONDecodeError as e:
        raise ConfigurationError("Invalid JSON in %s: %s" % (path, str(e)))
    for key in ["config", "config_hash", "trials"]:
        if key not in data:
            raise ConfigurationError("Results file %s lacks '%s'" % (path, key))
    return data


def problem_hash(config: dict) -> str:
    """
    Hash of a configuration without its solver block; results of different solvers on the same problem share it.
    """
    d = copy.deepcopy(config)
    d.pop("solver", None)
    d.pop("output", None)
    return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()


def check_consistency(results: List[dict]):
    """
    Rejects files whose trials echo different config hashes, and files that do not describe the same problem.

    :param results: the loaded result files
    :type results: list
    """
    problems = set()
    for data in results:
        for trial in data["trials"]:
            report = trial.get("report", None)
            if (report is not None) and (report.get("config_hash", None) != data["config_hash"]):
                raise ConfigurationError("Trial %s echoes config hash %s, file has %s"
                                         % (str(trial["trial"]), str(report.get("config_hash")), data["config_hash"]))
        problems.add(problem_hash(data["config"]))
    if len(problems) > 1:
        raise ConfigurationError("Results stem from %d different problem configurations" % len(problems))


def _median(values: list) -> str:
    values = [v for v in values if v is not None]
    if len(values) == 0:
        return "-"
    values = [float("inf") if v == "inf" else v for v in values]
    return "%.4g" % float(np.median(values))


def report_rows(results: List[dict]) -> List[List[str]]:
    """
    Aggregates the trials per solver kind (medians over the successful trials).

    :param results: the loaded result files
    :type results: list
    :return: the rows, following REPORT_COLUMNS
    :rtype: list
    """
    check_consistency(results)
    trials = dict()
    for data in results:
        for trial in data["trials"]:
            trials.setdefault(trial["solver"], []).append(trial)
    rows = []
    for solver in sorted(trials):
        items = trials[solver]
        reports = [t["report"] for t in items if "report" in t]
        metrics = [r.get("metrics", dict()) for r in reports]
        rows.append([
            solver,
            str(len(items)),
            str(len(items) - len(reports)),
            _median([m.get("mse") for m in metrics]),
            _median([m.get("psnr") for m in metrics]),
            _median([m.get("ssim") for m in metrics]),
            _median([r["residual_final"] for r in reports]),
            _median([r["nfe"] for r in reports]),
            _median([r["context_peak"] for r in reports]),
        ])
    return rows


def format_table(rows: List[List[str]], columns: List[str] = None) -> str:
    """
    Formats the rows as fixed-width text table.

    :param rows: the rows
    :type rows: list
    :param columns: the header
    :type columns: list
    :return: the table
    :rtype: str
    """
    if columns is None:
        columns = REPORT_COLUMNS
    widths = [len(c) for c in columns]
    for row in rows:
        widths = [max(w, len(v)) for w, v in zip(widths, row)]
    lines = [
        "  ".join(c.ljust(w) for c, w in zip(columns, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)


def report(paths: List[str]) -> str:
    """
    Loads result files and returns the table with one row per solver kind.

    :param paths: the results.json files
    :type paths: list
    :return: the table
    :rtype: str
    """
    results = [load_results(p) for p in paths]
    return format_table(report_rows(results))
