import logging
import os
import traceback
from typing import List, Optional

import numpy as np

from dmilo.api import ExperimentConfig, TrialRecord, RunReport, LabError, GmmDenoiser, Schedule, GmmPrior, \
    ForwardOperator, sample_prior, sample_compose, add_noise, compute_metrics, SOURCE_RANGE, PSNR_INF, \
    DEFAULT_L2_WEIGHT
from ._registry import solver_from_config, writer_class

_logger = logging.getLogger("dmilo.harness")

SUMMARY_METRICS = ["mse", "psnr", "ssim", "residual_init", "residual_final", "context_peak", "nfe", "wall_ms"]

RESULTS_CSV = "results.csv"
RESULTS_JSON = "results.json"


def derive_seed(*entropy: int) -> int:
    """
    Derives an independent 32-bit seed from a tuple of integers.
    """
    return int(np.random.SeedSequence([int(e) for e in entropy]).generate_state(1)[0])


def trial_seed(master_seed: int, trial: int) -> int:
    """
    The seed of a trial, depending only on the master seed and the trial index.
    """
    return derive_seed(master_seed, trial)


class TrialProblem(object):
    """
    Ground truth, operator and measurement of one trial.
    """

    def __init__(self, xstar: np.ndarray, operator: ForwardOperator, y: np.ndarray, spikes: np.ndarray = None):
        self.xstar = xstar
        self.operator = operator
        self.y = y
        self.spikes = spikes


def add_sparse_spike(x: np.ndarray, count: int, magnitude: float, seed: int) -> np.ndarray:
    """
    Adds +/- magnitude to count distinct coordinates.

    :return: the spike vector that was added
    :rtype: np.ndarray
    """
    rng = np.random.default_rng(seed)
    spike = np.zeros_like(x)
    idx = rng.choice(len(x), size=count, replace=False)
    spike[idx] = magnitude * rng.choice([-1.0, 1.0], size=count)
    return spike


def make_trial_problem(cfg: ExperimentConfig, seed: int, schedule: Schedule = None,
                       prior: GmmPrior = None) -> TrialProblem:
    """
    Draws the ground truth (from the prior or from the range of the sampler), adds the optional sparse spike and
    synthesizes the noisy measurement.

    :param cfg: the configuration
    :type cfg: ExperimentConfig
    :param seed: the trial seed
    :type seed: int
    :return: the problem
    :rtype: TrialProblem
    """
    if schedule is None:
        schedule = cfg.build_schedule()
    if prior is None:
        prior = cfg.build_prior()
    t = cfg.task
    if t["source"] == SOURCE_RANGE:
        latent = np.random.default_rng(derive_seed(seed, 0)).standard_normal(prior.n)
        xstar, _ = sample_compose(schedule, GmmDenoiser(prior, schedule), latent)
    else:
        xstar = sample_prior(prior, derive_seed(seed, 0), 1)[0]
    spikes = None
    if t["spike_count"] > 0:
        spikes = add_sparse_spike(xstar, t["spike_count"], t["spike_magnitude"], derive_seed(seed, 1))
        xstar = xstar + spikes
    operator = cfg.build_operator(derive_seed(seed, 2))
    y = add_noise(operator.apply(xstar), t["sigma"], derive_seed(seed, 3))
    return TrialProblem(xstar, operator, y, spikes=spikes)


def run_trial(cfg: ExperimentConfig, trial: int, logging_level: str = None) -> TrialRecord:
    """
    Runs a single trial; errors are recorded rather than raised.

    :param cfg: the configuration
    :type cfg: ExperimentConfig
    :param trial: the trial index
    :type trial: int
    :param logging_level: the logging level for the solver
    :type logging_level: str
    :return: the record
    :rtype: TrialRecord
    """
    seed = trial_seed(cfg.seed, trial)
    record = TrialRecord(trial, seed, cfg.solver["kind"], cfg.task["kind"])
    try:
        schedule = cfg.build_schedule()
        prior = cfg.build_prior()
        problem = make_trial_problem(cfg, seed, schedule=schedule, prior=prior)
        solver = solver_from_config(cfg, derive_seed(seed, 4, cfg.solver["seed"]), logging_level=logging_level)
        report = solver.solve(problem.y, problem.operator, schedule, GmmDenoiser(prior, schedule))
        report.metrics = compute_metrics(report.estimate, problem.xstar, peak=cfg.task["peak"],
                                         layout=cfg.task["layout"], grid=cfg.task["grid"],
                                         residual=report.residual_final)
        if report.metrics.empirical_peak:
            report.flags.append("empirical_peak")
        if cfg.optim["l2_weight"] == DEFAULT_L2_WEIGHT:
            report.flags.append("default_l2_weight")
        report.config = solver.options()
        report.config_hash = cfg.hash()
        record.report = report
    except LabError as e:
        _logger.error("Trial %d failed: %s" % (trial, str(e)))
        record.error = "%s: %s" % (e.__class__.__name__, str(e))
    except Exception as e:
        _logger.error("Trial %d failed:\n%s" % (trial, traceback.format_exc()))
        record.error = "%s: %s" % (e.__class__.__name__, str(e))
    return record


def _metric_value(report: RunReport, name: str) -> Optional[float]:
    if name in ("mse", "psnr", "ssim"):
        if report.metrics is None:
            return None
        value = getattr(report.metrics, name)
        if value == PSNR_INF:
            return float("inf")
        return value
    if name == "residual_final":
        return report.residual_final
    return getattr(report, name)


def _finite_or_none(v: float) -> Optional[float]:
    if np.isnan(v):
        return None
    return float(v)


def summarize(records: List[TrialRecord], record_time: bool = True) -> dict:
    """
    Median and interquartile range per metric over the successful trials.

    :param records: the trial records
    :type records: list
    :param record_time: whether to include the wall time
    :type record_time: bool
    :return: the summary
    :rtype: dict
    """
    reports = [r.report for r in records if not r.failed]
    result = {
        "trials": len(records),
        "failures": len(records) - len(reports),
        "failed_trials": [r.trial for r in records if r.failed],
        "metrics": dict(),
        "flags": sorted(set(f for rep in reports for f in rep.flags)),
    }
    for name in SUMMARY_METRICS:
        if (name == "wall_ms") and not record_time:
            continue
        values = [_metric_value(rep, name) for rep in reports]
        values = [v for v in values if v is not None]
        if len(values) == 0:
            continue
        with np.errstate(invalid="ignore"):
            q1, median, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
            iqr = q3 - q1
        result["metrics"][name] = {
            "median": _finite_or_none(median),
            "q1": _finite_or_none(q1),
            "q3": _finite_or_none(q3),
            "iqr": _finite_or_none(iqr),
        }
    return result


class ExperimentResult(object):
    """
    The records and summary of a batch of trials.
    """

    def __init__(self, cfg: ExperimentConfig, records: List[TrialRecord], summary: dict):
        self.config = cfg
        self.records = records
        self.summary = summary

    @property
    def failed(self) -> bool:
        return self.summary["failures"] > 0

    def median(self, metric: str) -> Optional[float]:
        m = self.summary["metrics"].get(metric, None)
        return None if m is None else m["median"]

    def reports(self) -> List[RunReport]:
        return [r.report for r in self.records if not r.failed]


def write_results(result: ExperimentResult, output_dir: str, logging_level: str = None):
    """
    Writes results.csv and results.json to the output directory.

    :param result: the result to write
    :type result: ExperimentResult
    :param output_dir: the directory
    :type output_dir: str
    """
    os.makedirs(output_dir, exist_ok=True)
    kwargs = dict()
    if logging_level is not None:
        kwargs["logging_level"] = logging_level
    for name, filename in [("to-csv", RESULTS_CSV), ("to-json", RESULTS_JSON)]:
        writer = writer_class(name)(output_file=os.path.join(output_dir, filename),
                                    record_time=result.config.record_time, **kwargs)
        writer.set_experiment(result.config.to_dict(), result.config.hash())
        writer.set_summary(result.summary)
        writer.initialize()
        writer.write(result.records)
        writer.finalize()


def run_experiment(cfg: ExperimentConfig, output_dir: str = None, logging_level: str = None,
                   write: bool = True) -> ExperimentResult:
    """
    Runs all trials of the configuration and writes the results if an output directory is available
    (argument or the output field of the configuration).

    :param cfg: the configuration
    :type cfg: ExperimentConfig
    :param output_dir: the directory for results.csv/results.json, overrides the configuration
    :type output_dir: str
    :param logging_level: the logging level for the plugins
    :type logging_level: str
    :param write: whether to write the results at all
    :type write: bool
    :return: the result
    :rtype: ExperimentResult
    """
    _logger.info("Running %d trial(s): %s" % (cfg.trials, str(cfg)))
    records = [run_trial(cfg, trial, logging_level=logging_level) for trial in range(cfg.trials)]
    result = ExperimentResult(cfg, records, summarize(records, record_time=cfg.record_time))
    if result.failed:
        _logger.warning("%d of %d trial(s) failed" % (result.summary["failures"], cfg.trials))
    if output_dir is None:
        output_dir = cfg.output
    if write and (output_dir is not None):
        write_results(result, output_dir, logging_level=logging_level)
    return result
