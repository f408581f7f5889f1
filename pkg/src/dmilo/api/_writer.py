import argparse
from typing import Iterable, List, Optional, Union

from seppl import PluginWithLogging
from wai.logging import LOGGING_WARNING

from ._solver import RunReport

CSV_COLUMNS = ["trial", "seed", "solver", "task", "mse", "psnr", "ssim", "residual_init", "residual_final",
               "context_peak", "wall_ms"]


class TrialRecord(object):
    """
    The outcome of a single trial: either a report or the error that stopped it.
    """

    def __init__(self, trial: int, seed: int, solver: str, task: str, report: Optional[RunReport] = None,
                 error: str = None, label: str = None):
        self.trial = trial
        self.seed = seed
        self.solver = solver
        self.task = task
        self.report = report
        self.error = error
        self.label = label

    @property
    def failed(self) -> bool:
        return self.report is None

    def to_row(self, record_time: bool = True) -> List[str]:
        """
        Returns the CSV row, following CSV_COLUMNS.

        :param record_time: whether to output the wall time (0 otherwise)
        :type record_time: bool
        :return: the row
        :rtype: list
        """
        if self.report is None:
            return [str(self.trial), str(self.seed), self.solver, self.task] + [""] * (len(CSV_COLUMNS) - 4)
        r = self.report
        m = r.metrics
        return [
            str(self.trial),
            str(self.seed),
            self.solver,
            self.task,
            "" if m is None else "%.12g" % m.mse,
            "" if m is None else (m.psnr if isinstance(m.psnr, str) else "%.12g" % m.psnr),
            "" if (m is None) or (m.ssim is None) else "%.12g" % m.ssim,
            "%.12g" % r.residual_init,
            "%.12g" % r.residual_final,
            str(r.context_peak),
            ("%.3f" % r.wall_ms) if record_time else "0",
        ]

    def to_dict(self, record_time: bool = True) -> dict:
        result = {
            "trial": self.trial,
            "seed": self.seed,
            "solver": self.solver,
            "task": self.task,
        }
        if self.label is not None:
            result["label"] = self.label
        if self.report is not None:
            result["report"] = self.report.to_dict()
            if not record_time:
                result["report"]["wall_ms"] = 0.0
        if self.error is not None:
            result["error"] = self.error
        return result


class ResultWriter(PluginWithLogging):
    """
    Ancestor for writers that persist trial records. Call sequence: initialize, write (repeatedly), finalize.
    """

    def __init__(self, output_file: str = None, record_time: bool = None,
                 logger_name: str = None, logging_level: str = LOGGING_WARNING):
        """
        Initializes the writer.

        :param output_file: the file to write to
        :type output_file: str
        :param record_time: whether to output wall times (zeroed otherwise, for reproducible files)
        :type record_time: bool
        :param logger_name: the name to use for the logger
        :type logger_name: str
        :param logging_level: the logging level to use
        :type logging_level: str
        """
        super().__init__(logger_name=logger_name, logging_level=logging_level)
        self.output_file = output_file
        self.record_time = record_time
        self.config = None
        self.config_hash = None
        self.summary = None
        self._records = None

    def _create_argparser(self) -> argparse.ArgumentParser:
        """
        Creates an argument parser. Derived classes need to fill in the options.

        :return: the parser
        :rtype: argparse.ArgumentParser
        """
        parser = super()._create_argparser()
        parser.add_argument("-o", "--output_file", type=str, metavar="FILE", help="The file to write the results to.", required=True)
        parser.add_argument("--record_time", action="store_true", help="Whether to output the wall times.", required=False)
        return parser

    def _apply_args(self, ns: argparse.Namespace):
        """
        Initializes the object with the arguments of the parsed namespace.

        :param ns: the parsed arguments
        :type ns: argparse.Namespace
        """
        super()._apply_args(ns)
        self.output_file = ns.output_file
        self.record_time = ns.record_time

    def set_experiment(self, config: dict, config_hash: str):
        """
        Sets the configuration that the records belong to.

        :param config: the fully defaulted configuration
        :type config: dict
        :param config_hash: the hash of the configuration
        :type config_hash: str
        """
        self.config = config
        self.config_hash = config_hash

    def set_summary(self, summary: dict):
        self.summary = summary

    def initialize(self):
        """
        Initializes the writing.
        """
        if self.output_file is None:
            raise ValueError("No output file provided!")
        if self.record_time is None:
            self.record_time = False
        self._records = []

    def write(self, records: Union[TrialRecord, Iterable[TrialRecord]]):
        """
        Buffers the records.

        :param records: the record(s) to write
        """
        if isinstance(records, TrialRecord):
            records = [records]
        self._records.extend(records)

    def _flush(self, records: List[TrialRecord]):
        raise NotImplementedError()

    def finalize(self):
        """
        Writes all buffered records to the output file.
        """
        self._flush(self._records)
        self.logger().info("%d record(s) written to: %s" % (len(self._records), self.output_file))
        self._records = []
