import json
from typing import List

from dmilo.api import ResultWriter, TrialRecord


class ToJson(ResultWriter):

    def name(self) -> str:
        """
        Returns the name of the handler, used as sub-command.

        :return: the name
        :rtype: str
        """
        return "to-json"

    def description(self) -> str:
        """
        Returns a description of the writer.

        :return: the description
        :rtype: str
        """
        return "Writes the configuration, its hash, the summary and the full report of every trial to a JSON file."

    def _flush(self, records: List[TrialRecord]):
        """
        Writes all records as a single JSON document.

        :param records: the records to write
        :type records: list
        """
        data = {
            "config": self.config,
            "config_hash": self.config_hash,
            "summary": self.summary,
            "trials": [r.to_dict(record_time=self.record_time) for r in records],
        }
        with open(self.output_file, "w") as fp:
            json.dump(data, fp, indent=2, sort_keys=True)
