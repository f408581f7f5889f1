import csv
from typing import List

from dmilo.api import ResultWriter, TrialRecord, CSV_COLUMNS


class ToCsv(ResultWriter):

    def name(self) -> str:
        """
        Returns the name of the handler, used as sub-command.

        :return: the name
        :rtype: str
        """
        return "to-csv"

    def description(self) -> str:
        """
        Returns a description of the writer.

        :return: the description
        :rtype: str
        """
        return "Writes one summary row per trial to a CSV file: " + ", ".join(CSV_COLUMNS) + "."

    def _flush(self, records: List[TrialRecord]):
        """
        Writes the header and the rows.

        :param records: the records to write
        :type records: list
        """
        with open(self.output_file, "w", newline="") as fp:
            writer = csv.writer(fp)
            writer.writerow(CSV_COLUMNS)
            for record in records:
                writer.writerow(record.to_row(record_time=self.record_time))
