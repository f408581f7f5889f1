from ._to_csv import ToCsv
from ._to_json import ToJson
