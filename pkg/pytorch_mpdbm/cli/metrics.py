import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Sequence, Union

TRAIN_FIELDS = ('epoch', 'train_loss', 'mp_objective', 'validation_error', 'learning_rate', 'momentum', 'wall_time')
EVAL_FIELDS = ('mode', 'inference', 'key', 'value')


def _clean(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class MetricsWriter:
    r"""Append records to `<name>.jsonl` and a CSV mirror `<name>.csv`, both with a fixed field list.

    :param directory: Union[str, Path]. output directory.
    :param name: str. stream name.
    :param fieldnames: Sequence[str]. keys of every record, in order.
    """

    def __init__(self, directory: Union[str, Path], name: str, fieldnames: Sequence[str]):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.fieldnames = tuple(fieldnames)

        self.jsonl_path = self.directory / f'{name}.jsonl'
        self.csv_path = self.directory / f'{name}.csv'

        new_csv: bool = not self.csv_path.exists()
        self.jsonl = self.jsonl_path.open('a', encoding='utf-8')
        self.csv_file = self.csv_path.open('a', encoding='utf-8', newline='')
        self.csv = csv.DictWriter(
            self.csv_file, fieldnames=self.fieldnames, extrasaction='ignore', lineterminator='\n'
        )
        if new_csv:
            self.csv.writeheader()

    def write(self, record: Dict[str, Any]) -> None:
        row = {key: _clean(record.get(key)) for key in self.fieldnames}
        self.jsonl.write(json.dumps(row) + '\n')
        self.csv.writerow({key: '' if value is None else value for key, value in row.items()})
        self.jsonl.flush()
        self.csv_file.flush()

    def close(self) -> None:
        self.jsonl.close()
        self.csv_file.close()

    def __enter__(self) -> 'MetricsWriter':
        return self

    def __exit__(self, *args) -> None:
        self.close()
