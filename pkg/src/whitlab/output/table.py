"""
Table and document writers.

CSV tables start with a `# config_sha256=<hash>` comment line followed by
the header row. JSON documents are written with sorted keys so identical
results produce identical files.
"""
import csv
import json
from typing import IO, Any, Dict, Mapping, Optional, Sequence

import numpy as np

from whitlab.output.base import ResultOutput

CONFIG_HASH_PREFIX = "# config_sha256="


def _plain(value: Any) -> Any:
    """numpy scalars and arrays as plain Python values."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.generic, np.ndarray)):
        return _plain(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class CsvOutput(ResultOutput):
    """
    CSV table with a config-hash comment and a header row.

    Rows are mappings keyed by column name; missing keys are left empty and
    unknown keys are rejected.
    """

    scheme = "csv"

    def __init__(self, columns: Sequence[str], config_hash: str = "") -> None:
        """
        Initialize the table writer.

        Args:
            columns: Column names, in output order
            config_hash: SHA-256 of the effective configuration
        """
        super().__init__()
        if not columns:
            raise ValueError("A CSV table needs at least one column")
        self.columns = list(columns)
        self.config_hash = config_hash
        self._writer: Optional[Any] = None
        self._row_count = 0

    def _begin(self, f: IO[Any]) -> None:
        f.write(f"{CONFIG_HASH_PREFIX}{self.config_hash}\n")
        self._writer = csv.DictWriter(f, fieldnames=self.columns, lineterminator='\n')
        self._writer.writeheader()
        self._row_count = 0

    def write(self, record: Mapping[str, Any]) -> int:
        self._require_open()
        unknown = set(record) - set(self.columns)
        if unknown:
            raise ValueError(f"Unknown CSV columns: {sorted(unknown)}")
        try:
            self._writer.writerow({k: _plain(v) for k, v in record.items()})
        except OSError as e:
            raise RuntimeError(f"Error writing to file: {e}")
        self._row_count += 1
        return 1

    @property
    def row_count(self) -> int:
        """Get number of data rows written."""
        return self._row_count

class JsonOutput(ResultOutput):
    """
    JSON document writer.

    Each write() merges a mapping into the document; the document is
    serialized on close().
    """

    scheme = "json"

    def __init__(self, config_hash: str = "") -> None:
        super().__init__()
        self.config_hash = config_hash
        self._document: Dict[str, Any] = {}

    def _begin(self, f: IO[Any]) -> None:
        self._document = {}
        if self.config_hash:
            self._document["config_sha256"] = self.config_hash

    def write(self, record: Mapping[str, Any]) -> int:
        self._require_open()
        self._document.update(record)
        return len(record)

    def _finish(self, f: IO[Any]) -> None:
        json.dump(self._document, f, indent=2, sort_keys=True, default=_json_default)
        f.write('\n')

def read_config_hash(path: str) -> str:
    """Config hash from the comment line of a CSV written by CsvOutput."""
    with open(path, 'r') as f:
        first = f.readline().rstrip('\n')
    if not first.startswith(CONFIG_HASH_PREFIX):
        raise ValueError(f"{path} has no config hash comment")
    return first[len(CONFIG_HASH_PREFIX):]
