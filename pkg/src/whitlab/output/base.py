"""
Base class for result files.

Every writer owns exactly one file. open() creates the parent directories
and the file and writes the preamble (hash comment, header row); close()
writes whatever must follow the last record and releases the file.
Nothing time-dependent is ever written, so the same records always give
the same bytes.
"""
from abc import ABC, abstractmethod
from pathlib import Path
from typing import IO, Any, Iterable, Optional


class ResultOutput(ABC):
    """
    File-backed result writer.

    Subclasses set ``scheme`` (used by get_info) and ``binary``, implement
    write(), and override _begin()/_finish() when the file needs a preamble
    or a trailer. Typical use::

        with CsvOutput(columns, config_hash).writing(path) as table:
            table.write_all(rows)
    """

    scheme = "file"
    binary = False

    def __init__(self) -> None:
        self._file: Optional[IO[Any]] = None
        self._filename = ""

    def open(self, name: str) -> None:
        """
        Create the file and write its preamble.

        Raises:
            ValueError: If the name is empty
            RuntimeError: If the file cannot be created
        """
        if not name:
            raise ValueError("Filename cannot be empty")
        self._filename = name
        try:
            Path(name).parent.mkdir(parents=True, exist_ok=True)
            if self.binary:
                self._file = open(name, 'wb')
            else:
                self._file = open(name, 'w', newline='')
        except OSError as e:
            raise RuntimeError(f"Could not open output file {name}: {e}")
        self._begin(self._file)

    def writing(self, name: str) -> 'ResultOutput':
        """open(name) and return the writer, for use in a with-block."""
        self.open(name)
        return self

    def _begin(self, f: IO[Any]) -> None:
        pass

    def _finish(self, f: IO[Any]) -> None:
        pass

    def _require_open(self) -> IO[Any]:
        if self._file is None:
            raise RuntimeError("Output file is not open")
        return self._file

    @abstractmethod
    def write(self, record: Any) -> int:
        """
        Write one record.

        Returns:
            Number of rows (or bytes, for binary writers) written

        Raises:
            RuntimeError: If the writer is not open or the write fails
        """

    def write_all(self, records: Iterable[Any]) -> int:
        """Write records in order; returns the summed write() counts."""
        return sum(self.write(r) for r in records)

    def close(self) -> None:
        """Write the trailer and close; a closed writer ignores the call."""
        if self._file is None:
            return
        f, self._file = self._file, None
        try:
            self._finish(f)
        except OSError as e:
            raise RuntimeError(f"Error writing to file: {e}")
        finally:
            try:
                f.close()
            except OSError:
                pass

    def get_info(self) -> str:
        return f"{self.scheme}://{self._filename}"

    @property
    def is_open(self) -> bool:
        return self._file is not None

    def __enter__(self) -> 'ResultOutput':
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()
