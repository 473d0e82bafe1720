from __future__ import annotations

from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import TextIO, TypeVar

from src.models.base_models import RecordModel

R = TypeVar("R", bound=RecordModel)


def write_records(path: Path, records: Iterable[RecordModel]) -> int:
    """Write one JSON line per record, replacing the file. Returns the record count."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        return emit_records(f, records)


def emit_records(stream: TextIO, records: Iterable[RecordModel]) -> int:
    count = 0
    for record in records:
        stream.write(record.to_line() + "\n")
        count += 1
    return count


def read_records(path: Path, model: type[R]) -> Iterator[R]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield model.from_line(line)
