# jsqd/reports.py
"""
Result tables and atomic CSV/JSON artifact writing.

Floats go to CSV as '%.17g' (exact round trip, '.' decimal separator);
infinite values become the string "inf" in both formats.
"""
import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, TextIO

import numpy as np


def format_value(value: Any) -> str:
    """CSV cell text for one value."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return "%.17g" % x
    return str(value)


def json_ready(value: Any) -> Any:
    """Convert numpy containers and non-finite floats to JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_ready(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return value


def _atomic_write(path: Path, write) -> Path:
    """Write through a temporary file in the target directory, then rename over the target."""
    path = Path(path).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            write(f)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return path


def dump_csv(stream: TextIO, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def dump_json(stream: TextIO, data: Any) -> None:
    json.dump(json_ready(data), stream, indent=2)
    stream.write("\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    return _atomic_write(path, lambda f: dump_csv(f, header, rows))


def write_json(path, data: Any) -> Path:
    return _atomic_write(path, lambda f: dump_json(f, data))


def read_json(path) -> Any:
    with open(Path(path).expanduser(), "r") as f:
        return json.load(f)


@dataclass
class ExperimentReport:
    """A named result table with metadata (one dict per row, shared column order)."""
    name: str
    columns: List[str]
    rows: List[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add_row(self, **values):
        self.rows.append(values)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name) for r in self.rows], dtype=float)

    def csv_header(self) -> List[str]:
        return list(self.columns)

    def csv_rows(self) -> List[list]:
        return [[r.get(c) for c in self.columns] for r in self.rows]

    def to_dict(self) -> dict:
        return json_ready({"name": self.name, "columns": self.columns, "rows": self.rows, "meta": self.meta})

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        def _number(v):
            if v in ("inf", "-inf", "nan"):
                return float(v)
            return v
        rows = [{k: _number(v) for k, v in row.items()} for row in data.get("rows", [])]
        return cls(name=data["name"], columns=list(data["columns"]), rows=rows, meta=dict(data.get("meta", {})))


def write_artifact(obj, path, fmt: str = "csv", json_payload: Optional[dict] = None) -> Path:
    """Write any object exposing csv_header/csv_rows and to_dict in the requested format."""
    if fmt == "json":
        return write_json(path, obj.to_dict() if json_payload is None else json_payload)
    return write_csv(path, obj.csv_header(), obj.csv_rows())


def dump_artifact(obj, stream: TextIO, fmt: str = "csv", json_payload: Optional[dict] = None) -> None:
    if fmt == "json":
        dump_json(stream, obj.to_dict() if json_payload is None else json_payload)
    else:
        dump_csv(stream, obj.csv_header(), obj.csv_rows())
