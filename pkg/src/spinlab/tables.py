"""Rectangular result tables with a JSON metadata block, serialized as CSV or JSON."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

SIG_DIGITS = 12


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, f".{SIG_DIGITS}g")


def _json_value(v):
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    v = float(v)
    if not math.isfinite(v):
        return format_value(v)
    return float(format_value(v))


def _json_tree(obj):
    if isinstance(obj, dict):
        return {str(k): _json_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_tree(v) for v in obj]
    return _json_value(obj)


@dataclass(frozen=True)
class ResultTable:
    columns: tuple
    rows: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        width = len(self.columns)
        if len(set(self.columns)) != width:
            raise ValueError("duplicate column names")
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} values, expected {width}")

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [row[j] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(_json_tree(self.metadata), sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"metadata": _json_tree(self.metadata), "columns": list(self.columns),
               "rows": [[_json_value(v) for v in row] for row in self.rows]}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def render(self, fmt: str = "csv") -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown format {fmt!r}")


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(text: str) -> ResultTable:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("missing metadata header line")
    metadata = json.loads(lines[0][2:])
    reader = csv.reader(lines[1:])
    columns = next(reader)
    rows = [[_parse_cell(c) for c in row] for row in reader]
    return ResultTable(columns, rows, metadata)


def read_json(text: str) -> ResultTable:
    doc = json.loads(text)
    rows = [[float(v) if v in ("inf", "-inf", "nan") else v for v in row] for row in doc["rows"]]
    return ResultTable(doc["columns"], rows, doc["metadata"])
