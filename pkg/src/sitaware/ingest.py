"""Loading and validation of multi-source report tables and the 5x5
factor matrix.

A report table is a CSV with header ``source,year,<indicator...>`` and one
row per reporting source; every indicator cell is a non-negative integer
count.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

YEAR_RANGE = (1900, 2100)
MIN_ROWS = 2

FACTOR_LABELS = ("financial", "materials", "population", "territory", "water resources")
POPULATION_SUBFACTORS = ("births", "soldiers", "women", "wounded", "war dead")


@dataclass(frozen=True)
class SourceReport:
    source_id: str
    year: int
    values: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ReportTable:
    columns: tuple
    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(self.rows))

    def column(self, name):
        if name not in self.columns:
            raise SchemaError(f"unknown indicator column {name!r}; have {list(self.columns)}")
        return [row.values[name] for row in self.rows]

    def labels(self):
        return [f"{row.source_id}, {row.year}" for row in self.rows]


@dataclass(frozen=True)
class Violation:
    row: int | None
    column: str | None
    message: str

    def __str__(self):
        where = []
        if self.row is not None:
            where.append(f"row {self.row}")
        if self.column is not None:
            where.append(f"column {self.column}")
        return (", ".join(where) + ": " if where else "") + self.message


def _is_count(value):
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def validate(table):
    """Return every invariant violation of ``table``; empty list when valid."""
    out = []
    if len(table.rows) < MIN_ROWS:
        out.append(Violation(None, None, f"k < 2: need ≥ {MIN_ROWS} rows, got {len(table.rows)}"))
    seen = set()
    for name in table.columns:
        if name in seen:
            out.append(Violation(None, name, "duplicate indicator name"))
        seen.add(name)

    declared = list(dict.fromkeys(table.columns))
    for i, row in enumerate(table.rows):
        if not isinstance(row.source_id, str) or not row.source_id.strip():
            out.append(Violation(i, "source", "empty source label"))
        if not isinstance(row.year, int) or not YEAR_RANGE[0] <= row.year <= YEAR_RANGE[1]:
            out.append(Violation(i, "year", f"year {row.year!r} outside {list(YEAR_RANGE)}"))
        for name in declared:
            if name not in row.values:
                out.append(Violation(i, name, "missing indicator"))
        for name, value in row.values.items():
            if name not in seen:
                out.append(Violation(i, name, "undeclared indicator"))
            elif not _is_count(value):
                out.append(Violation(i, name, f"count {value!r} is not an integer"))
            elif value < 0:
                out.append(Violation(i, name, f"negative count {value}"))
    return out


def _parse_int(text, what, line):
    s = text.strip()
    try:
        return int(s)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not an integer", line) from None


def parse_report_table(text):
    """Parse CSV report text into a validated :class:`ReportTable`."""
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    try:
        header = next(reader, None)
        if header is None:
            raise ParseError("empty input", 1)
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "source" or header[1] != "year":
            raise SchemaError("header must be 'source,year,<indicator...>'")
        indicators = header[2:]
        dupes = sorted({h for h in indicators if indicators.count(h) > 1})
        if dupes:
            raise SchemaError(f"duplicate indicator(s) in header: {dupes}")
        if any(not h for h in indicators):
            raise SchemaError("empty indicator name in header")

        rows = []
        for record in reader:
            line = reader.line_num
            if not record or all(not f.strip() for f in record):
                continue
            if len(record) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(record)}", line)
            year = _parse_int(record[1], "year", line)
            values = {name: _parse_int(cell, name, line) for name, cell in zip(indicators, record[2:])}
            rows.append(SourceReport(record[0], year, values))
    except csv.Error as exc:
        raise ParseError(str(exc), reader.line_num) from None

    table = ReportTable(indicators, rows)
    violations = validate(table)
    if violations:
        raise ValidationError(violations)
    return table


def load_report_table(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_report_table(fh.read())


def to_csv(table):
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["source", "year", *table.columns])
    for row in table.rows:
        writer.writerow([row.source_id, row.year, *(row.values[c] for c in table.columns)])
    return buf.getvalue()


def to_dict(table):
    return {
        "columns": list(table.columns),
        "rows": [
            {"source": r.source_id, "year": r.year, "values": {c: r.values[c] for c in table.columns}}
            for r in table.rows
        ],
    }


def from_dict(obj):
    try:
        rows = [SourceReport(r["source"], r["year"], dict(r["values"])) for r in obj["rows"]]
        return ReportTable(obj["columns"], rows)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed report table object: {exc}") from None


@dataclass(frozen=True)
class ParameterMatrix:
    entries: np.ndarray
    factor_labels: tuple = FACTOR_LABELS
    subfactor_labels: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "entries", np.array(self.entries, dtype=float))
        object.__setattr__(self, "factor_labels", tuple(self.factor_labels))
        sub = self.subfactor_labels
        if sub is None:
            sub = tuple(tuple(f"a{m + 1}{n + 1}" for n in range(5)) for m in range(5))
        object.__setattr__(self, "subfactor_labels", tuple(tuple(r) for r in sub))
        problems = validate_matrix(self)
        if problems:
            raise ValidationError(problems)

    def flat(self):
        return self.entries.reshape(-1)


def validate_matrix(matrix):
    out = []
    if matrix.entries.shape != (5, 5):
        out.append(Violation(None, None, f"entries must be 5x5, got {matrix.entries.shape}"))
    if len(matrix.factor_labels) != 5:
        out.append(Violation(None, None, "need exactly 5 first-level labels"))
    if any(not str(lbl).strip() for lbl in matrix.factor_labels):
        out.append(Violation(None, None, "empty first-level label"))
    if len(set(matrix.factor_labels)) != len(matrix.factor_labels):
        out.append(Violation(None, None, "first-level labels must be unique"))
    sub = matrix.subfactor_labels
    if len(sub) != 5 or any(len(r) != 5 for r in sub):
        out.append(Violation(None, None, "second-level labels must be 5x5"))
    elif any(not str(lbl).strip() for r in sub for lbl in r):
        out.append(Violation(None, None, "empty second-level label"))
    return out


def parse_parameter_matrix(obj):
    """Build a matrix from ``{"entries": 5x5, "factor_labels"?, "subfactor_labels"?}``."""
    if "entries" not in obj:
        raise SchemaError("parameter matrix object needs 'entries'")
    return ParameterMatrix(
        obj["entries"],
        obj.get("factor_labels", FACTOR_LABELS),
        obj.get("subfactor_labels"),
    )


def matrix_to_dict(matrix):
    return {
        "factor_labels": list(matrix.factor_labels),
        "subfactor_labels": [list(r) for r in matrix.subfactor_labels],
        "entries": matrix.entries.tolist(),
    }
