"""Comma-separated results tables with a fixed column order.

Key columns are kept as strings. Every other column is numeric; floats are
written with ``repr`` so reading a table back gives the same values, and a
missing value (for example accuracy on open-ended questions) is written as
the literal ``null``.
"""

import csv
import io
import math
from dataclasses import dataclass, field

METRIC_COLUMNS = (
    "tv_answer",
    "tv_finding",
    "tv_citation",
    "support_tv_finding",
    "support_tv_citation",
    "mean_findings",
    "mean_citations",
    "accuracy",
)
NULL = "null"


def _fmt(v):
    if v is None:
        return NULL
    if isinstance(v, bool):
        return "1.0" if v else "0.0"
    if isinstance(v, (int, float)):
        v = float(v)
        if math.isnan(v):
            return NULL
        return repr(v)
    return str(v)


def _parse(text):
    if text == NULL or text == "":
        return None
    return float(text)


@dataclass
class ResultsTable:
    key_columns: tuple
    value_columns: tuple = METRIC_COLUMNS
    rows: list = field(default_factory=list)

    @property
    def columns(self):
        return tuple(self.key_columns) + tuple(self.value_columns)

    def add(self, keys, values):
        row = {k: str(keys[k]) for k in self.key_columns}
        for c in self.value_columns:
            v = values.get(c)
            row[c] = None if v is None else float(v)
        self.rows.append(row)
        return row

    def column(self, name):
        return [r[name] for r in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text, key_columns=None):
        """Parse CSV text. Without ``key_columns`` the leading columns up to the
        first one that parses as a number in every row are taken as keys."""
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if not header:
            raise ValueError("empty table")
        body = [r for r in reader if r]
        for i, r in enumerate(body, 2):
            if len(r) != len(header):
                raise ValueError(f"line {i}: expected {len(header)} fields, got {len(r)}")
        if key_columns is None:
            key_columns = tuple(_infer_keys(header, body))
        else:
            key_columns = tuple(key_columns)
            missing = [k for k in key_columns if k not in header]
            if missing:
                raise ValueError(f"missing key columns: {missing}")
        values = tuple(c for c in header if c not in key_columns)
        table = cls(key_columns, values)
        idx = {c: i for i, c in enumerate(header)}
        for r in body:
            row = {k: r[idx[k]] for k in key_columns}
            for c in values:
                try:
                    row[c] = _parse(r[idx[c]])
                except ValueError:
                    raise ValueError(f"column {c}: not a number: {r[idx[c]]!r}") from None
            table.rows.append(row)
        return table

    @classmethod
    def read(cls, path, key_columns=None):
        with open(path, encoding="utf-8", newline="") as fh:
            return cls.from_csv(fh.read(), key_columns)


def _numeric(s):
    if s == NULL:
        return True
    try:
        float(s)
    except ValueError:
        return False
    return True


def _infer_keys(header, body):
    keys = []
    for i, c in enumerate(header):
        if body and all(_numeric(r[i]) for r in body) and i > 0:
            break
        keys.append(c)
    return keys


def mean(values):
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None
