"""Plain CSV output: UTF-8, LF line endings, 17 significant digits."""

from __future__ import annotations

import csv
import math


def format_float(v) -> str:
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    return format_float(v)


def write_csv(path, header, rows) -> None:
    """Write ``rows`` (iterables of str / int / float) under ``header``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def write_columns(path, columns: dict) -> None:
    """Write equal-length arrays as named columns, in dict order."""
    names = list(columns)
    n = {len(v) for v in columns.values()}
    if len(n) > 1:
        raise ValueError("columns have different lengths")
    write_csv(path, names, zip(*(columns[k] for k in names)))


def read_csv(path) -> tuple:
    """(header, rows as lists of strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
