"""Plain-text series I/O.

Series files hold one row per time point and one column per component,
comma separated, values written with ``%.17g`` so that doubles survive a
round trip.  An optional first row of component names is recognized when
none of its fields parses as a number.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


class CsvParseError(ValueError):
    """Malformed series file; carries the 1-based row and column."""

    def __init__(self, path, row: int, col: int | None, msg: str):
        self.path, self.row, self.col = str(path), row, col
        where = f"row {row}" + (f", column {col}" if col is not None else "")
        super().__init__(f"{path}: {where}: {msg}")


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def component_names(d: int) -> list:
    return [f"z{i + 1}" for i in range(d)]


def write_series_csv(path, values, header: bool = False, names=None) -> None:
    """Write an (n, d) array; ``header=True`` prepends component names."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(names if names is not None else component_names(v.shape[1]))
        for row in v:
            w.writerow(["%.17g" % x for x in row])


def read_series_csv(path, header: str | bool = "auto") -> np.ndarray:
    """Read a series file into an (n, d) float array.

    Parameters
    ----------
    header : {"auto", True, False}
        Whether the first row holds names.  ``"auto"`` decides from the row
        itself.

    Raises
    ------
    CsvParseError
        On ragged rows, empty files or non-numeric / non-finite fields.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)]
    if rows and header == "auto":
        header = not any(_is_number(s) for s in rows[0])
    start = 1 if header else 0
    data = []
    width = None
    for i in range(start, len(rows)):
        row = rows[i]
        if not row or all(not s.strip() for s in row):
            raise CsvParseError(path, i + 1, None, "empty row")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise CsvParseError(path, i + 1, None, f"expected {width} fields, found {len(row)}")
        vals = []
        for j, s in enumerate(row):
            try:
                x = float(s)
            except ValueError:
                raise CsvParseError(path, i + 1, j + 1, f"not a number: {s!r}") from None
            if not math.isfinite(x):
                raise CsvParseError(path, i + 1, j + 1, f"non-finite value: {s!r}")
            vals.append(x)
        data.append(vals)
    if not data:
        raise CsvParseError(path, start + 1, None, "no data rows")
    return np.asarray(data, dtype=float)


def write_json(path, obj) -> None:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
