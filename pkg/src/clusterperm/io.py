"""CSV ingestion for dyadic grids, multi-index records, and masks.

Input files are plain CSV with a header row.  Indices are 1-based on disk
and converted to 0-based arrays here.  Column roles:

* ``i``, ``j`` -- row and column cluster indices (required);
* ``l`` -- within-cell slot index (optional; its presence selects the
  multi-index record layout over the dyadic grid layout);
* ``y`` -- outcome (required);
* ``d``, ``d1``, ``d2``, ... -- treatment columns;
* ``x``, ``x1``, ``x2``, ... -- covariate columns.
"""

from __future__ import annotations

import csv
import re

import numpy as np

from .exceptions import DuplicateCellError, ParseError
from .model import DyadArray
from .multiway import MultiIndexDataset

_TREATMENT_PAT = re.compile(r"^d\d*$")
_COVARIATE_PAT = re.compile(r"^x\d*$")


def _read_rows(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file") from None
        header = [name.strip() for name in header]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", line=line_no
                )
            rows.append((line_no, [cell.strip() for cell in row]))
    if not rows:
        raise ParseError("no data rows")
    return header, rows


def _column_order(names: list[str]) -> list[str]:
    def sort_key(name):
        digits = name[1:]
        return (int(digits) if digits else 0, name)

    return sorted(names, key=sort_key)


def _parse_int(raw: str, name: str, line_no: int) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ParseError(f"column {name!r} must be an integer, got {raw!r}", line=line_no) from None
    if value < 1:
        raise ParseError(f"column {name!r} must be >= 1, got {value}", line=line_no)
    return value


def _parse_float(raw: str, name: str, line_no: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"column {name!r} must be numeric, got {raw!r}", line=line_no) from None


def ingest_csv(path, treatment=None, covariates=None):
    """Load a CSV file into a dyadic grid or a multi-index record set.

    ``treatment`` and ``covariates`` override the name-pattern inference
    (treatments ``d``, ``d1``, ...; covariates ``x``, ``x1``, ...).  Files
    without an ``l`` column become a ``DyadArray`` whose extents are the
    largest indices seen and whose unseen cells are marked missing; files
    with ``l`` become a ``MultiIndexDataset``.
    """
    header, rows = _read_rows(path)
    seen = set()
    for name in header:
        if name in seen:
            raise ParseError(f"duplicate column name {name!r}")
        seen.add(name)
    for required in ("i", "j", "y"):
        if required not in header:
            raise ParseError(f"missing required column {required!r}")
    if treatment is None:
        treatment = _column_order([n for n in header if _TREATMENT_PAT.match(n)])
    if covariates is None:
        covariates = _column_order([n for n in header if _COVARIATE_PAT.match(n)])
    for name in list(treatment) + list(covariates):
        if name not in header:
            raise ParseError(f"requested column {name!r} not in header")
    if not treatment:
        raise ParseError("no treatment columns found (expected d, d1, ...)")
    col = {name: pos for pos, name in enumerate(header)}
    has_slot = "l" in header

    i_vals, j_vals, l_vals, y_vals, d_vals, x_vals, lines = [], [], [], [], [], [], []
    for line_no, row in rows:
        i_vals.append(_parse_int(row[col["i"]], "i", line_no))
        j_vals.append(_parse_int(row[col["j"]], "j", line_no))
        if has_slot:
            l_vals.append(_parse_int(row[col["l"]], "l", line_no))
        y_vals.append(_parse_float(row[col["y"]], "y", line_no))
        d_vals.append([_parse_float(row[col[n]], n, line_no) for n in treatment])
        x_vals.append([_parse_float(row[col[n]], n, line_no) for n in covariates])
        lines.append(line_no)

    i_idx = np.asarray(i_vals, dtype=np.intp) - 1
    j_idx = np.asarray(j_vals, dtype=np.intp) - 1
    y = np.asarray(y_vals, dtype=float)
    d = np.asarray(d_vals, dtype=float)
    x = np.asarray(x_vals, dtype=float)

    if has_slot:
        keys = {}
        l_idx = np.asarray(l_vals, dtype=np.intp) - 1
        for pos, line_no in enumerate(lines):
            key = (int(i_idx[pos]), int(j_idx[pos]), int(l_idx[pos]))
            if key in keys:
                raise DuplicateCellError(
                    f"record (i={key[0] + 1}, j={key[1] + 1}, l={key[2] + 1}) "
                    f"already appeared on line {keys[key]}",
                    line=line_no,
                )
            keys[key] = line_no
        if x.shape[1] == 0:
            x = np.ones((y.shape[0], 1))
        if d.shape[1] == 1:
            d = d[:, 0]
        return MultiIndexDataset(i=i_idx, j=j_idx, l=l_idx, y=y, d=d, x=x)

    n_rows = int(i_idx.max()) + 1
    n_cols = int(j_idx.max()) + 1
    y_grid = np.zeros((n_rows, n_cols))
    d_grid = np.zeros((n_rows, n_cols, d.shape[1]))
    p = x.shape[1] if x.shape[1] else 1
    x_grid = np.zeros((n_rows, n_cols, p))
    observed = np.zeros((n_rows, n_cols), dtype=bool)
    for pos, line_no in enumerate(lines):
        a, b = int(i_idx[pos]), int(j_idx[pos])
        if observed[a, b]:
            raise DuplicateCellError(
                f"cell (i={a + 1}, j={b + 1}) appears more than once", line=line_no
            )
        observed[a, b] = True
        y_grid[a, b] = y[pos]
        d_grid[a, b] = d[pos]
        x_grid[a, b] = x[pos] if x.shape[1] else 1.0
    return DyadArray(y=y_grid, d=d_grid, x=x_grid, observed=observed)


def ingest_mask_csv(path) -> np.ndarray:
    """Load an observation mask from CSV columns i, j, m (m in {0, 1})."""
    header, rows = _read_rows(path)
    for required in ("i", "j", "m"):
        if required not in header:
            raise ParseError(f"missing required column {required!r}")
    col = {name: pos for pos, name in enumerate(header)}
    entries = []
    for line_no, row in rows:
        a = _parse_int(row[col["i"]], "i", line_no)
        b = _parse_int(row[col["j"]], "j", line_no)
        raw = row[col["m"]]
        if raw not in ("0", "1"):
            raise ParseError(f"column 'm' must be 0 or 1, got {raw!r}", line=line_no)
        entries.append((line_no, a - 1, b - 1, int(raw)))
    n_rows = max(e[1] for e in entries) + 1
    n_cols = max(e[2] for e in entries) + 1
    mask = np.zeros((n_rows, n_cols), dtype=np.int8)
    seen = np.zeros((n_rows, n_cols), dtype=bool)
    for line_no, a, b, m in entries:
        if seen[a, b]:
            raise DuplicateCellError(f"cell (i={a + 1}, j={b + 1}) appears more than once", line=line_no)
        seen[a, b] = True
        mask[a, b] = m
    return mask
