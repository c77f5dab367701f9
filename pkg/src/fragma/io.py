"""CSV ingestion with missing-value masks, plus JSON sidecar parsing."""

from __future__ import annotations

import csv
import json

import numpy as np

from .errors import DataError
from .patterns import FragmentaryDataset


def _parse_cell(raw: str, na_marker: str) -> float:
    v = raw.strip()
    if v == "" or v == na_marker:
        return np.nan
    try:
        return float(v)
    except ValueError:
        raise DataError(f"cannot parse value {raw!r} as a number")


def read_matrix_csv(path, na_marker: str = "NA") -> tuple[list[str], np.ndarray]:
    """Header plus float matrix; empty cells or the marker become NaN.

    Ragged rows are rejected with the offending line number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty")
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: ragged row at line {lineno}: expected "
                    f"{len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([_parse_cell(v, na_marker) for v in row])
            except DataError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, np.asarray(rows, dtype=float)


def read_fragmentary_csv(
    path,
    response: str,
    na_marker: str = "NA",
    add_intercept: bool = False,
) -> FragmentaryDataset:
    """Load a pattern-structured CSV into a :class:`FragmentaryDataset`.

    The header names the columns; ``response`` designates the (fully
    observed) response column; missing covariate cells are the empty
    string or ``na_marker``.
    """
    header, values = read_matrix_csv(path, na_marker)
    if response not in header:
        raise DataError(f"{path}: response column {response!r} not in header {header}")
    r = header.index(response)
    y = values[:, r]
    if not np.all(np.isfinite(y)):
        bad = np.flatnonzero(~np.isfinite(y))
        raise DataError(
            f"{path}: response has missing values at data rows {bad.tolist()}"
        )
    keep = [j for j in range(len(header)) if j != r]
    x = values[:, keep]
    names = [header[j] for j in keep]
    if add_intercept:
        if "intercept" in names:
            raise DataError("column 'intercept' already present; drop --add-intercept")
        x = np.column_stack([np.ones(x.shape[0]), x])
        names = ["intercept"] + names
    mask = np.isfinite(x)
    return FragmentaryDataset(y=y, x=x, mask=mask, column_names=names)


def read_groups_sidecar(path, column_names: list[str]) -> dict[str, list[int]]:
    """Column-group declaration: JSON mapping group name -> column names."""
    with open(path) as fh:
        raw = json.load(fh)
    if isinstance(raw, dict) and "groups" in raw:
        raw = raw["groups"]
    if not isinstance(raw, dict):
        raise DataError(f"{path}: expected an object mapping group names to column lists")
    pos = {name: j for j, name in enumerate(column_names)}
    groups: dict[str, list[int]] = {}
    seen: set[int] = set()
    for gname, cols in raw.items():
        idx = []
        for c in cols:
            if c not in pos:
                raise DataError(f"{path}: group {gname!r} names unknown column {c!r}")
            if pos[c] in seen:
                raise DataError(f"{path}: column {c!r} appears in more than one group")
            seen.add(pos[c])
            idx.append(pos[c])
        groups[gname] = idx
    if not groups:
        raise DataError(f"{path}: no groups declared")
    return groups


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def format_cell(v: float, na_marker: str = "NA") -> str:
    return na_marker if not np.isfinite(v) else repr(float(v))
