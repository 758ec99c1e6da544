"""FIGARO inter-country input-output tables in CSV matrix format.

The first row holds column labels and the first column holds row labels, both
`COUNTRY_CODE` (e.g. `ES_C10T12`, `ES_P3_S14`, `W2_D1`). Labels present both as
a row and as a column are industries; extra columns are final-demand categories
and extra rows are value-added and tax rows.
"""

import io
import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd

from deployers.errors import TableBalanceError, TableFormatError
from deployers.models.tables import IcioTable, format_number

logger = logging.getLogger(__name__)

_LABEL = re.compile(r"^([A-Za-z0-9]+)_([A-Za-z0-9_]+)$")
_NUMBER = re.compile(r"^[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$")
_FIELDS = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


def split_label(label: str, line: int | None = None) -> tuple[str, str]:
    """Split a `CC_Sss` label into (country, code).

    Raises:
        TableFormatError: If the label does not follow the pattern
    """
    match = _LABEL.match(label)
    if not match:
        raise TableFormatError(f"Label {label!r} does not match the CC_Sss pattern", line=line)
    return match.group(1), match.group(2)


def parse_figaro_csv(source: str | Path | io.TextIOBase, balance_tol: float = 1e-3) -> IcioTable:
    """Parse a FIGARO CSV matrix.

    Args:
        source: File path, or an open text stream
        balance_tol: Relative tolerance of the output balance per industry

    Returns:
        IcioTable with countries, sectors, final-demand categories and value-added codes

    Raises:
        TableFormatError: Ragged rows, unparseable cells or bad labels
        TableBalanceError: Industry output differs from inputs plus value added
    """
    try:
        raw = pd.read_csv(source, header=None, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise TableFormatError("empty FIGARO file", line=1) from e
    except pd.errors.ParserError as e:
        found = _FIELDS.search(str(e))
        line = int(found.group(2)) if found else None
        raise TableFormatError(f"ragged row: {e}", line=line) from e

    if raw.shape[0] < 2 or raw.shape[1] < 2:
        raise TableFormatError("FIGARO matrix needs at least one labelled row and column", line=1)

    ragged = raw.isna().any(axis=1)
    if ragged.any():
        line = int(np.flatnonzero(ragged.to_numpy())[0]) + 1
        raise TableFormatError("ragged row: fewer cells than the header", line=line)

    grid = raw.to_numpy(dtype=object)
    corner = str(grid[0, 0]).strip()
    col_labels = [str(c).strip() for c in grid[0, 1:]]
    row_labels = [str(r).strip() for r in grid[1:, 0]]
    for j, label in enumerate(col_labels):
        split_label(label, line=1)
        if label in col_labels[:j]:
            raise TableFormatError(f"duplicate column label {label!r}", line=1)
    for i, label in enumerate(row_labels):
        split_label(label, line=i + 2)
        if label in row_labels[:i]:
            raise TableFormatError(f"duplicate row label {label!r}", line=i + 2)

    body = grid[1:, 1:]
    matrix = np.zeros(body.shape)
    for i in range(body.shape[0]):
        for j in range(body.shape[1]):
            cell = str(body[i, j]).strip()
            if cell == "":
                continue
            if not _NUMBER.match(cell):
                raise TableFormatError(
                    f"unparseable numeric cell {cell!r} at ({row_labels[i]}, {col_labels[j]})",
                    line=i + 2,
                    column=col_labels[j],
                )
            matrix[i, j] = float(cell)

    table = build_icio(row_labels, col_labels, matrix, corner)
    check_icio_balance(table, balance_tol)
    return table


def read_figaro(path: str | Path, balance_tol: float = 1e-3) -> IcioTable:
    """Read a FIGARO CSV file from disk."""
    return parse_figaro_csv(Path(path), balance_tol)


def build_icio(
    row_labels: list[str], col_labels: list[str], matrix: np.ndarray, corner: str = "rowLabels"
) -> IcioTable:
    """Classify labels and assemble an IcioTable.

    Raises:
        TableFormatError: If the industry block is not a full country x sector grid
    """
    column_set = set(col_labels)
    row_set = set(row_labels)
    industries = [label for label in row_labels if label in column_set]
    countries: list[str] = []
    sectors: list[str] = []
    for label in industries:
        country, sector = split_label(label)
        if country not in countries:
            countries.append(country)
        if sector not in sectors:
            sectors.append(sector)
    expected = {f"{c}_{s}" for c in countries for s in sectors}
    if expected != set(industries):
        missing = sorted(expected - set(industries))
        raise TableFormatError(
            f"inconsistent dimensions: industry block lacks {missing[:3]} "
            f"({len(countries)} countries x {len(sectors)} sectors expected)"
        )

    fd_categories: list[str] = []
    for label in col_labels:
        if label in row_set:
            continue
        _, category = split_label(label)
        if category not in fd_categories:
            fd_categories.append(category)
    va_codes: list[str] = []
    for label in row_labels:
        if label in column_set:
            continue
        _, code = split_label(label)
        if code not in va_codes:
            va_codes.append(code)

    return IcioTable(
        corner_label=corner,
        row_labels=list(row_labels),
        col_labels=list(col_labels),
        matrix=np.asarray(matrix, dtype=float),
        countries=countries,
        sectors=sectors,
        fd_categories=fd_categories,
        va_codes=va_codes,
    )


def check_icio_balance(table: IcioTable, balance_tol: float) -> float:
    """Compare each industry's row total with its inputs plus value added.

    Tables without value-added rows only describe uses; their output is the row total
    by definition and no column check applies.

    Returns:
        Largest relative error
    """
    if not table.value_added_rows():
        return 0.0
    rows = {label: i for i, label in enumerate(table.row_labels)}
    cols = {label: j for j, label in enumerate(table.col_labels)}
    worst = 0.0
    for country in table.countries:
        for sector in table.sectors:
            label = f"{country}_{sector}"
            row_total = float(table.matrix[rows[label]].sum())
            col_total = float(table.matrix[:, cols[label]].sum())
            scale = max(abs(row_total), abs(col_total))
            if scale == 0:
                continue
            err = abs(row_total - col_total) / scale
            if err > balance_tol:
                raise TableBalanceError(label, err, balance_tol)
            worst = max(worst, err)
    logger.debug(f"FIGARO balance checked: max relative error {worst:.2e}")
    return worst


def emit_figaro_csv(table: IcioTable) -> str:
    """Render an IcioTable in the CSV matrix layout with canonical number formatting."""
    cells = [[table.corner_label, *table.col_labels]]
    for label, values in zip(table.row_labels, table.matrix, strict=True):
        cells.append([label, *(format_number(v) for v in values)])
    frame = pd.DataFrame(cells)
    return str(frame.to_csv(header=False, index=False, lineterminator="\n"))


def icio_summary(table: IcioTable) -> str:
    """One-line human summary used by the ingest command."""
    return (
        f"{len(table.countries)} countries x {len(table.sectors)} sectors = "
        f"{len(table.countries) * len(table.sectors)} industry accounts, "
        f"{len(table.fd_categories)} final-demand categories, "
        f"{len(table.va_codes)} value-added rows"
    )
