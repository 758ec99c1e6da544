"""SAM text format: parser and canonical emitter.

Layout (tab- or semicolon-delimited)::

    SAM_table { MCAESP08
    SPAIN
    Year: 2008  Population: 4000000  Active: 2000000  ...  Units: 100000  euros
            P01_AgroPesc  ...  H16_Households  rowSUM
    P01_AgroPesc  1701  ...  9499  48021  P01_AgroPesc
    ...
    colSUM  48021  ...
    }

The region line, metadata, rowSUM column, trailing row labels, colSUM row and the
closing brace are optional. The emitter writes the canonical form of that layout.
"""

import logging
import re
from pathlib import Path

import numpy as np

from deployers.errors import TableBalanceError, TableFormatError
from deployers.models.tables import AccountId, AccountKind, SamTable, format_number

logger = logging.getLogger(__name__)

_HEADER = re.compile(r"^\s*SAM_table\s*[{(]\s*(.*?)\s*[)]?\s*$")
_NUMBER = re.compile(r"^[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$")
_META = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_ ]*?)\s*:\s*(.*?)\s*$")
_CLOSERS = {"}", ")"}

ROW_SUM_LABEL = "rowSUM"
COL_SUM_LABEL = "colSUM"


def detect_delimiter(lines: list[str]) -> str:
    """Pick tab when any body line contains one, else semicolon."""
    body = lines[1:]
    if any("\t" in line for line in body):
        return "\t"
    if any(";" in line for line in body):
        return ";"
    raise TableFormatError("Cannot detect the delimiter (expected tab or semicolon)", line=2)


def parse_number(text: str, line: int, column: str) -> float:
    """Parse a decimal cell; thousands separators and decimal commas are rejected."""
    cell = text.strip()
    if cell == "":
        return 0.0
    if not _NUMBER.match(cell):
        raise TableFormatError(f"Unparseable numeric cell {cell!r}", line=line, column=column)
    return float(cell)


def parse_sam(
    text: str,
    balance_tol: float = 1e-3,
    kinds: dict[str, AccountKind] | None = None,
) -> SamTable:
    """Parse a SAM document.

    Args:
        text: Document text
        balance_tol: Relative tolerance for row/column and printed-sum checks
        kinds: Explicit account kinds overriding the prefix convention

    Returns:
        Validated SamTable

    Raises:
        TableFormatError: If the document does not follow the layout
        TableBalanceError: If an account is unbalanced beyond tolerance
    """
    lines = text.splitlines()
    # Line numbers reported in errors are 1-based positions in the original text.
    numbered = [(n + 1, line) for n, line in enumerate(lines) if line.strip()]
    if not numbered:
        raise TableFormatError("malformed header: empty document", line=1)

    first_no, first = numbered[0]
    match = _HEADER.match(first.replace("\t", " ").replace(";", " "))
    if not match:
        raise TableFormatError("malformed header: expected 'SAM_table {'", line=first_no)
    name = match.group(1).strip().strip("{}()").strip() or "SAM"

    delimiter = detect_delimiter([line for _, line in numbered])
    rows = [(n, [cell.strip() for cell in line.split(delimiter)]) for n, line in numbered[1:]]

    region = ""
    metadata: dict[str, str] = {}
    currency = ""
    pos = 0
    # Metadata lines run until the account header row (empty first cell).
    while pos < len(rows) and rows[pos][1][0] != "":
        region, currency = _read_metadata(rows[pos][1], metadata, region, currency)
        pos += 1
    if pos == len(rows):
        raise TableFormatError("malformed header: account header row not found", line=first_no)

    header_no, header = rows[pos]
    codes = _trim(header[1:])
    has_row_sums = bool(codes) and codes[-1] == ROW_SUM_LABEL
    if has_row_sums:
        codes = codes[:-1]
    if not codes:
        raise TableFormatError("malformed header: no account codes", line=header_no)

    accounts = []
    for code in codes:
        try:
            if kinds and code in kinds:
                accounts.append(AccountId(code=code, kind=kinds[code]))
            else:
                accounts.append(AccountId.from_code(code))
        except TableFormatError as e:
            raise TableFormatError(str(e), line=header_no, column=code) from e

    n = len(codes)
    flows = np.zeros((n, n))
    declared_rows = np.zeros(n) if has_row_sums else None
    declared_cols: np.ndarray | None = None
    pos += 1
    r = 0
    while pos < len(rows):
        line_no, cells = rows[pos]
        label = cells[0]
        if label in _CLOSERS:
            break
        if label == COL_SUM_LABEL:
            values = _trim(cells[1:])
            if len(values) != n:
                raise TableFormatError(
                    f"colSUM row has {len(values)} cells, expected {n}", line=line_no
                )
            declared_cols = np.array(
                [parse_number(v, line_no, codes[j]) for j, v in enumerate(values)]
            )
            pos += 1
            continue
        if r >= n:
            raise TableFormatError(
                f"non-square body: more than {n} account rows", line=line_no, column=label
            )
        if label != codes[r]:
            raise TableFormatError(
                f"non-square body: row label {label!r} does not match column {codes[r]!r}",
                line=line_no,
            )
        values = _trim(cells[1:])
        expected = n + (1 if has_row_sums else 0)
        if len(values) > expected and values[expected] not in ("", label):
            raise TableFormatError(f"trailing label {values[expected]!r} does not match row", line=line_no)
        values = values[:expected]
        if len(values) < n:
            raise TableFormatError(
                f"non-square body: row has {len(values)} cells, expected {n}", line=line_no
            )
        for j in range(n):
            flows[r, j] = parse_number(values[j], line_no, codes[j])
        if declared_rows is not None:
            declared_rows[r] = parse_number(values[n], line_no, ROW_SUM_LABEL) if len(values) > n else np.nan
        _check_signs(flows[r], accounts[r], codes, line_no)
        r += 1
        pos += 1

    if r != n:
        raise TableFormatError(f"non-square body: {r} rows for {n} columns", line=header_no)
    trailing = [no for no, cells in rows[pos + 1 :] if any(cells)]
    if trailing:
        raise TableFormatError("unexpected content after the closing brace", line=trailing[0])

    table = SamTable(
        name=name,
        region=region,
        year=_as_int(metadata.get("Year")),
        population=_as_float(metadata.get("Population")),
        active_population=_as_float(metadata.get("Active")),
        unit_scale=_as_float(metadata.get("Units"), default=1.0),
        currency=currency,
        accounts=accounts,
        flows=flows,
        metadata=metadata,
        declared_row_sums=declared_rows,
        declared_col_sums=declared_cols,
    )
    check_balance(table, balance_tol)
    return table


def read_sam(path: str | Path, balance_tol: float = 1e-3) -> SamTable:
    """Read and parse a SAM file."""
    return parse_sam(Path(path).read_text(encoding="utf-8"), balance_tol)


def check_balance(table: SamTable, balance_tol: float) -> float:
    """Validate row/column balance and printed sums.

    Returns:
        The largest relative error found (row vs column, and printed vs recomputed)

    Raises:
        TableBalanceError: If any error exceeds balance_tol
    """
    account, worst = table.worst_imbalance()
    if worst > balance_tol:
        raise TableBalanceError(account, worst, balance_tol)

    rows, cols = table.row_sums(), table.col_sums()
    for label, declared, computed in (
        (ROW_SUM_LABEL, table.declared_row_sums, rows),
        (COL_SUM_LABEL, table.declared_col_sums, cols),
    ):
        if declared is None:
            continue
        for i, (d, c) in enumerate(zip(declared, computed, strict=True)):
            if np.isnan(d) or d == c:
                continue
            scale = max(abs(d), abs(c))
            err = abs(d - c) / scale
            code = table.accounts[i].code
            if err > balance_tol:
                raise TableBalanceError(f"{code} ({label})", err, balance_tol)
            logger.warning(
                f"Printed {label} of {code} is {format_number(d)} but entries add up to "
                f"{format_number(c)} (relative error {err:.1e})"
            )
            worst = max(worst, err)
    return worst


def emit_sam(table: SamTable, delimiter: str = "\t") -> str:
    """Render a SAM in the canonical text layout.

    Printed sums are reproduced when the table carries them, so a parsed
    canonical document re-emits cell for cell.
    """
    d = delimiter
    n = table.size
    lines = [f"SAM_table {{ {table.name}"]
    if table.region:
        lines.append(table.region)
    meta = _metadata_cells(table)
    if meta:
        lines.append(d.join(meta))

    row_sums = table.declared_row_sums if table.declared_row_sums is not None else table.row_sums()
    col_sums = table.declared_col_sums if table.declared_col_sums is not None else table.col_sums()
    lines.append(d.join(["", *table.codes, ROW_SUM_LABEL]))
    for i, code in enumerate(table.codes):
        cells = [format_number(v) for v in table.flows[i]]
        lines.append(d.join([code, *cells, format_number(row_sums[i]), code]))
    lines.append(d.join([COL_SUM_LABEL, *(format_number(col_sums[j]) for j in range(n))]))
    lines.append("}")
    return "\n".join(lines) + "\n"


def balance_summary(table: SamTable) -> str:
    """One-line human summary used by the ingest command."""
    _, worst = table.worst_imbalance()
    printed = 0.0
    for declared, computed in (
        (table.declared_row_sums, table.row_sums()),
        (table.declared_col_sums, table.col_sums()),
    ):
        if declared is None:
            continue
        for d, c in zip(declared, computed, strict=True):
            if not np.isnan(d) and max(abs(d), abs(c)) > 0:
                printed = max(printed, abs(d - c) / max(abs(d), abs(c)))
    return f"{table.size} accounts, balanced (max rel err {max(worst, printed):.1e})"


def _trim(cells: list[str]) -> list[str]:
    out = list(cells)
    while out and out[-1] == "":
        out.pop()
    return out


def _read_metadata(
    cells: list[str], metadata: dict[str, str], region: str, currency: str
) -> tuple[str, str]:
    pending: str | None = None
    last_key: str | None = None
    for cell in cells:
        if not cell:
            continue
        if pending is not None:
            metadata[pending] = cell
            last_key, pending = pending, None
            continue
        match = _META.match(cell)
        if match:
            key, value = match.group(1), match.group(2)
            if value:
                metadata[key] = value
                last_key = key
            else:
                pending = key
        elif last_key == "Units" and not currency:
            currency = cell
        elif not region:
            region = cell
        else:
            metadata.setdefault("Note", cell)
    return region, currency


def _metadata_cells(table: SamTable) -> list[str]:
    meta = dict(table.metadata)
    if not meta:
        if table.year is not None:
            meta["Year"] = str(table.year)
        if table.population:
            meta["Population"] = format_number(table.population)
        if table.active_population:
            meta["Active"] = format_number(table.active_population)
        if table.unit_scale != 1.0 or table.currency:
            meta["Units"] = format_number(table.unit_scale)
    cells = []
    for key, value in meta.items():
        cells.append(f"{key}: {value}")
        if key == "Units" and table.currency:
            cells.append(table.currency)
    return cells


def _check_signs(row: np.ndarray, account: AccountId, codes: list[str], line: int) -> None:
    if account.kind.is_tax:
        return
    negative = np.flatnonzero(row < 0)
    if negative.size:
        j = int(negative[0])
        raise TableFormatError(
            f"negative flow {format_number(row[j])} outside a tax row", line=line, column=codes[j]
        )


def _as_int(value: str | None) -> int | None:
    if value is None:
        return None
    try:
        return int(float(value))
    except ValueError:
        return None


def _as_float(value: str | None, default: float = 0.0) -> float:
    if value is None:
        return default
    try:
        return float(value)
    except ValueError:
        return default
