"""Run artifacts: CSV tables and JSON-lines journals with a provenance header.

Every artifact starts with one comment line::

    # deployers format=1 config_hash=<sha256> seed=<int>

followed by the CSV (or JSON-lines) body.
"""

import io
from collections.abc import Iterable
from typing import Any

import pandas as pd

FORMAT_VERSION = 1
HEADER_PREFIX = "# deployers"


def header_line(config_hash: str, seed: int, **extra: Any) -> str:
    fields = {"format": FORMAT_VERSION, "config_hash": config_hash, "seed": seed, **extra}
    return f"{HEADER_PREFIX} " + " ".join(f"{k}={v}" for k, v in fields.items())


def parse_header(line: str) -> dict[str, str]:
    """Fields of a header line.

    Raises:
        ValueError: If the line is not an artifact header
    """
    if not line.startswith(HEADER_PREFIX):
        raise ValueError(f"not an artifact header: {line[:40]!r}")
    body = line[len(HEADER_PREFIX) :].strip()
    return dict(item.split("=", 1) for item in body.split() if "=" in item)


def csv_text(frame: pd.DataFrame, config_hash: str, seed: int, index: bool = False, **extra: Any) -> str:
    """CSV body of a frame preceded by the header line."""
    return header_line(config_hash, seed, **extra) + "\n" + frame.to_csv(index=index, lineterminator="\n")


def read_csv_text(text: str, index_col: int | None = None) -> tuple[dict[str, str], pd.DataFrame]:
    """Header fields and frame of an artifact written by `csv_text`."""
    first, _, body = text.partition("\n")
    return parse_header(first), pd.read_csv(io.StringIO(body), index_col=index_col)


def jsonl_text(lines: Iterable[str], config_hash: str, seed: int, **extra: Any) -> str:
    """JSON-lines body preceded by the header line."""
    return "\n".join([header_line(config_hash, seed, **extra), *lines]) + "\n"

