"""Versioned snapshot container for a country state.

Layout::

    DEPLOYERS-SNAPSHOT 1
    {"format_version": 1, "config_hash": ..., "seed": ..., "sections": [...]}
    <config section bytes><state section bytes>

The first two lines are text. Each section is listed in the header with its byte
length and SHA-256 digest; the sections follow the header in that order. The
state section is a dill pickle of the complete `CountryState`, random generator
included, so a loaded state continues exactly as the saved one would have.
Only load snapshots you produced yourself.
"""

import hashlib
import json
import logging
from typing import Any

import dill
from pydantic import BaseModel, Field

from deployers.errors import SnapshotError
from deployers.services.economy import CountryState
from deployers.services.storage import StorageBackend

logger = logging.getLogger(__name__)

MAGIC = "DEPLOYERS-SNAPSHOT"
FORMAT_VERSION = 1


class SectionInfo(BaseModel):
    name: str
    length: int = Field(ge=0)
    sha256: str


class SnapshotHeader(BaseModel):
    """Self-describing header of a snapshot file."""

    format_version: int
    config_hash: str
    seed: int
    month: int
    source: str = ""
    country: str = ""
    sections: list[SectionInfo]


def snapshot_bytes(state: CountryState, source: str = "") -> bytes:
    """Serialise a state into the snapshot container."""
    config = json.dumps(state.config.model_dump(mode="json"), sort_keys=True, separators=(",", ":")).encode()
    body = dill.dumps(state, protocol=dill.HIGHEST_PROTOCOL)
    sections = [("config", config), ("state", body)]
    header = SnapshotHeader(
        format_version=FORMAT_VERSION,
        config_hash=state.config.config_hash(),
        seed=state.config.seed,
        month=state.month,
        source=source,
        country=state.name,
        sections=[
            SectionInfo(name=name, length=len(data), sha256=hashlib.sha256(data).hexdigest())
            for name, data in sections
        ],
    )
    head = f"{MAGIC} {FORMAT_VERSION}\n{header.model_dump_json()}\n".encode()
    return head + b"".join(data for _, data in sections)


def read_header(data: bytes) -> tuple[SnapshotHeader, int]:
    """Parse the two text lines; returns the header and the offset of the first section.

    Raises:
        SnapshotError: Missing magic line, unsupported version or malformed header
    """
    first_end = data.find(b"\n")
    if first_end < 0:
        raise SnapshotError("header", "missing magic line")
    magic, _, version = data[:first_end].decode("utf-8", errors="replace").partition(" ")
    if magic != MAGIC:
        raise SnapshotError("header", f"not a snapshot file (starts with {magic[:32]!r})")
    if version.strip() != str(FORMAT_VERSION):
        raise SnapshotError("header", f"format version {version.strip()} is not supported (expected {FORMAT_VERSION})")
    second_end = data.find(b"\n", first_end + 1)
    if second_end < 0:
        raise SnapshotError("header", "truncated header")
    try:
        header = SnapshotHeader.model_validate_json(data[first_end + 1 : second_end])
    except ValueError as e:
        raise SnapshotError("header", f"malformed header: {e}") from e
    if header.format_version != FORMAT_VERSION:
        raise SnapshotError("header", f"format version {header.format_version} is not supported")
    return header, second_end + 1


def read_sections(data: bytes) -> tuple[SnapshotHeader, dict[str, bytes]]:
    """Split and verify every section.

    Raises:
        SnapshotError: Naming the section that is truncated or fails its checksum
    """
    header, offset = read_header(data)
    sections: dict[str, bytes] = {}
    for info in header.sections:
        chunk = data[offset : offset + info.length]
        if len(chunk) < info.length:
            raise SnapshotError(info.name, f"truncated: {len(chunk)} of {info.length} bytes")
        if hashlib.sha256(chunk).hexdigest() != info.sha256:
            raise SnapshotError(info.name, "checksum mismatch")
        sections[info.name] = chunk
        offset += info.length
    return header, sections


def state_from_bytes(data: bytes, expected_config_hash: str | None = None) -> CountryState:
    """Rebuild a state from snapshot bytes.

    A config hash other than `expected_config_hash` is reported as a warning; the
    snapshot still loads.

    Raises:
        SnapshotError: On any container or decoding problem
    """
    header, sections = read_sections(data)
    if "state" not in sections:
        raise SnapshotError("state", "section missing")
    try:
        state: Any = dill.loads(sections["state"])
    except Exception as e:  # noqa: BLE001
        raise SnapshotError("state", f"cannot decode: {e}") from e
    if not isinstance(state, CountryState):
        raise SnapshotError("state", f"holds {type(state).__name__}, not a country state")
    if expected_config_hash and header.config_hash != expected_config_hash:
        logger.warning(
            f"Snapshot config hash {header.config_hash[:12]} differs from the expected {expected_config_hash[:12]}"
        )
    return state


def save_snapshot(state: CountryState, storage: StorageBackend, path: str, source: str = "") -> str:
    """Write a snapshot through a storage backend; returns its full location."""
    storage.write_file(snapshot_bytes(state, source), path)
    location = storage.get_full_path(path)
    logger.info(f"Snapshot of {state.name} at month {state.month} written to {location}")
    return location


def load_snapshot(storage: StorageBackend, path: str, expected_config_hash: str | None = None) -> CountryState:
    """Read a snapshot through a storage backend.

    Raises:
        SnapshotError: Missing file or any container problem
    """
    try:
        data = storage.read_file(path)
    except FileNotFoundError as e:
        raise SnapshotError("file", f"{path} does not exist") from e
    return state_from_bytes(data, expected_config_hash)
