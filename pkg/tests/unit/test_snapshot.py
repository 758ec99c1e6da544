"""Tests for the snapshot container."""

import json

import pytest

from deployers.errors import SnapshotError
from deployers.services.engine import step_month
from deployers.services.snapshot import (
    MAGIC,
    load_snapshot,
    read_header,
    read_sections,
    save_snapshot,
    snapshot_bytes,
    state_from_bytes,
)


class TestSnapshot:
    def test_header_describes_the_state(self, toy_state):
        header, offset = read_header(snapshot_bytes(toy_state, source="toy.sam"))
        assert header.country == "TOYLAND"
        assert header.seed == 7
        assert header.month == 0
        assert header.source == "toy.sam"
        assert header.config_hash == toy_state.config.config_hash()
        assert [s.name for s in header.sections] == ["config", "state"]
        assert offset > len(MAGIC)

    def test_config_section_is_readable_json(self, toy_state):
        _, sections = read_sections(snapshot_bytes(toy_state))
        assert json.loads(sections["config"])["seed"] == 7

    def test_loaded_state_continues_identically(self, toy_state):
        step_month(toy_state)
        restored = state_from_bytes(snapshot_bytes(toy_state))
        _, a, _ = step_month(toy_state)
        _, b, _ = step_month(restored)
        assert a.model_dump() == b.model_dump()

    def test_save_and_load_through_storage(self, toy_state, storage):
        location = save_snapshot(toy_state, storage, "runs/toy.dsnap")
        assert location.endswith("toy.dsnap")
        loaded = load_snapshot(storage, "runs/toy.dsnap", toy_state.config.config_hash())
        assert loaded.name == toy_state.name
        assert loaded.month == toy_state.month

    def test_other_config_hash_only_warns(self, toy_state, mocker):
        log = mocker.patch("deployers.services.snapshot.logger")
        state = state_from_bytes(snapshot_bytes(toy_state), expected_config_hash="0" * 64)
        assert state.name == "TOYLAND"
        assert "differs" in log.warning.call_args.args[0]


class TestSnapshotErrors:
    def test_missing_file(self, storage):
        with pytest.raises(SnapshotError) as e:
            load_snapshot(storage, "nope.dsnap")
        assert e.value.section == "file"

    @pytest.mark.parametrize(
        "data",
        [b"", b"PK\x03\x04 zip\n{}\n", f"{MAGIC} 2\n{{}}\n".encode(), f"{MAGIC} 1\n".encode(), f"{MAGIC} 1\n{{]\n".encode()],
    )
    def test_bad_header(self, data):
        with pytest.raises(SnapshotError) as e:
            read_header(data)
        assert e.value.section == "header"

    def test_truncated_state(self, toy_state):
        data = snapshot_bytes(toy_state)
        with pytest.raises(SnapshotError, match="truncated") as e:
            state_from_bytes(data[:-10])
        assert e.value.section == "state"

    def test_corrupted_config(self, toy_state):
        data = bytearray(snapshot_bytes(toy_state))
        _, offset = read_header(bytes(data))
        data[offset] ^= 0xFF
        with pytest.raises(SnapshotError, match="checksum") as e:
            state_from_bytes(bytes(data))
        assert e.value.section == "config"
