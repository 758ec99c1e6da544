"""On-disk formats: SAM text, snapshot container and artifact headers."""

import json

from deployers.lib.artifacts import parse_header
from deployers.models.tables import CountrySamSpec
from deployers.services.extraction import extract_country_sam
from deployers.services.sam_format import emit_sam, parse_sam
from deployers.services.snapshot import FORMAT_VERSION, MAGIC, snapshot_bytes


class TestSamText:
    def test_canonical_emission_reproduces_the_fixture(self, toy_sam, toy_sam_path):
        assert emit_sam(toy_sam) == toy_sam_path.read_text(encoding="utf-8")

    def test_document_layout(self, toy_sam):
        lines = emit_sam(toy_sam).splitlines()
        assert lines[0] == "SAM_table { TOY"
        assert lines[1] == "TOYLAND"
        assert lines[-1] == "}"
        assert lines[-2].startswith("colSUM")
        header = lines[3].split("\t")
        assert header[1:10] == toy_sam.codes
        assert header[-1] == "rowSUM"

    def test_extracted_sam_reparses(self, icio):
        sam = extract_country_sam(icio, CountrySamSpec(home="PT", active_population=100))
        again = parse_sam(emit_sam(sam))
        assert again.codes == sam.codes
        assert emit_sam(again) == emit_sam(sam)


class TestSnapshotContainer:
    def test_two_text_lines_then_sections(self, toy_state):
        data = snapshot_bytes(toy_state)
        magic, header, body = data.split(b"\n", 2)
        assert magic.decode() == f"{MAGIC} {FORMAT_VERSION}"
        fields = json.loads(header)
        assert set(fields) == {"format_version", "config_hash", "seed", "month", "source", "country", "sections"}
        assert [s["name"] for s in fields["sections"]] == ["config", "state"]
        assert len(body) == sum(s["length"] for s in fields["sections"])


def test_artifact_header_fields():
    fields = parse_header("# deployers format=1 config_hash=ab12 seed=3 window=12")
    assert fields == {"format": "1", "config_hash": "ab12", "seed": "3", "window": "12"}
