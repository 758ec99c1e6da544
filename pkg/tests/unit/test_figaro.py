"""Tests for FIGARO CSV parsing."""

import io

import pytest

from deployers.errors import TableBalanceError, TableFormatError
from deployers.services.figaro import emit_figaro_csv, icio_summary, parse_figaro_csv, split_label


def test_dimensions(icio):
    assert icio.countries == ["ES", "PT"]
    assert icio.sectors == ["A01", "C10"]
    assert icio.fd_categories == ["P3_S13", "P3_S14", "P51G"]
    assert icio.va_codes == ["D1", "B2A3G", "D29X39", "D21X31"]
    assert icio_summary(icio) == (
        "2 countries x 2 sectors = 4 industry accounts, "
        "3 final-demand categories, 4 value-added rows"
    )


def test_tensor_views(icio):
    assert icio.output[0, 0] == pytest.approx(75.0)
    assert icio.output[0, 1] == pytest.approx(90.0)
    assert icio.z[0, 0, 0, 1] == 20
    assert icio.z[1, 1, 0, 0] == 2
    assert icio.final_demand[1, 0, 1, 1] == 20


def test_emit_reproduces_the_source(icio, data_dir):
    source = (data_dir / "synthetic_icio_2x2.csv").read_text(encoding="utf-8")
    assert emit_figaro_csv(icio).splitlines() == source.splitlines()


def test_split_label():
    assert split_label("ES_P3_S14") == ("ES", "P3_S14")
    with pytest.raises(TableFormatError):
        split_label("ESA01", line=4)


class TestParseErrors:
    def test_ragged_row(self):
        with pytest.raises(TableFormatError, match="ragged") as e:
            parse_figaro_csv(io.StringIO("rowLabels,ES_A01\nES_A01,1,2\n"))
        assert e.value.line == 2

    def test_unparseable_cell(self):
        with pytest.raises(TableFormatError) as e:
            parse_figaro_csv(io.StringIO("rowLabels,ES_A01\nES_A01,abc\n"))
        assert e.value.line == 2
        assert e.value.column == "ES_A01"

    def test_bad_label(self):
        with pytest.raises(TableFormatError):
            parse_figaro_csv(io.StringIO("rowLabels,ESA01\nES_A01,1\n"))

    def test_incomplete_industry_grid(self):
        text = "rowLabels,ES_A01,PT_C10\nES_A01,1,0\nPT_C10,0,1\n"
        with pytest.raises(TableFormatError, match="inconsistent dimensions"):
            parse_figaro_csv(io.StringIO(text))

    def test_unbalanced_industry(self, data_dir):
        source = (data_dir / "synthetic_icio_2x2.csv").read_text(encoding="utf-8")
        with pytest.raises(TableBalanceError) as e:
            parse_figaro_csv(io.StringIO(source.replace("W2_D1,30,", "W2_D1,40,")))
        assert e.value.account == "ES_A01"
