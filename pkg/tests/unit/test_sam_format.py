"""Tests for the SAM parser and emitter."""

import pytest

from deployers.errors import TableBalanceError, TableFormatError
from deployers.models.tables import AccountId, AccountKind, PartnerMode
from deployers.services.sam_format import (
    balance_summary,
    detect_delimiter,
    emit_sam,
    parse_number,
    parse_sam,
    read_sam,
)
from deployers.services.targets import scale_to_agents


@pytest.fixture
def toy_text(toy_sam_path):
    return toy_sam_path.read_text(encoding="utf-8")


class TestParseSam:
    def test_metadata(self, toy_sam):
        assert toy_sam.name == "TOY"
        assert toy_sam.region == "TOYLAND"
        assert toy_sam.year == 2008
        assert toy_sam.population == 400
        assert toy_sam.active_population == 200
        assert toy_sam.unit_scale == 1000
        assert toy_sam.currency == "euros"

    def test_accounts_and_flows(self, toy_sam):
        assert toy_sam.size == 9
        assert toy_sam.accounts[0] == AccountId(code="P01_Goods", kind=AccountKind.PRODUCER)
        assert toy_sam.accounts[5].kind == AccountKind.TAX_PRODUCTS
        assert toy_sam.accounts[6].kind == AccountKind.TAX_INCOME
        assert toy_sam.flow("H09_Households", "L04_Labor") == 40
        assert toy_sam.flow("P01_Goods", "H09_Households") == 45

    def test_summary(self, toy_sam):
        assert balance_summary(toy_sam) == "9 accounts, balanced (max rel err 0.0e+00)"

    def test_semicolon_layout(self, toy_sam):
        assert parse_sam(emit_sam(toy_sam, delimiter=";")).equals(toy_sam)

    def test_canonical_document_reemits_unchanged(self, toy_sam, toy_text):
        assert emit_sam(toy_sam) == toy_text

    def test_optional_parts_may_be_missing(self, fixtures_dir):
        text = (fixtures_dir / "empty.sam").read_text(encoding="utf-8")
        table = parse_sam(text)
        assert table.codes == ["P01_Goods", "G02_Government", "H03_Households"]
        assert table.unit_scale == 1
        assert table.declared_row_sums is None

    def test_to_frame(self, toy_sam):
        frame = toy_sam.to_frame()
        assert frame.loc["G08_Government", "T07_TaxIncome"] == 10


class TestParseSamErrors:
    def test_malformed_header(self):
        with pytest.raises(TableFormatError, match="malformed header") as e:
            parse_sam("not a table\n\tP01_A\nP01_A\t0\n")
        assert e.value.line == 1

    def test_empty_document(self):
        with pytest.raises(TableFormatError, match="malformed header"):
            parse_sam("\n\n")

    def test_unparseable_cell_reports_position(self, toy_text):
        with pytest.raises(TableFormatError) as e:
            parse_sam(toy_text.replace("P01_Goods\t20\t", "P01_Goods\t2,0\t"))
        assert e.value.line == 5
        assert e.value.column == "P01_Goods"
        assert str(e.value).startswith("[line 5, column P01_Goods]")

    def test_unbalanced_account(self, toy_text):
        text = toy_text.replace("\t15\t45\t100\tP01_Goods", "\t15\t55\t100\tP01_Goods")
        with pytest.raises(TableBalanceError) as e:
            parse_sam(text)
        assert e.value.account == "H09_Households"

    def test_negative_flow_outside_tax_row(self, toy_text):
        text = toy_text.replace(
            "F02_GFCF\t0\t0\t0\t0\t0\t0\t0\t0\t10", "F02_GFCF\t0\t0\t0\t0\t0\t0\t0\t0\t-10"
        )
        with pytest.raises(TableFormatError, match="negative flow") as e:
            parse_sam(text)
        assert e.value.column == "H09_Households"

    def test_missing_row(self, toy_text):
        lines = [line for line in toy_text.splitlines() if not line.startswith("H09_Households")]
        with pytest.raises(TableFormatError, match="non-square"):
            parse_sam("\n".join(lines))

    def test_content_after_closing_brace(self, toy_text):
        with pytest.raises(TableFormatError, match="after the closing brace"):
            parse_sam(toy_text + "extra\n")

    def test_unknown_account_prefix(self, toy_text):
        with pytest.raises(TableFormatError) as e:
            parse_sam(toy_text.replace("F02_GFCF", "Z02_GFCF"))
        assert e.value.column == "Z02_GFCF"


class TestAccountCodes:
    @pytest.mark.parametrize(
        "code,kind",
        [
            ("P01_AgroPesc", AccountKind.PRODUCER),
            ("N02_Services", AccountKind.PRODUCER),
            ("T13_TaxProducts", AccountKind.TAX_PRODUCTS),
            ("T12_TaxProduction", AccountKind.TAX_PRODUCTION),
            ("T11_SSoc", AccountKind.TAX_SSOC),
            ("T14_IRPF", AccountKind.TAX_INCOME),
            ("X10_RoW", AccountKind.EXTERNAL),
        ],
    )
    def test_kind_from_prefix(self, code, kind):
        assert AccountId.from_code(code).kind == kind

    @pytest.mark.parametrize("code", ["Z01_Other", "T09_Levy", "", "1P_Goods"])
    def test_unrecognised_codes(self, code):
        with pytest.raises(TableFormatError):
            AccountId.from_code(code)


def test_parse_number():
    assert parse_number("", 1, "A") == 0.0
    assert parse_number("1e3", 1, "A") == 1000.0
    assert parse_number(" -2.5 ", 1, "A") == -2.5
    with pytest.raises(TableFormatError):
        parse_number("1.000,5", 3, "A")


def test_detect_delimiter_requires_tab_or_semicolon():
    assert detect_delimiter(["SAM_table {", "a\tb"]) == "\t"
    assert detect_delimiter(["SAM_table {", "a;b"]) == ";"
    with pytest.raises(TableFormatError):
        detect_delimiter(["SAM_table {", "a,b"])


def test_partner_mode_aliases():
    assert PartnerMode(partner="FR", mode="dis").disaggregated
    assert PartnerMode(partner="DE", mode="agg").mode == "aggregated"


class TestSpanishTable:
    @pytest.fixture
    def sam(self, data_dir):
        return read_sam(data_dir / "mcaesp08.sam")

    def test_header(self, sam):
        assert sam.size == 16
        assert sam.active_population == 2_000_000
        assert sam.unit_scale == 100_000

    def test_flows_and_column_sums(self, sam):
        assert sam.flow("P01_AgroPesc", "P03_Indust") == 24972
        sums = sam.col_sums()
        assert sums[sam.index("P01_AgroPesc")] == 48021
        assert sums[sam.index("P02_EnerPetro")] == 117166

    def test_input_coefficient(self, sam):
        p01, p03 = sam.index("P01_AgroPesc"), sam.index("P03_Indust")
        targets = scale_to_agents(sam, 500)
        assert targets.coefficients[p03, p01] == pytest.approx(0.17942, abs=1e-5)
