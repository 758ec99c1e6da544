"""Tests for country SAM extraction from the synthetic 2x2 inter-country table."""

import numpy as np
import pytest

from deployers.errors import ExtractionError, ScalingError
from deployers.models.config import LaborShareRule
from deployers.models.tables import CountrySamSpec, PartnerMode
from deployers.services.extraction import (
    aggregate_blocks,
    external_account_partner,
    extract_country_sam,
    split_value_added,
)
from deployers.services.sam_format import emit_sam, parse_sam


@pytest.fixture
def spain(icio):
    return extract_country_sam(icio, CountrySamSpec(home="ES", active_population=200))


def test_account_layout_without_partners(spain):
    assert spain.codes == [
        "P01_A01",
        "P02_C10",
        "F03_GFCF",
        "X04_RoW",
        "L05_Labor",
        "K06_GrossOpSurplus",
        "T07_TaxProduction",
        "T08_TaxProducts",
        "T09_TaxIncome",
        "G10_Government",
        "H11_Households",
    ]
    assert spain.region == "ES"
    assert spain.unit_scale == 1e6


def test_balanced_with_known_totals(spain):
    rows, cols = spain.row_sums(), spain.col_sums()
    np.testing.assert_allclose(rows, cols, atol=1e-9)
    assert rows[spain.index("P01_A01")] == pytest.approx(75.0)
    assert rows[spain.index("P02_C10")] == pytest.approx(90.0)
    assert rows[spain.index("X04_RoW")] == pytest.approx(34.0)
    assert rows[spain.index("F03_GFCF")] == pytest.approx(36.0)


def test_institutional_closure(spain):
    assert spain.flow("P01_A01", "P01_A01") == 10
    assert spain.flow("L05_Labor", "P01_A01") == 30
    assert spain.flow("H11_Households", "L05_Labor") == 50
    assert spain.flow("H11_Households", "K06_GrossOpSurplus") == 51
    assert spain.flow("G10_Government", "T07_TaxProduction") == 3
    assert spain.flow("G10_Government", "T08_TaxProducts") == 6
    # Government spends one unit more than it collects: the gap becomes income tax.
    assert spain.flow("T09_TaxIncome", "H11_Households") == 1
    assert spain.flow("G10_Government", "T09_TaxIncome") == 1
    assert spain.flow("F03_GFCF", "H11_Households") == pytest.approx(22.0)


def test_external_account(spain):
    assert spain.flow("X04_RoW", "P01_A01") == 3
    assert spain.flow("X04_RoW", "P02_C10") == 5
    assert spain.flow("X04_RoW", "H11_Households") == 5
    assert spain.flow("X04_RoW", "F03_GFCF") == pytest.approx(21.0)
    assert spain.flow("P01_A01", "X04_RoW") == pytest.approx(10.0)
    assert spain.flow("F03_GFCF", "X04_RoW") == pytest.approx(14.0)


def test_product_taxes_on_final_demand(spain):
    assert spain.flow("T08_TaxProducts", "P01_A01") == 1
    assert spain.flow("T08_TaxProducts", "P02_C10") == 2
    assert spain.flow("T08_TaxProducts", "H11_Households") == 3


def test_aggregated_partner_matches_residual(icio, spain):
    spec = CountrySamSpec(home="ES", partners=[PartnerMode(partner="PT", mode="agg")])
    table = extract_country_sam(icio, spec)
    assert table.codes[3] == "X04_PT"
    np.testing.assert_array_equal(table.flows, spain.flows)


def test_disaggregated_partner_sums_to_aggregated(icio, spain):
    spec = CountrySamSpec(home="ES", partners=CountrySamSpec.parse_partners("PT:dis"))
    table = extract_country_sam(icio, spec)
    assert table.codes[3:5] == ["X04_PT_A01", "X05_PT_C10"]
    assert table.codes[5] == "L06_Labor"
    assert table.size == 12

    groups = [[0], [1], [2], [3, 4], *([i] for i in range(5, 12))]
    merged = aggregate_blocks(table.flows, groups)
    np.testing.assert_allclose(merged, spain.flows, atol=1e-9)


def test_extracted_sam_survives_the_text_format(spain):
    assert parse_sam(emit_sam(spain)).equals(spain)


def test_unknown_countries(icio):
    with pytest.raises(ExtractionError):
        extract_country_sam(icio, CountrySamSpec(home="FR"))
    with pytest.raises(ExtractionError):
        extract_country_sam(icio, CountrySamSpec(home="ES", partners=[PartnerMode(partner="FR")]))


def test_partner_list_validation():
    with pytest.raises(ValueError):
        CountrySamSpec(home="ES", partners=[PartnerMode(partner="ES")])
    with pytest.raises(ValueError):
        CountrySamSpec(home="ES", partners=CountrySamSpec.parse_partners("PT:agg,PT:dis"))


def test_split_value_added():
    labor, surplus = split_value_added(10.0, LaborShareRule(default=0.6), "A01")
    assert (labor, surplus) == pytest.approx((6.0, 4.0))
    with pytest.raises(ScalingError):
        split_value_added(10.0, LaborShareRule(overrides={"A01": 1.5}), "A01")


def test_external_account_partner():
    assert external_account_partner("X05_FR_C10T12") == ("FR", "C10T12")
    assert external_account_partner("X09_DE") == ("DE", None)
