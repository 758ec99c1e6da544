"""Tests for scaling a SAM to an agent economy."""

import numpy as np
import pytest

from deployers.errors import ScalingError
from deployers.models.tables import AccountKind
from deployers.services.sam_format import read_sam
from deployers.services.targets import scale_to_agents, targets_frame


def test_scale_factor_and_monthly_flows(toy_targets):
    assert toy_targets.factor == 1.0
    # 45 thousand euros a year, in cents per month
    assert toy_targets.monthly_flow(0, 8) == pytest.approx(375000.0)
    assert toy_targets.gross_output() == pytest.approx([100 * 1e5 / 12])


def test_wage_and_employment(toy_targets):
    assert toy_targets.annual_wage == pytest.approx(200.0)
    assert toy_targets.monthly_wage == 1667
    np.testing.assert_allclose(toy_targets.employment, [200.0])
    assert toy_targets.employment.sum() == pytest.approx(toy_targets.n_active)


def test_coefficients(toy_targets):
    assert toy_targets.labor_coefficient(0) == pytest.approx(0.4)
    assert toy_targets.coefficients[0, 0] == pytest.approx(0.2)
    assert toy_targets.productivity(0) == pytest.approx(1667 / 40)


def test_final_demand_by_kind(toy_targets):
    assert toy_targets.final_demand(AccountKind.HOUSEHOLDS) == pytest.approx([375000.0])
    assert toy_targets.final_demand(AccountKind.GOVERNMENT) == pytest.approx([125000.0])


def test_larger_population_keeps_the_wage(toy_sam):
    targets = scale_to_agents(toy_sam, 400)
    assert targets.factor == 2.0
    assert targets.monthly_wage == 1667
    np.testing.assert_allclose(targets.employment, [400.0])


def test_doubling_the_population_doubles_every_flow(toy_sam):
    small, large = scale_to_agents(toy_sam, 200), scale_to_agents(toy_sam, 400)
    np.testing.assert_allclose(large.monthly, 2 * small.monthly)
    np.testing.assert_allclose(large.annual, 2 * small.annual)
    np.testing.assert_allclose(large.gross_output(), 2 * np.asarray(small.gross_output()))
    np.testing.assert_allclose(large.employment, 2 * small.employment)
    np.testing.assert_array_equal(large.coefficients, small.coefficients)


def test_population_below_minimum(toy_sam):
    with pytest.raises(ScalingError, match="minimum viable"):
        scale_to_agents(toy_sam, 199)


def test_missing_active_population(toy_sam):
    with pytest.raises(ScalingError, match="no active population"):
        scale_to_agents(toy_sam.model_copy(update={"active_population": 0.0}), 200)


def test_empty_table_scales_to_zero_targets(fixtures_dir):
    targets = scale_to_agents(read_sam(fixtures_dir / "empty.sam"), 200)
    assert targets.monthly_wage == 0
    np.testing.assert_array_equal(targets.employment, [0.0])
    assert targets.productivity(0) == float("inf")


def test_targets_frame(toy_targets):
    frame = targets_frame(toy_targets)
    assert list(frame["account"]) == ["P01_Goods"]
    assert frame.loc[0, "final_external"] == pytest.approx(10 * 1e5 / 12)
    assert frame.loc[0, "monthly_wage"] == 1667
