"""Tests for the deployment and calibration controllers."""

import pytest

from deployers.errors import ConvergenceWarning
from deployers.models.config import DeploymentConfig
from deployers.services.deployment import (
    calibrate_kappa_step,
    consumption_totals,
    detect_steady_state,
    deviation_report,
    has_activity_targets,
    run_calibration,
    run_deployment,
    set_kappa,
    target_unemployment,
)
from deployers.services.economy import build_country_state
from deployers.services.engine import step_month
from deployers.services.sam_format import read_sam
from deployers.services.targets import scale_to_agents


@pytest.fixture
def empty_state(fixtures_dir, toy_config):
    return build_country_state(scale_to_agents(read_sam(fixtures_dir / "empty.sam"), 200), toy_config)


class TestSteadyState:
    def test_flat_series(self):
        assert detect_steady_state({"a": [5.0] * 10, "b": [0.0] * 10}, window=5, tol=0.01)

    def test_trend_is_not_steady(self):
        assert not detect_steady_state({"a": list(range(10))}, window=5, tol=0.01)

    def test_short_series_is_not_steady(self):
        assert not detect_steady_state({"a": [1.0, 1.0]}, window=5, tol=0.01)

    def test_window_too_small(self):
        with pytest.raises(ValueError):
            detect_steady_state({"a": [1.0]}, window=1, tol=0.01)


class TestKappaFeedback:
    def test_overconsumption_lowers_kappa(self):
        kappa, error = calibrate_kappa_step(0.1, 110.0, 100.0, 0.5)
        assert kappa == pytest.approx(0.095)
        assert error == pytest.approx(0.1)

    def test_no_target_no_change(self):
        assert calibrate_kappa_step(0.1, 50.0, 0.0, 0.5) == (0.1, 0.0)

    def test_set_kappa_replaces_the_config(self, toy_state):
        before = toy_state.config
        set_kappa(toy_state, 0.3)
        assert toy_state.config.household.kappa == 0.3
        assert before.household.kappa == 0.1


def test_consumption_totals(toy_state):
    total, target = consumption_totals(toy_state)
    assert target == pytest.approx(50 * 1e5 / 12)
    assert total == pytest.approx(200 * 0.1 * 5001)


class TestDeviationReport:
    def test_no_history_no_rows(self, toy_state):
        report = deviation_report(toy_state, 3)
        assert report.rows == []
        assert report.worst == 0.0

    def test_rows_after_a_month(self, toy_state):
        step_month(toy_state)
        report = deviation_report(toy_state, 3)
        assert report.window == 1
        metrics = {r.metric for r in report.rows}
        assert metrics == {"gross_output", "final_demand", "intermediate", "unemployment"}
        assert [r.error for r in report.rows] == sorted((r.error for r in report.rows), reverse=True)
        final = {r.account for r in report.rows if r.metric == "final_demand"}
        assert final == {
            "P01_Goods/F02_GFCF",
            "P01_Goods/X03_RoW",
            "P01_Goods/G08_Government",
            "P01_Goods/H09_Households",
        }

    def test_employment_targets_cover_everyone(self, toy_state):
        assert target_unemployment(toy_state) == 0.0


class TestRunDeployment:
    def test_empty_table_deploys_immediately(self, empty_state):
        assert not has_activity_targets(empty_state)
        result = run_deployment(empty_state)
        assert result.converged
        assert result.months == 0
        assert empty_state.month == 0

    def test_too_short_to_compare_warns(self, toy_state):
        config = DeploymentConfig(max_deploy_months=2, match_window=3)
        with pytest.warns(ConvergenceWarning):
            result = run_deployment(toy_state, config)
        assert not result.converged
        assert result.months == 2
        assert result.state is toy_state
        assert toy_state.month == 2
        assert toy_state.assisted


class TestRunCalibration:
    def test_empty_table_needs_no_calibration(self, empty_state):
        result = run_calibration(empty_state)
        assert result.converged
        assert result.kappa_path == []

    def test_unsettled_economy_warns_and_records_kappa(self, toy_state):
        config = DeploymentConfig(max_calib_months=2, steady_window=24)
        with pytest.warns(ConvergenceWarning):
            result = run_calibration(toy_state, config)
        assert not result.converged
        assert len(result.kappa_path) == 2
        assert toy_state.config.household.kappa == result.kappa_path[-1]
        assert all(0.01 <= k <= 1.0 for k in result.kappa_path)
