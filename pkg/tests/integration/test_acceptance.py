"""Long runs on the shipped tables. Deselected by default; run with `pytest -m slow`."""

import numpy as np
import pytest

from deployers.models.config import RunConfig
from deployers.models.tables import AccountKind
from deployers.models.world import WorldConfig
from deployers.services.deployment import deploy_and_calibrate
from deployers.services.economy import build_country_state
from deployers.services.multicountry import build_world, run_world
from deployers.services.sam_format import read_sam
from deployers.services.scenario import run_scenario
from deployers.services.targets import scale_to_agents

pytestmark = pytest.mark.slow

HORIZON = 360


def calibrated_spain(data_dir, n_active, seed):
    sam = read_sam(data_dir / "mcaesp08.sam")
    config = RunConfig(n_active=n_active, seed=seed)
    state = build_country_state(scale_to_agents(sam, n_active), config, name=sam.region)
    deployed, calibrated = deploy_and_calibrate(state)
    return sam, deployed, calibrated


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_spanish_sam_is_reproduced(data_dir, seed):
    sam, deployed, calibrated = calibrated_spain(data_dir, 2000, seed)
    assert deployed.converged
    assert calibrated.converged
    state = calibrated.state
    assert 0.01 <= state.config.household.kappa <= 1.0

    result = run_scenario(state, [], months=HORIZON - state.month)
    assert state.month == HORIZON
    assert all(r.audit_drift == 0 for r in result.reports)
    assert result.survey is not None
    assert np.isfinite(result.survey.sim_sam.flows).all()

    rows = sam.indices_of(AccountKind.PRODUCER)
    cols = sam.indices_of(
        AccountKind.PRODUCER, AccountKind.HOUSEHOLDS, AccountKind.GOVERNMENT, AccountKind.GFCF
    )
    ratio = result.survey.ratio[np.ix_(rows, cols)]
    cells = ratio[~np.isnan(ratio)]
    assert cells.size > 0
    assert ((cells >= 85) & (cells <= 120)).all(), ratio


def test_free_run_keeps_producing(data_dir):
    _, _, calibrated = calibrated_spain(data_dir, 500, 5)
    result = run_scenario(calibrated.state, [], months=12)
    assert all(r.total_output > 0 for r in result.reports)
    assert all(r.consumption > 0 for r in result.reports)
    assert all(r.audit_drift == 0 for r in result.reports)


def test_two_country_world_after_deployment(icio):
    config = WorldConfig.model_validate(
        {
            "members": [
                {"country": "ES", "seed": 11, "n_active": 500, "active_population": 500,
                 "partners": [{"partner": "PT", "mode": "dis"}]},
                {"country": "PT", "seed": 12, "n_active": 500, "active_population": 500,
                 "partners": [{"partner": "ES", "mode": "agg"}]},
            ],
            "months": 24,
            "workers": 2,
        }
    )
    world = run_world(build_world(icio, config), deploy=True)
    for country, reports in world.reports.items():
        assert all(r.audit_drift == 0 for r in reports), country
    assert world.reports["ES"][-1].month == world.reports["PT"][-1].month
