"""Two countries stepping in lockstep on the synthetic inter-country table."""

import json

import pytest

from deployers.cli.main import main
from deployers.lib.artifacts import read_csv_text
from deployers.models.world import WorldConfig
from deployers.services.multicountry import WorldRunner, build_world, run_world


def world_data(months: int = 3, workers: int = 1, mode: str = "agg") -> dict:
    return {
        "members": [
            {"country": "ES", "seed": 1, "n_active": 200, "active_population": 200,
             "partners": [{"partner": "PT", "mode": mode}]},
            {"country": "PT", "seed": 2, "n_active": 200, "active_population": 200,
             "partners": [{"partner": "ES", "mode": mode}]},
        ],
        "months": months,
        "workers": workers,
    }


@pytest.fixture
def world(icio):
    return build_world(icio, WorldConfig.model_validate(world_data()))


def test_every_member_stays_conserved(world):
    WorldRunner(world).run(3)
    assert world.epoch == 3
    for reports in world.reports.values():
        assert [r.month for r in reports] == [0, 1, 2]
        assert all(r.audit_drift == 0 for r in reports)


def test_exports_arrive_as_imports_a_month_later(icio):
    data = world_data(mode="dis")
    for member in data["members"]:
        member["deployment"] = {"max_deploy_months": 2, "max_calib_months": 1}
    world = build_world(icio, WorldConfig.model_validate(data))
    runner = WorldRunner(world)
    runner.deploy()
    runner.run(2)
    compared = 0
    for home, partner in (("ES", "PT"), ("PT", "ES")):
        sent, received = world.reports[home], world.reports[partner]
        for m in range(len(sent) - 1):
            exported = sent[m].exports_by_sector.get(partner, [])
            if any(exported):
                assert received[m + 1].imports_by_sector[home] == exported
                compared += 1
    assert compared > 0


def test_worker_count_does_not_change_results(icio):
    config = WorldConfig.model_validate(world_data())
    serial = run_world(build_world(icio, config), months=2, workers=1, deploy=False)
    parallel = run_world(build_world(icio, config), months=2, workers=2, deploy=False)
    for country in ("ES", "PT"):
        assert [r.model_dump() for r in serial.reports[country]] == [
            r.model_dump() for r in parallel.reports[country]
        ]


def test_world_command(data_dir, tmp_path, capsys):
    config = {**world_data(months=2), "figaro": str(data_dir / "synthetic_icio_2x2.csv")}
    path = tmp_path / "world.json"
    path.write_text(json.dumps(config))
    with pytest.raises(SystemExit) as e:
        main(["world", str(path), "--no-deploy", "--snapshots", "--log-format", "json", "-o", str(tmp_path / "out")])
    assert e.value.code == 0
    summary = json.loads(capsys.readouterr().out)
    assert set(summary["countries"]) == {"ES", "PT"}
    out = tmp_path / "out"
    _, es = read_csv_text((out / "ES" / "series.csv").read_text())
    assert list(es["month"]) == [0, 1]
    assert (out / "PT" / "snapshot.dsnap").exists()
    _, total = read_csv_text((out / "world_summary.csv").read_text())
    assert len(total) == 4


@pytest.mark.slow
def test_lockstep_deployment_of_both_members(icio):
    data = world_data()
    for member in data["members"]:
        member["deployment"] = {"max_deploy_months": 3, "max_calib_months": 3}
    world = build_world(icio, WorldConfig.model_validate(data))
    converged = WorldRunner(world, workers=2).deploy()
    assert converged == {"ES": False, "PT": False}
    assert world.epoch == 6
    assert all(state.assisted for state in world.states.values())
    assert all(r.audit_drift == 0 for reports in world.reports.values() for r in reports)
