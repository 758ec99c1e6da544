"""Tests for world building and message routing."""

import pytest

from deployers.errors import WorldError
from deployers.models.tables import AccountKind
from deployers.models.world import TradeMessage, WorldConfig
from deployers.services.engine import step_month
from deployers.services.multicountry import (
    WorldRunner,
    WorldState,
    build_world,
    live_partners,
    route_messages,
)


@pytest.fixture
def world_config():
    return WorldConfig.model_validate(
        {
            "members": [
                {"country": "ES", "seed": 1, "n_active": 200, "active_population": 200,
                 "partners": [{"partner": "PT", "mode": "agg"}]},
                {"country": "PT", "seed": 2, "n_active": 200, "active_population": 200,
                 "partners": [{"partner": "ES", "mode": "agg"}]},
            ],
            "months": 2,
        }
    )


def message(sender, receiver, deliveries=(1, 2)):
    return TradeMessage(
        sender=sender, receiver=receiver, month=0, sectors=["A01", "C10"],
        export_orders=[5], import_deliveries=list(deliveries), transfers=3,
    )


def test_live_partners():
    codes = ["P01_A01", "X02_PT", "X03_FR_C10", "X04_RoW", "H05_Households"]
    kinds = [AccountKind.PRODUCER, *[AccountKind.EXTERNAL] * 3, AccountKind.HOUSEHOLDS]
    assert live_partners(codes, kinds, ["PT", "FR"]) == {1: "PT", 2: "FR"}


class TestRouteMessages:
    def test_aggregated_receiver_gets_summed_deliveries(self, world_config):
        world = WorldState(config=world_config, states={})
        boxes = route_messages({"ES": [message("ES", "PT")]}, world)
        assert boxes["ES"] == []
        (delivered,) = boxes["PT"]
        assert delivered.import_deliveries == [3]
        assert delivered.transfers == 3

    def test_rest_of_world_absorbs(self, world_config):
        world = WorldState(config=world_config, states={})
        boxes = route_messages({"ES": [message("ES", "RoW")]}, world)
        assert boxes == {"ES": [], "PT": []}

    def test_non_member_receiver(self, world_config):
        world = WorldState(config=world_config, states={})
        with pytest.raises(WorldError) as e:
            route_messages({"ES": [message("ES", "FR")]}, world)
        assert e.value.country == "ES"


class TestBuildWorld:
    def test_members_know_their_live_partners(self, icio, world_config):
        world = build_world(icio, world_config)
        assert world.members == ["ES", "PT"]
        es = world.states["ES"]
        assert es.name == "ES"
        assert es.n_active == 200
        (x,) = es.interface_firms
        assert (x.partner, x.partner_label) == ("PT", "PT")
        assert world.mailboxes == {"ES": [], "PT": []}

    def test_unknown_member_country(self, icio):
        config = WorldConfig.model_validate(
            {"members": [{"country": "FR", "seed": 1, "n_active": 200, "active_population": 200}]}
        )
        with pytest.raises(Exception, match="FR"):
            build_world(icio, config)

    def test_members_without_deployment_are_left_as_built(self, icio, world_config):
        config = world_config.model_copy(
            update={"members": [m.model_copy(update={"deploy": False}) for m in world_config.members]}
        )
        world = build_world(icio, config)
        assert WorldRunner(world).deploy() == {"ES": True, "PT": True}
        assert world.epoch == 0


def test_runner_needs_a_worker(icio, world_config):
    world = build_world(icio, world_config)
    with pytest.raises(WorldError):
        WorldRunner(world, workers=0).workers  # noqa: B018


def test_runner_falls_back_to_configured_workers(icio, world_config):
    world = build_world(icio, world_config.model_copy(update={"workers": 3}))
    assert WorldRunner(world).workers == 3
    assert WorldRunner(world, workers=2).workers == 2


def test_unfilled_orders_travel_both_ways(icio, world_config):
    world = build_world(icio, world_config)
    es = world.states["ES"]
    inbox = [
        TradeMessage(
            sender="PT", receiver="ES", month=0, sectors=["A01", "C10"],
            export_orders=[5], import_deliveries=[1, 2], transfers=3, shortfall=[4, 0],
        )
    ]
    _, report, outbox = step_month(es, inbox)
    assert report.import_shortfall == {"PT": 4}
    (out,) = outbox
    # No firm exists yet, so none of PT's order could be served.
    assert sum(out.shortfall) == 5
    assert es.unmet_national[es.producer_accounts()].sum() >= 5
    assert report.audit_drift == 0
