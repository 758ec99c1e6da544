"""Tests for the pure behavioural rules."""

import math

import pytest

from deployers.errors import RuleError
from deployers.models.config import HouseholdParams, RiskParams
from deployers.models.tables import AccountKind
from deployers.services.rules import (
    BankPosition,
    BorrowerPosition,
    ColumnCoefficients,
    Denial,
    DenialReason,
    ExitDecision,
    FirmPnl,
    Offer,
    Order,
    Technology,
    Trade,
    adjust_kappa,
    allocate_budget,
    clearing_house_match,
    consumption_budget,
    default_probability,
    dividend_and_tax_flows,
    firm_entry_decision,
    firm_exit_decision,
    gfcf_distribute,
    input_requirements,
    liquidation_waterfall,
    loan_offer,
    price_update,
    production_plan,
)


class TestConsumptionBudget:
    params = HouseholdParams(kappa=0.1, phi=3.0)

    def test_buffer_stock_rule(self):
        assert consumption_budget(100, 500, self.params) == pytest.approx(120.0)

    def test_low_wealth_cuts_consumption(self):
        assert consumption_budget(100, 0, self.params) == pytest.approx(70.0)

    def test_capped_by_available_money(self):
        assert consumption_budget(100, 500, self.params, available=50) == 50

    def test_never_negative(self):
        assert consumption_budget(0, -1000, self.params) == 0.0


class TestAllocateBudget:
    def test_equal_prices_follow_sam_shares(self):
        assert allocate_budget(100, [3, 1], [2.0, 2.0], beta=1.0) == [75, 25]

    def test_dearer_sector_loses_share(self):
        assert allocate_budget(100, [1, 1], [1.0, 2.0], beta=1.0) == [73, 27]

    def test_zero_share_sector_gets_nothing(self):
        assert allocate_budget(100, [0, 1], [5.0, 1.0], beta=1.0) == [0, 100]

    def test_nonpositive_price_rejected(self):
        with pytest.raises(RuleError):
            allocate_budget(100, [1, 1], [0.0, 1.0], beta=1.0)

    def test_all_zero_shares_rejected(self):
        with pytest.raises(RuleError):
            allocate_budget(100, [0, 0], [1.0, 1.0], beta=1.0)


class TestPriceUpdate:
    def test_trade_moves_prices_apart(self):
        traded, buyer, seller = price_update(10.0, 9.0, 0.1)
        assert traded
        assert buyer == pytest.approx(9.0)
        assert seller == pytest.approx(9.9)

    def test_no_trade_moves_prices_together(self):
        traded, buyer, seller = price_update(9.0, 10.0, 0.1)
        assert not traded
        assert buyer == pytest.approx(9.9)
        assert seller == pytest.approx(9.0)

    def test_equal_prices_trade(self):
        assert price_update(10.0, 10.0, 0.05) == (True, pytest.approx(9.5), pytest.approx(10.5))

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
    def test_eps_out_of_range(self, eps):
        with pytest.raises(RuleError):
            price_update(1.0, 1.0, eps)


class TestProductionPlan:
    def test_restores_inventory_cover(self):
        assert production_plan([10, 20, 30], 5, 1.5) == pytest.approx(25.0)

    def test_newborn_uses_seed_demand(self):
        assert production_plan([], 0, 1.5, seed_demand=4) == pytest.approx(6.0)

    def test_full_inventory_produces_nothing(self):
        assert production_plan([1], 10, 1.5) == 0.0


class TestInputRequirements:
    column = ColumnCoefficients(
        inputs={0: 0.2},
        labor=0.4,
        capital=0.3,
        taxes={5: (AccountKind.TAX_PRODUCTS, 0.05)},
    )

    def test_leontief(self):
        req = input_requirements(self.column, output=10, price=100, wage=100)
        assert req.ic == {0: pytest.approx(200.0)}
        assert req.labor_bill == pytest.approx(400.0)
        assert req.hires == 4
        assert req.capital_services == pytest.approx(300.0)
        assert req.taxes == {5: pytest.approx(50.0)}

    def test_cobb_douglas_default_alpha_matches_column_shares(self):
        req = input_requirements(self.column, 10, 100, 100, Technology.COBB_DOUGLAS)
        assert req.labor_bill == pytest.approx(400.0)
        assert req.capital_services == pytest.approx(300.0)

    def test_cobb_douglas_explicit_alpha(self):
        req = input_requirements(self.column, 10, 100, 100, "cobb_douglas", alpha=0.5)
        assert req.labor_bill == pytest.approx(350.0)
        assert req.capital_services == pytest.approx(350.0)
        assert req.hires == 4

    def test_negative_output_rejected(self):
        with pytest.raises(RuleError):
            input_requirements(self.column, -1, 100, 100)

    def test_alpha_out_of_range_rejected(self):
        with pytest.raises(RuleError):
            input_requirements(self.column, 1, 100, 100, Technology.COBB_DOUGLAS, alpha=1.5)

    def test_alpha_defaults_to_half_without_value_added(self):
        assert ColumnCoefficients(inputs={}, labor=0.0, capital=0.0).alpha == 0.5


class TestLoanOffer:
    risk = RiskParams(rho=0.1, mu=0.05)
    borrower = BorrowerPosition(debt=0, equity=1000.0, deposits_here=True)

    def test_capital_adequacy_denial(self):
        bank = BankPosition(equity=100, reserves=1000, deposits=1000, loans=1000, car=0.08, rrr=0.02)
        assert loan_offer(bank, self.borrower, 500, 0.02, self.risk) == Denial(DenialReason.CAR)

    def test_reserve_requirement_denial(self):
        bank = BankPosition(equity=1000, reserves=10, deposits=1000, loans=0, car=0.08, rrr=0.02)
        elsewhere = BorrowerPosition(debt=0, equity=1000.0, deposits_here=False)
        assert loan_offer(bank, elsewhere, 100, 0.02, self.risk) == Denial(DenialReason.RRR)

    def test_insolvent_borrower_denial(self):
        bank = BankPosition(equity=1000, reserves=1000, deposits=1000, loans=0, car=0.08, rrr=0.02)
        broke = BorrowerPosition(debt=0, equity=0.0, deposits_here=True)
        assert loan_offer(bank, broke, 100, 0.02, self.risk) == Denial(DenialReason.INSOLVENT)

    def test_risk_priced_offer(self):
        bank = BankPosition(equity=100, reserves=1000, deposits=1000, loans=1000, car=0.08, rrr=0.02)
        offer = loan_offer(bank, self.borrower, 100, 0.02, self.risk)
        assert isinstance(offer, Offer)
        pd = 1 - math.exp(-0.1 * 0.1)
        assert offer.probability_of_default == pytest.approx(pd)
        assert offer.rate == pytest.approx(0.02 + 0.05 * pd)

    def test_nonpositive_amount_rejected(self):
        bank = BankPosition(equity=100, reserves=1000, deposits=1000, loans=0, car=0.08, rrr=0.02)
        with pytest.raises(RuleError):
            loan_offer(bank, self.borrower, 0, 0.02, self.risk)


def test_default_probability_ignores_negative_leverage():
    assert default_probability(0.0, 0.1) == 0.0
    assert default_probability(-2.0, 0.1) == 0.0


class TestClearingHouse:
    def test_matches_best_prices_at_the_ask(self):
        buys = [Order(1, 10.0, 5, agent=1), Order(1, 12.0, 3, agent=2)]
        sells = [Order(1, 9.0, 4, agent=3), Order(1, 11.0, 10, agent=4)]
        trades = clearing_house_match(buys, sells)
        assert trades == [Trade(1, 9.0, 3, buyer=2, seller=3), Trade(1, 9.0, 1, buyer=1, seller=3)]

    def test_partial_fill_then_stop_below_the_next_ask(self):
        buys = [Order(1, 12.0, 5, agent=1), Order(1, 10.0, 5, agent=2)]
        sells = [Order(1, 9.0, 6, agent=3), Order(1, 11.0, 3, agent=4)]
        trades = clearing_house_match(buys, sells)
        assert trades == [Trade(1, 9.0, 5, buyer=1, seller=3), Trade(1, 9.0, 1, buyer=2, seller=3)]
        assert sum(t.quantity for t in trades) == 6

    def test_no_cross_no_trade(self):
        assert clearing_house_match([Order(1, 5.0, 1, 1)], [Order(1, 6.0, 1, 2)]) == []

    def test_unknown_share_rejected(self):
        with pytest.raises(RuleError):
            clearing_house_match([Order(9, 5.0, 1, 1)], [], known_shares={1})

    def test_negative_quantity_rejected(self):
        with pytest.raises(RuleError):
            clearing_house_match([Order(1, 5.0, -1, 1)], [Order(1, 5.0, 1, 2)])


class TestDividendAndTaxFlows:
    taxes = {
        5: (AccountKind.TAX_PRODUCTS, 0.05),
        6: (AccountKind.TAX_PRODUCTION, 0.1),
        7: (AccountKind.TAX_INCOME, 0.2),
    }

    def test_profitable_month(self):
        pnl = FirmPnl(sales=1000, production_value=1200, costs=600)
        dist = dividend_and_tax_flows(pnl, self.taxes, 0.5, {1: 3, 2: 1})
        assert dist.taxes == {5: 50, 6: 120, 7: 23}
        assert dist.profit == 230
        assert dist.dividends == {1: 69, 2: 23}
        assert dist.retained == 115

    def test_loss_pays_no_dividends(self):
        pnl = FirmPnl(sales=100, production_value=0, costs=600)
        dist = dividend_and_tax_flows(pnl, {}, 0.5, {1: 1})
        assert dist.dividends == {}
        assert dist.retained == -500


class TestEntryAndExit:
    @pytest.mark.parametrize("draw,expected", [(0.05, 0), (0.2, 1), (0.5, None)])
    def test_entry_by_cumulative_probability(self, draw, expected):
        assert firm_entry_decision([1.0, 3.0], 0.4, draw) == expected

    def test_no_gap_no_entry(self):
        assert firm_entry_decision([0.0, -2.0], 1.0, 0.0) is None

    def test_exit_on_negative_equity(self):
        assert firm_exit_decision(-1, [], 3, 0.0) == ExitDecision.CLOSE

    def test_exit_on_full_loss_window(self):
        assert firm_exit_decision(10, [5, -1, -2, -3], 3, 0.0) == ExitDecision.CLOSE

    @pytest.mark.parametrize("history", [[-1, 2, -3], [-1, -2]])
    def test_keep_otherwise(self, history):
        assert firm_exit_decision(10, history, 3, 0.0) == ExitDecision.KEEP

    def test_exit_after_a_full_window_without_sales(self):
        assert firm_exit_decision(10, [0, 0, 0], 3, 0.0, sales_history=[0, 0, 0]) == ExitDecision.CLOSE

    def test_a_single_sale_keeps_an_idle_firm_open(self):
        assert firm_exit_decision(10, [0, 0, 0], 3, 0.0, sales_history=[0, 40, 0]) == ExitDecision.KEEP


@pytest.mark.parametrize(
    "liquidity,balances,expected",
    [
        (150, [100, 100], ([100, 50], 0)),
        (300, [100, 100], ([100, 100], 100)),
        (-5, [10], ([0], 0)),
    ],
)
def test_liquidation_waterfall(liquidity, balances, expected):
    assert liquidation_waterfall(liquidity, balances) == expected


def test_gfcf_distribute():
    assert gfcf_distribute(10, [1, 0, 1]) == [5, 0, 5]
    with pytest.raises(RuleError):
        gfcf_distribute(10, [0, 0])


INVESTMENT_COLUMN = [811, 292, 65355, 176136, 54460, 0, 21578]


@pytest.mark.parametrize(
    "value,expected",
    [
        (318632, INVESTMENT_COLUMN),
        (0, [0] * 7),
    ],
)
def test_gfcf_distribute_over_a_sector_column(value, expected):
    split = gfcf_distribute(value, INVESTMENT_COLUMN)
    assert split == expected
    assert sum(split) == value


def test_gfcf_distribute_small_budget():
    split = gfcf_distribute(1000, INVESTMENT_COLUMN)
    assert split[3] == round(1000 * 176136 / 318632)
    assert sum(split) == 1000


class TestAdjustKappa:
    def test_overconsumption_lowers_kappa(self):
        assert adjust_kappa(0.1, 0.1, 0.5) == pytest.approx(0.095)

    def test_clamped(self):
        assert adjust_kappa(0.02, 1.0, 0.99) == 0.01
        assert adjust_kappa(0.9, -1.0, 0.5) == 1.0
