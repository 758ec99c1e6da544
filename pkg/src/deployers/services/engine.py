"""Monthly step of one country: daily markets and production, month-end settlement.

A month has `engine.days_per_month` trading days. Each day the agents due to act
(households on their shopping day, firms on their production day, public
accounts and interface firms every day) act in a freshly shuffled order. The
month-end sequence then settles shares, wages, taxes, dividends, public
transfers, bank flows and foreign trade, opens and closes firms, rematches
workers and audits the ledger.
"""

import logging
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np

from deployers.errors import LedgerAuditError
from deployers.lib.money import largest_remainder, to_base_units
from deployers.models.reports import PotentialRule, StepReport
from deployers.models.tables import AccountKind
from deployers.models.world import TradeMessage
from deployers.services.economy import (
    Bank,
    CountryState,
    Firm,
    FirmMonth,
    Household,
    InterfaceFirm,
    Loan,
    MonthTally,
)
from deployers.services.ledger import PostingKind
from deployers.services.market import neighbourhood_prices, purchase, run_clearing_house
from deployers.services.rules import (
    BankPosition,
    BorrowerPosition,
    ColumnCoefficients,
    ExitDecision,
    FirmPnl,
    Offer,
    Technology,
    allocate_budget,
    consumption_budget,
    dividend_and_tax_flows,
    firm_entry_decision,
    firm_exit_decision,
    gfcf_distribute,
    input_requirements,
    loan_offer,
    production_plan,
)

logger = logging.getLogger(__name__)

MONTHS_PER_YEAR = 12


# --- audit ------------------------------------------------------------------------


def net_financial_assets(state: CountryState) -> int:
    """Sum of every agent's net financial assets, in base units."""
    total = sum(h.liquidity for h in state.households)
    total += sum(f.liquidity - f.debt for f in state.firms.values())
    total += sum(b.equity for b in state.banks.values())
    total += state.government.liquidity + state.gfcf.liquidity
    total += sum(x.liquidity for x in state.interface_firms)
    return total


class AuditResult(NamedTuple):
    """Outcome of a conservation audit."""

    ok: bool
    drift: int


def audit_conservation(state: CountryState) -> AuditResult:
    """Compare net financial assets with the issued base money.

    The drift is their difference in base units; the audit is ok when it is zero.
    """
    drift = net_financial_assets(state) - state.central_bank.issued_base_money
    return AuditResult(ok=drift == 0, drift=drift)


# --- helpers ----------------------------------------------------------------------


def _kind_rows(state: CountryState, *kinds: AccountKind) -> list[int]:
    return state.targets.sam.indices_of(*kinds)


def _target(state: CountryState, row: int, col: int) -> int:
    return to_base_units(state.targets.monthly[row, col])


def _forward(state: CountryState, row: int | None, col: int, amount: int) -> None:
    """Record the pass-through cell of an account that only relays money."""
    if row is not None and amount:
        state.recorder.record(row, col, amount)


def _credit_income(h: Household, amount: int) -> None:
    h.month_income += amount


def _sector_prices(state: CountryState) -> list[float]:
    prices = []
    for p in state.producer_accounts():
        ps = [f.price for f in state.firms.values() if f.account == p]
        prices.append(float(np.mean(ps)) if ps else state.reference_price)
    return prices


def free_consumption(state: CountryState, household: Household, share_values: dict[int, float]) -> float:
    """Consumption the buffer-stock rule would choose for a household this month."""
    t_products = sum(
        rate for acc, (kind, rate) in state.tax_coefficients(state.household_taxes).items()
        if kind == AccountKind.TAX_PRODUCTS
    )
    return consumption_budget(
        household.income_avg,
        household.wealth(share_values),
        state.config.household,
        available=household.liquidity / (1.0 + max(0.0, t_products)),
    )


# --- month start ------------------------------------------------------------------


def _begin_month(state: CountryState, inbox: Sequence[TradeMessage]) -> dict[str, list[int]]:
    state.ledger.month = state.month
    state.tally = MonthTally()
    state.unmet_local[:] = 0.0
    state.unmet_national[:] = 0.0
    for firm in state.firms.values():
        firm.month = FirmMonth()
    for h in state.households:
        h.month_income = 0
        h.month_spent = 0
        h.budget = {}
    imports_by_sector = _prepare_interface_firms(state, inbox)
    _prepare_public_budgets(state)
    if state.assisted:
        _forced_household_budgets(state)
    else:
        _free_household_budgets(state)
    return imports_by_sector


def _table_import_units(state: CountryState, x: InterfaceFirm) -> float:
    return float(state.targets.monthly[x.account, :].sum()) / state.reference_price


def _table_export_budget(state: CountryState, x: InterfaceFirm) -> dict[int, int]:
    return {p: _target(state, p, x.account) for p in state.producer_accounts()}


def _prepare_interface_firms(state: CountryState, inbox: Sequence[TradeMessage]) -> dict[str, list[int]]:
    """Import supply and export budgets for the month.

    Constant partners replay their table flows. Live partners supply what their
    message delivers and order what their message asks for; before the first
    message arrives they also replay the table.
    """
    by_sender: dict[str, TradeMessage] = {}
    for msg in inbox:
        if msg.receiver != state.name:
            logger.warning(f"{state.name}: dropping message addressed to {msg.receiver}")
            continue
        by_sender[msg.sender] = msg
    imports_by_sector: dict[str, list[int]] = {}
    for x in state.interface_firms:
        x.month_sales = 0
        x.month_imports = 0
        x.month_exports = {}
        msg = by_sender.get(x.partner) if x.partner else None
        if msg is None:
            supply = _table_import_units(state, x)
            x.budget = _table_export_budget(state, x)
        else:
            supply = _delivered_units(state, x, msg)
            x.budget = _ordered_budget(state, x, msg)
        x.inventory += supply
        x.month_imports = to_base_units(supply * state.reference_price)
    for sender, msg in by_sender.items():
        imports_by_sector[sender] = list(msg.import_deliveries)
    return imports_by_sector


def _delivered_units(state: CountryState, x: InterfaceFirm, msg: TradeMessage) -> float:
    if x.product is None or msg.delivery_mode == "aggregated":
        value = sum(msg.import_deliveries)
        siblings = [y for y in state.interface_firms if y.partner == x.partner]
        if len(siblings) > 1:
            # Aggregated delivery spread over per-product accounts by table weight.
            weights = [float(state.targets.monthly[y.account, :].sum()) for y in siblings]
            if sum(weights) > 0:
                value = largest_remainder(value, weights)[siblings.index(x)]
            else:
                value = value // len(siblings)
    else:
        try:
            value = msg.import_deliveries[msg.sectors.index(x.product)]
        except ValueError:
            value = 0
    return value / state.reference_price


def _ordered_budget(state: CountryState, x: InterfaceFirm, msg: TradeMessage) -> dict[int, int]:
    """Spread the partner's orders over this country's interface firms for it."""
    siblings = [y for y in state.interface_firms if y.partner == x.partner]
    total = sum(msg.export_orders)
    weights = [sum(_table_export_budget(state, y).values()) for y in siblings]
    if sum(weights) > 0:
        mine = largest_remainder(total, weights)[siblings.index(x)]
    else:
        mine = total if siblings and siblings[0] is x else 0
    column = _table_export_budget(state, x)
    if mine <= 0:
        return {p: 0 for p in column}
    if sum(column.values()) <= 0:
        producers = state.producer_accounts()
        return dict(zip(producers, largest_remainder(mine, [1.0] * len(producers)), strict=True))
    accounts = list(column)
    return dict(zip(accounts, largest_remainder(mine, [max(0, v) for v in column.values()]), strict=True))


def _prepare_public_budgets(state: CountryState) -> None:
    goods = state.goods_accounts()
    g = state.account_of(AccountKind.GOVERNMENT)
    if g is not None:
        state.government.budget = {a: _target(state, a, g) for a in goods}
    f = state.account_of(AccountKind.GFCF)
    if f is None:
        state.gfcf.budget = {}
        return
    if state.assisted:
        state.gfcf.budget = {a: _target(state, a, f) for a in goods}
        return
    column = [max(0.0, float(state.targets.monthly[a, f])) for a in goods]
    available = max(0, state.gfcf.liquidity)
    if available > 0 and sum(column) > 0:
        state.gfcf.budget = dict(zip(goods, gfcf_distribute(available, column), strict=True))
    else:
        state.gfcf.budget = {a: 0 for a in goods}


def _forced_household_budgets(state: CountryState) -> None:
    """Split every households-column target across households by liquidity.

    All targets shrink together when households hold less money than the column
    asks for.
    """
    h_acc = state.account_of(AccountKind.HOUSEHOLDS)
    if h_acc is None:
        return
    column = {r: _target(state, r, h_acc) for r in range(state.targets.sam.size) if r != h_acc}
    column = {r: v for r, v in column.items() if v > 0}
    total = sum(column.values())
    weights = [max(0, h.liquidity) for h in state.households]
    money = sum(weights)
    if total <= 0 or money <= 0:
        return
    scale = min(1.0, money / total)
    for row, target in column.items():
        parts = largest_remainder(math.floor(target * scale), weights)
        for h, part in zip(state.households, parts, strict=True):
            if part:
                h.budget[row] = part


def _free_household_budgets(state: CountryState) -> None:
    """Buffer-stock consumption split over goods with logit-modulated shares."""
    h_acc = state.account_of(AccountKind.HOUSEHOLDS)
    if h_acc is None:
        return
    goods = state.goods_accounts()
    shares = [max(0.0, float(state.targets.monthly[a, h_acc])) for a in goods]
    if sum(shares) <= 0:
        return
    values = state.share_values()
    refs = [state.reference_price] * len(goods)
    beta = state.config.household.beta_logit
    for h in state.households:
        c = math.floor(free_consumption(state, h, values))
        if c <= 0:
            continue
        prices = neighbourhood_prices(state, h.cell, goods)
        h.budget = {
            a: v for a, v in zip(goods, allocate_budget(c, shares, prices, beta, refs), strict=True) if v
        }


# --- daily actions ----------------------------------------------------------------


def _household_shops(state: CountryState, h: Household) -> None:
    h_acc = state.account_of(AccountKind.HOUSEHOLDS)
    if h_acc is None or not h.budget:
        return
    goods = set(state.goods_accounts())
    spent_goods = 0
    for account in sorted(h.budget):
        if account not in goods:
            continue
        budget = min(h.budget[account], h.liquidity)
        result = purchase(state, h, account, budget, h_acc, h.cell)
        spent_goods += result.spent
    h.month_spent += spent_goods
    state.tally.consumption += spent_goods
    gov = state.government
    g_acc = state.account_of(AccountKind.GOVERNMENT)
    if state.assisted:
        for account in sorted(h.budget):
            if account in goods:
                continue
            kind = state.targets.kind(account)
            payee = state.gfcf if kind == AccountKind.GFCF else gov
            if kind == AccountKind.HOUSEHOLDS:
                continue
            paid = state.ledger.pay_up_to(h, payee, h.budget[account], _kind_posting(kind), (account, h_acc))
            h.month_spent += paid
            if kind.is_tax:
                _forward(state, g_acc, account, paid)
    else:
        for account, (kind, rate) in state.tax_coefficients(state.household_taxes).items():
            if kind != AccountKind.TAX_PRODUCTS:
                continue
            paid = state.ledger.pay_up_to(h, gov, to_base_units(rate * spent_goods), PostingKind.TAX, (account, h_acc))
            h.month_spent += paid
            _forward(state, g_acc, account, paid)
    h.budget = {}


def _kind_posting(kind: AccountKind) -> PostingKind:
    if kind.is_tax:
        return PostingKind.TAX
    if kind == AccountKind.GFCF:
        return PostingKind.CAPITAL
    return PostingKind.TRANSFER


def _institution_buys(state: CountryState, agent: object, column: int | None, day: int) -> None:
    if column is None:
        return
    budget: dict[int, int] = agent.budget  # type: ignore[attr-defined]
    days_left = state.config.engine.days_per_month - day
    for account in sorted(budget):
        remaining = budget[account]
        if remaining <= 0:
            continue
        today = math.ceil(remaining / days_left)
        result = purchase(state, agent, account, today, column, record_unmet=False)
        # Unmet money stays in the budget for the coming days.
        budget[account] = remaining - result.spent
        if isinstance(agent, InterfaceFirm):
            agent.month_exports[account] = agent.month_exports.get(account, 0) + result.spent


def _local_unemployed(state: CountryState, cell: int) -> list[Household]:
    near = set(state.grid.neighbourhood(cell))
    pool = [h for h in state.households if h.employer is None and h.cell in near]
    order = state.rng.permutation(len(pool))
    return [pool[i] for i in order]


def _request_loan(state: CountryState, firm: Firm, amount: int) -> int:
    if firm.bank is None or amount <= 0:
        return 0
    bank = state.ledger.bank(firm.bank)
    params = state.config.bank
    position = BankPosition(
        equity=bank.equity,
        reserves=bank.reserves,
        deposits=bank.deposits,
        loans=bank.loans,
        car=params.car,
        rrr=params.rrr,
    )
    borrower = BorrowerPosition(debt=firm.debt, equity=firm.equity(), deposits_here=True)
    answer = loan_offer(position, borrower, amount, state.central_bank.base_rate, params.risk)
    if not isinstance(answer, Offer):
        logger.debug(f"{state.name}: loan of {amount} to {firm.label} denied ({answer.reason})")
        return 0
    state.ledger.lend(bank, firm, amount)
    firm.loans.append(
        Loan(
            principal=amount,
            rate=answer.rate / MONTHS_PER_YEAR,
            remaining_term=params.loan_term,
            borrower=firm.id,
            lender=bank.id,
        )
    )
    state.tally.credit_issued += amount
    return amount


def _input_units(state: CountryState, column: ColumnCoefficients, q: float, tech: Technology) -> dict[int, float]:
    """Units of each intermediate input needed for `q` units of output."""
    p_ref = state.reference_price
    req = input_requirements(column, q, p_ref, state.wage, tech)
    return {a: v / p_ref for a, v in req.ic.items() if v > 0}


def _input_orders(firm: Firm, needed: dict[int, float], prices: dict[int, float]) -> dict[int, float]:
    """Money that tops the input stock up to what the plan needs, at market prices."""
    return {a: max(0.0, u - firm.input_stock.get(a, 0.0)) * prices[a] for a, u in needed.items()}


def _use_inputs(firm: Firm, account: int, units: float) -> None:
    stock = firm.input_stock.get(account, 0.0)
    if stock <= 0 or units <= 0:
        return
    used = min(stock, units)
    book = firm.input_book.get(account, 0)
    firm.input_book[account] = book - math.floor(book * used / stock)
    firm.input_stock[account] = stock - used


def _firm_produces(state: CountryState, firm: Firm) -> None:
    """Plan, staff, finance, buy inputs and produce.

    Inputs are bought at market prices into an input stock that carries over
    between months. In free runs with input competition, output shrinks to the
    scarcest input; otherwise missing inputs do not hold production back.
    """
    params = state.config.firm
    p_ref = state.reference_price
    wage = state.wage
    column = state.columns[firm.account]
    tech = Technology(params.technology)
    q = production_plan(firm.demand_window, firm.inventory, params.lambda_inv, firm.seed_demand)
    req = input_requirements(column, q, p_ref, wage, tech)
    firm.wanted_workers = max(1, req.hires)

    if len(firm.employees) < req.hires:
        for h in _local_unemployed(state, firm.cell):
            if len(firm.employees) >= req.hires:
                break
            state.hire(firm, h)
    if q > 0 and req.labor_bill > 0:
        unit_labor = req.labor_bill / q
        q = min(q, len(firm.employees) * wage / unit_labor)
    if q <= 0:
        return

    prices = {a: state.market_price(a) for a in column.inputs}
    needed = _input_units(state, column, q, tech)
    orders = _input_orders(firm, needed, prices)
    need = to_base_units(sum(orders.values())) + len(firm.employees) * wage
    if need > firm.liquidity:
        _request_loan(state, firm, need - firm.liquidity)
    if need > firm.liquidity and need > 0:
        q *= max(0.0, firm.liquidity) / need
        needed = _input_units(state, column, q, tech)
        orders = _input_orders(firm, needed, prices)

    for account in sorted(orders):
        budget = min(to_base_units(orders[account]), max(0, firm.liquidity))
        result = purchase(state, firm, account, budget, firm.account)
        firm.month.ic_cost += result.spent
        firm.input_stock[account] = firm.input_stock.get(account, 0.0) + result.units
        firm.input_book[account] = firm.input_book.get(account, 0) + result.spent
    fill = min((firm.input_stock.get(a, 0.0) / u for a, u in needed.items()), default=1.0)
    used = 1.0
    if not state.assisted and params.ic_competition:
        used = min(1.0, fill)
        q *= used
    for account, units in needed.items():
        _use_inputs(firm, account, units * used)
    firm.inventory += q
    firm.month.produced += q
    firm.month.production_value += to_base_units(q * p_ref)


def _run_days(state: CountryState) -> None:
    days = state.config.engine.days_per_month
    g_acc = state.account_of(AccountKind.GOVERNMENT)
    f_acc = state.account_of(AccountKind.GFCF)
    for day in range(days):
        state.ledger.day = day
        actors: list[object] = [h for h in state.households if h.shopping_day == day]
        actors += [f for f in state.firms.values() if f.production_day == day]
        actors += [state.government, state.gfcf, *state.interface_firms]
        for i in state.rng.permutation(len(actors)):
            agent = actors[int(i)]
            if isinstance(agent, Household):
                _household_shops(state, agent)
            elif isinstance(agent, Firm):
                if agent.id in state.firms:
                    _firm_produces(state, agent)
            elif isinstance(agent, InterfaceFirm):
                _institution_buys(state, agent, agent.account, day)
            elif agent is state.government:
                _institution_buys(state, agent, g_acc, day)
            else:
                _institution_buys(state, agent, f_acc, day)


def _record_unserved_budgets(state: CountryState) -> None:
    """Budgets public buyers and exporters could not spend all month become national unmet demand."""
    for agent in (state.government, state.gfcf, *state.interface_firms):
        for account, left in agent.budget.items():
            if left > 0:
                state.unmet_national[account] += left


# --- month end --------------------------------------------------------------------


def _set_risky_budgets(state: CountryState) -> None:
    """Part of the month's saving households commit to shares."""
    risky = 1.0 - state.config.household.deposit_fraction
    for h in state.households:
        surplus = max(0.0, h.income_avg - h.month_spent)
        h.risky_budget = min(math.floor(risky * surplus), max(0, h.liquidity))


def _pay_wages(state: CountryState) -> None:
    l_acc = state.account_of(AccountKind.LABOR)
    h_acc = state.account_of(AccountKind.HOUSEHOLDS)
    for fid in sorted(state.firms):
        firm = state.firms[fid]
        for hid in list(firm.employees):
            worker = state.household(hid)
            cell = (l_acc, firm.account) if l_acc is not None else None
            paid = state.ledger.pay_up_to(firm, worker, state.wage, PostingKind.WAGE, cell)
            firm.month.wage_cost += paid
            _credit_income(worker, paid)
            if l_acc is not None:
                _forward(state, h_acc, l_acc, paid)


def _distribute(state: CountryState) -> None:
    """Taxes, imputed surplus, dividends and retained-cash payouts of every firm."""
    params = state.config.firm
    gov = state.government
    g_acc = state.account_of(AccountKind.GOVERNMENT)
    k_acc = state.account_of(AccountKind.SURPLUS)
    h_acc = state.account_of(AccountKind.HOUSEHOLDS)
    for fid in sorted(state.firms):
        firm = state.firms[fid]
        m = firm.month
        m.interest = sum(to_base_units(loan.principal * loan.rate) for loan in firm.loans)
        pnl = FirmPnl(
            sales=m.sales,
            production_value=m.production_value,
            costs=m.ic_cost + m.wage_cost + m.interest,
        )
        taxes = state.tax_coefficients(state.columns[firm.account].taxes)
        result = dividend_and_tax_flows(pnl, taxes, params.payout_ratio, firm.registry)
        paid_taxes = 0
        for account in sorted(result.taxes):
            amount = result.taxes[account]
            if amount > 0:
                amount = state.ledger.pay_up_to(firm, gov, amount, PostingKind.TAX, (account, firm.account))
            else:
                state.ledger.pay(firm, gov, amount, PostingKind.SUBSIDY, (account, firm.account))
            paid_taxes += amount
            _forward(state, g_acc, account, amount)
        m.taxes = paid_taxes
        if k_acc is not None:
            surplus = m.sales - m.ic_cost - m.wage_cost - paid_taxes
            state.recorder.impute(k_acc, firm.account, surplus)
        for hid in sorted(result.dividends):
            paid = state.ledger.pay_up_to(
                firm, state.household(hid), result.dividends[hid], PostingKind.DIVIDEND,
                (h_acc, k_acc) if h_acc is not None and k_acc is not None else None,
            )
            _credit_income(state.household(hid), paid)
        firm.profit_history.append(result.profit)
        del firm.profit_history[: -max(params.loss_window, 1) * 2]
        firm.sales_history.append(m.sales)
        del firm.sales_history[: -max(params.loss_window, 1) * 2]
        firm.retained += result.retained
        _pay_out_retained_cash(state, firm)
    if not state.assisted:
        _household_income_taxes(state)


def _planned_costs(state: CountryState, firm: Firm) -> float:
    """Monthly input and wage bill of producing the firm's mean demand."""
    params = state.config.firm
    q = production_plan(firm.demand_window, 0.0, 1.0, firm.seed_demand)
    column = state.columns[firm.account]
    tech = Technology(params.technology)
    inputs = sum(u * state.market_price(a) for a, u in _input_units(state, column, q, tech).items())
    labor = input_requirements(column, q, state.reference_price, state.wage, tech).labor_bill
    return inputs + max(labor, len(firm.employees) * state.wage)


def _pay_out_retained_cash(state: CountryState, firm: Firm) -> None:
    """Pay retained earnings above the working-capital buffer to the shareholders."""
    if firm.loans or firm.born >= state.month or firm.retained <= 0:
        return
    m = firm.month
    costs = max(m.ic_cost + m.wage_cost, _planned_costs(state, firm))
    keep = math.floor(state.config.firm.cash_buffer_months * costs)
    excess = min(firm.liquidity - keep, firm.retained)
    holders = sorted(h for h, n in firm.registry.items() if n > 0)
    if excess <= 0 or not holders:
        return
    h_acc = state.account_of(AccountKind.HOUSEHOLDS)
    k_acc = state.account_of(AccountKind.SURPLUS)
    cell = (h_acc, k_acc) if h_acc is not None and k_acc is not None else None
    parts = largest_remainder(excess, [firm.registry[h] for h in holders])
    for hid, part in zip(holders, parts, strict=True):
        state.ledger.pay(firm, state.household(hid), part, PostingKind.DIVIDEND, cell)
        _credit_income(state.household(hid), part)
    firm.retained -= excess


def _household_income_taxes(state: CountryState) -> None:
    h_acc = state.account_of(AccountKind.HOUSEHOLDS)
    g_acc = state.account_of(AccountKind.GOVERNMENT)
    if h_acc is None:
        return
    rates = state.tax_coefficients(state.household_taxes)
    for h in state.households:
        if h.month_income <= 0:
            continue
        for account in sorted(rates):
            kind, rate = rates[account]
            if kind == AccountKind.TAX_PRODUCTS:
                continue
            paid = state.ledger.pay_up_to(
                h, state.government, to_base_units(rate * h.month_income), PostingKind.TAX, (account, h_acc)
            )
            _forward(state, g_acc, account, paid)


def _government_transfers(state: CountryState) -> None:
    """Unemployment subsidies and lump-sum transfers, investment grant, own taxes."""
    gov = state.government
    g_acc = state.account_of(AccountKind.GOVERNMENT)
    h_acc = state.account_of(AccountKind.HOUSEHOLDS)
    f_acc = state.account_of(AccountKind.GFCF)
    if g_acc is None:
        return
    if h_acc is not None:
        target = _target(state, h_acc, g_acc)
        subsidy = math.floor(state.config.government.subsidy_fraction * state.wage)
        unemployed = state.unemployed()
        paid_subsidies = 0
        if subsidy > 0:
            for h in unemployed:
                state.ledger.pay(gov, h, subsidy, PostingKind.SUBSIDY, (h_acc, g_acc))
                _credit_income(h, subsidy)
                paid_subsidies += subsidy
        rest = target - paid_subsidies
        if rest > 0 and state.households:
            parts = largest_remainder(rest, [1.0] * len(state.households))
            for h, part in zip(state.households, parts, strict=True):
                state.ledger.pay(gov, h, part, PostingKind.TRANSFER, (h_acc, g_acc))
                _credit_income(h, part)
        gov.month_subsidies = paid_subsidies
    if f_acc is not None:
        state.ledger.pay(gov, state.gfcf, _target(state, f_acc, g_acc), PostingKind.CAPITAL, (f_acc, g_acc))
    for t in _kind_rows(state, *[k for k in AccountKind if k.is_tax]):
        amount = _target(state, t, g_acc)
        state.ledger.pay(gov, gov, amount, PostingKind.TAX, (t, g_acc))
        _forward(state, g_acc, t, amount)


def _external_and_investment_transfers(state: CountryState) -> None:
    """Tax cells of the GFCF column and non-goods cells of external columns."""
    gov = state.government
    g_acc = state.account_of(AccountKind.GOVERNMENT)
    f_acc = state.account_of(AccountKind.GFCF)
    h_acc = state.account_of(AccountKind.HOUSEHOLDS)
    taxes = _kind_rows(state, *[k for k in AccountKind if k.is_tax])
    if f_acc is not None:
        for t in taxes:
            amount = _target(state, t, f_acc)
            state.ledger.pay(state.gfcf, gov, amount, PostingKind.TAX, (t, f_acc))
            _forward(state, g_acc, t, amount)
    for x in state.interface_firms:
        if f_acc is not None:
            state.ledger.pay(x, state.gfcf, _target(state, f_acc, x.account), PostingKind.CAPITAL, (f_acc, x.account))
        for t in taxes:
            amount = _target(state, t, x.account)
            state.ledger.pay(x, gov, amount, PostingKind.TAX, (t, x.account))
            _forward(state, g_acc, t, amount)
        if h_acc is not None and state.households:
            amount = _target(state, h_acc, x.account)
            if amount > 0:
                parts = largest_remainder(amount, [1.0] * len(state.households))
                for h, part in zip(state.households, parts, strict=True):
                    state.ledger.pay(x, h, part, PostingKind.TRANSFER, (h_acc, x.account))
                    _credit_income(h, part)


def _recapitalise(state: CountryState, bank: Bank) -> None:
    """Government capital injection restoring the capital ratio of a bank's loan book."""
    shortfall = math.ceil(state.config.bank.car * bank.loans) - bank.equity
    if shortfall <= 0:
        return
    state.ledger.pay(state.government, bank, shortfall, PostingKind.RECAPITALISATION)
    state.tally.recapitalisations += shortfall
    logger.info(f"{state.name}: government recapitalised {bank.label} with {shortfall}")


def _bank_flows(state: CountryState) -> None:
    """Loan service, deposit interest, bank dividends, recapitalisation and reserve management."""
    params = state.config.bank
    for bank in state.banks.values():
        bank.month_income = 0
        bank.month_expense = 0
    for fid in sorted(state.firms):
        firm = state.firms[fid]
        for loan in list(firm.loans):
            bank = state.ledger.bank(loan.lender)
            interest = to_base_units(loan.principal * loan.rate)
            paid = state.ledger.pay_up_to(firm, bank, interest, PostingKind.INTEREST)
            bank.month_income += paid
            due = math.ceil(loan.principal / max(1, loan.remaining_term))
            amortized = min(due, max(0, firm.liquidity))
            state.ledger.repay(firm, bank, amortized)
            loan.principal -= amortized
            loan.remaining_term = max(1, loan.remaining_term - 1)
            if loan.principal <= 0:
                firm.loans.remove(loan)
    monthly_deposit_rate = params.deposit_rate / MONTHS_PER_YEAR
    if monthly_deposit_rate > 0:
        for holder in [*state.households, *state.firms.values()]:
            if holder.bank is None or holder.liquidity <= 0:
                continue
            bank = state.ledger.bank(holder.bank)
            interest = math.floor(holder.liquidity * monthly_deposit_rate)
            state.ledger.pay(bank, holder, interest, PostingKind.DEPOSIT_INTEREST)
            bank.month_expense += interest
            if isinstance(holder, Household):
                _credit_income(holder, interest)
    for bid in sorted(state.banks):
        bank = state.banks[bid]
        profit = bank.month_income - bank.month_expense
        free_capital = bank.equity - math.ceil(params.car * bank.loans)
        if profit > 0 and bank.owner is not None and free_capital > 0:
            owner = state.household(bank.owner)
            dividend = min(math.floor(params.payout_ratio * profit), free_capital)
            state.ledger.pay(bank, owner, dividend, PostingKind.DIVIDEND)
            _credit_income(owner, dividend)
        _recapitalise(state, bank)
        required = math.ceil(params.rrr * bank.deposits)
        if bank.reserves < required:
            state.ledger.advance(bank, required - bank.reserves)
        elif bank.advances > 0:
            state.ledger.advance(bank, -min(bank.advances, bank.reserves - required))


def _import_demand(state: CountryState, x: InterfaceFirm) -> int:
    """Import sales plus unmet demand for them, less the stock still on hand."""
    unmet = float(state.unmet_local[:, x.account].sum()) + float(state.unmet_national[x.account])
    return max(0, to_base_units(x.month_sales + unmet - x.inventory * x.price))


def _settle_foreign(state: CountryState) -> list[TradeMessage]:
    """Settle interface firms with the rest of the world and write the outbox.

    Orders ask for what domestic buyers wanted from each partner, served or not,
    less the import stock still on hand. Export budgets left unspent are reported
    back as the partner's shortfall.
    """
    outbox: list[TradeMessage] = []
    live: dict[str, list[InterfaceFirm]] = {}
    for x in state.interface_firms:
        if x.partner:
            live.setdefault(x.partner, []).append(x)
            continue
        if x.liquidity > 0:
            state.ledger.retire(x, x.liquidity)
        elif x.liquidity < 0:
            state.ledger.issue(x, -x.liquidity, PostingKind.SETTLEMENT)
    sectors = [state.targets.codes[p].partition("_")[2] or state.targets.codes[p] for p in state.producer_accounts()]
    producers = state.producer_accounts()
    for partner, firms in live.items():
        sales = sum(x.month_sales for x in firms)
        for x in firms:
            if x.month_sales > 0:
                state.ledger.retire(x, x.month_sales)
        deliveries = [sum(x.month_exports.get(p, 0) for x in firms) for p in producers]
        shortfall = [sum(max(0, x.budget.get(p, 0)) for x in firms) for p in producers]
        disaggregated = any(x.product is not None for x in firms)
        orders = (
            [sum(_import_demand(state, x) for x in firms if x.product == s) for s in sectors]
            if disaggregated
            else [sum(_import_demand(state, x) for x in firms)]
        )
        if any(shortfall):
            logger.debug(f"{state.name}: {sum(shortfall)} of {partner}'s orders unfilled")
        outbox.append(
            TradeMessage(
                sender=state.name,
                receiver=partner,
                month=state.month,
                sectors=sectors,
                order_mode="disaggregated" if disaggregated else "aggregated",
                delivery_mode="disaggregated",
                export_orders=orders,
                import_deliveries=deliveries,
                transfers=sales,
                shortfall=shortfall if any(shortfall) else [],
            )
        )
    return outbox


def _receive_transfers(state: CountryState, inbox: Sequence[TradeMessage]) -> None:
    """Incoming settlements are new money credited to the partner's interface firms."""
    for msg in inbox:
        firms = [x for x in state.interface_firms if x.partner == msg.sender]
        if not firms or msg.transfers <= 0:
            continue
        weights = [max(1, sum(x.month_exports.values())) for x in firms]
        for x, part in zip(firms, largest_remainder(msg.transfers, weights), strict=True):
            state.ledger.issue(x, part, PostingKind.SETTLEMENT)


def _neighbourhood_gaps(state: CountryState, cell: int) -> list[float]:
    near = list(state.grid.neighbourhood(cell))
    share = len(near) / max(1, state.grid.n_cells)
    return [
        float(state.unmet_local[near, p].sum() + state.unmet_national[p] * share)
        for p in state.producer_accounts()
    ]


def _exits(state: CountryState) -> None:
    params = state.config.firm
    for fid in sorted(state.firms):
        firm = state.firms[fid]
        if firm.born >= state.month:
            continue
        decision = firm_exit_decision(
            firm.equity(), firm.profit_history, params.loss_window, params.equity_floor, firm.sales_history
        )
        if decision == ExitDecision.CLOSE:
            logger.debug(f"{state.name}: closing {firm.label} (equity {firm.equity():.0f})")
            state.close_firm(firm)


def _entries(state: CountryState) -> None:
    params = state.config.firm
    seed = to_base_units(params.seed_months * state.wage)
    producers = state.producer_accounts()
    caps = [math.ceil(e * params.sector_cap_factor) for e in state.targets.employment]
    counts = [0] * len(producers)
    for f in state.firms.values():
        counts[f.sector] += 1
    for i in state.rng.permutation(len(state.households)):
        h = state.households[int(i)]
        draw = state.rng.random()
        if h.owned_firm is not None or h.liquidity < seed or seed <= 0:
            continue
        gaps = _neighbourhood_gaps(state, h.cell)
        gaps = [g if counts[s] < caps[s] else 0.0 for s, g in enumerate(gaps)]
        sector = firm_entry_decision(gaps, params.p_open, draw)
        if sector is None:
            continue
        state.open_firm(h, sector, seed, seed_demand=gaps[sector] / state.reference_price)
        counts[sector] += 1


def _rematch_labour(state: CountryState) -> None:
    for fid in sorted(state.firms):
        firm = state.firms[fid]
        excess = len(firm.employees) - max(1, firm.wanted_workers)
        if excess <= 0:
            continue
        staff = [hid for hid in firm.employees if hid != firm.owner]
        for j in state.rng.permutation(len(staff))[:excess]:
            state.release(state.household(staff[int(j)]))
    unemployed = state.unemployed()
    for i in state.rng.permutation(len(unemployed)):
        h = unemployed[int(i)]
        near = set(state.grid.neighbourhood(h.cell))
        openings = sorted(
            fid for fid, f in state.firms.items() if f.cell in near and len(f.employees) < f.wanted_workers
        )
        if openings:
            state.hire(state.firms[openings[int(state.rng.integers(len(openings)))]], h)


def _banking_structure(state: CountryState) -> None:
    """Found new banks and open accounts for every unbanked household and firm."""
    params = state.config.bank
    threshold = params.min_net_worth_months * state.wage
    values = state.share_values()
    for i in state.rng.permutation(len(state.households)):
        if len(state.banks) >= params.max_banks:
            break
        h = state.households[int(i)]
        draw = state.rng.random()
        if h.owned_bank is not None or h.wealth(values) < threshold or draw >= params.p_found:
            continue
        capital = math.floor(params.capital_fraction * h.liquidity)
        if capital > 0:
            state.found_bank(h, capital)
    if not state.banks:
        return
    ids = sorted(state.banks)
    for holder in [*state.households, *(state.firms[f] for f in sorted(state.firms))]:
        if holder.bank is None:
            bank = state.banks[ids[int(state.rng.integers(len(ids)))]]
            state.ledger.open_account(holder, bank)


def _update_windows(state: CountryState) -> None:
    window = state.config.household.income_window
    for h in state.households:
        h.income_history.append(h.month_income)
        del h.income_history[:-window]
        h.income_avg = float(np.mean(h.income_history))
    demand_window = state.config.firm.demand_window
    for firm in state.firms.values():
        near = list(state.grid.neighbourhood(firm.cell))
        near_set = set(near)
        competitors = sum(1 for f in state.firms.values() if f.account == firm.account and f.cell in near_set)
        sector_size = sum(1 for f in state.firms.values() if f.account == firm.account)
        unmet = state.unmet_local[near, firm.account].sum() / max(1, competitors)
        unmet += state.unmet_national[firm.account] / max(1, sector_size)
        firm.demand_window.append(firm.month.units_sold + unmet / firm.price)
        del firm.demand_window[:-demand_window]


def _list_firms(state: CountryState) -> None:
    threshold = state.config.market.listing_threshold_years * MONTHS_PER_YEAR * state.wage
    for firm in state.firms.values():
        if firm.listed or firm.equity() < threshold:
            continue
        shares = firm.outstanding_shares
        firm.listed = True
        firm.share_price = firm.equity() / shares
        firm.pending_issue = math.floor(state.config.market.issue_fraction * shares)
        logger.info(f"{state.name}: {firm.label} listed at {firm.share_price:.2f}")


# --- reporting --------------------------------------------------------------------


def potential_output(state: CountryState) -> float:
    """Output at full employment with the current sector mix of employment."""
    producers = state.producer_accounts()
    employed = [0] * len(producers)
    for f in state.firms.values():
        employed[f.sector] += len(f.employees)
    total = sum(employed)
    mix = [e / total for e in employed] if total else list(
        state.targets.employment / max(1e-12, float(np.sum(state.targets.employment)))
    )
    out = 0.0
    for s, p in enumerate(producers):
        productivity = state.targets.productivity(p)
        if math.isfinite(productivity):
            out += mix[s] * state.n_active * productivity * state.reference_price
    return out


def price_index(state: CountryState) -> float:
    """Laspeyres index of mean sector prices with target outputs as base quantities."""
    base = state.targets.gross_output() / state.reference_price
    denominator = float(np.sum(base)) * state.reference_price
    if denominator <= 0:
        return 1.0
    return float(np.dot(base, _sector_prices(state))) / denominator


def gdp(closed: np.ndarray, state: CountryState) -> tuple[int, int]:
    """Income and expenditure measures of value added for one closed month."""
    sam = state.targets.sam
    producers = sam.indices_of(AccountKind.PRODUCER)
    final = sam.indices_of(
        AccountKind.HOUSEHOLDS, AccountKind.GOVERNMENT, AccountKind.GFCF, AccountKind.EXTERNAL
    )
    value_rows = sam.indices_of(
        AccountKind.LABOR, AccountKind.SURPLUS, AccountKind.TAX_SSOC,
        AccountKind.TAX_PRODUCTION, AccountKind.TAX_PRODUCTS,
    )
    product_taxes = sam.indices_of(AccountKind.TAX_PRODUCTS)
    external = sam.indices_of(AccountKind.EXTERNAL)
    on_final = int(closed[np.ix_(product_taxes, final)].sum()) if product_taxes and final else 0
    income = int(closed[np.ix_(value_rows, producers)].sum()) if value_rows and producers else 0
    spend = int(closed[np.ix_(producers, final)].sum()) if producers and final else 0
    imported = int(closed[np.ix_(external, producers)].sum()) if external and producers else 0
    return income + on_final, spend + on_final - imported


def _report(
    state: CountryState,
    closed: np.ndarray,
    imports_by_sector: dict[str, list[int]],
    inbox: Sequence[TradeMessage] = (),
) -> StepReport:
    producers = state.producer_accounts()
    codes = state.targets.codes
    income, expenditure = gdp(closed, state)
    exports: dict[str, int] = {}
    imports: dict[str, int] = {}
    exports_by_sector: dict[str, list[int]] = {}
    for x in state.interface_firms:
        label = x.partner_label
        exports[label] = exports.get(label, 0) + sum(x.month_exports.values())
        imports[label] = imports.get(label, 0) + x.month_imports
        row = exports_by_sector.setdefault(label, [0] * len(producers))
        for s, p in enumerate(producers):
            row[s] += x.month_exports.get(p, 0)
    values = state.share_values()
    wealth = [h.wealth(values) for h in state.households]
    return StepReport(
        month=state.month,
        gross_output={codes[p]: int(closed[p, :].sum()) for p in producers},
        real_output=sum(f.month.produced for f in state.firms.values()) * state.reference_price,
        potential_output=potential_output(state),
        consumption=state.tally.consumption,
        unemployment_rate=state.unemployment_rate(),
        n_firms=len(state.firms),
        new_firms=state.tally.new_firms,
        closed_firms=state.tally.closed_firms,
        credit_issued=state.tally.credit_issued,
        share_trades=state.tally.share_trades,
        recapitalisations=state.tally.recapitalisations,
        price_index=price_index(state),
        gdp_income=income,
        gdp_expenditure=expenditure,
        exports=exports,
        imports=imports,
        exports_by_sector=exports_by_sector,
        imports_by_sector=imports_by_sector,
        import_shortfall={m.sender: sum(m.shortfall) for m in inbox if m.receiver == state.name and m.shortfall},
        government_balance=state.government.liquidity,
        inventory_value=sum(f.inventory * f.price for f in state.firms.values()),
        mean_wealth=float(np.mean(wealth)) if wealth else 0.0,
        kappa=state.config.household.kappa,
        audit_drift=audit_conservation(state).drift,
    )


def output_gap(reports: Sequence[StepReport], rule: PotentialRule = PotentialRule.EMPLOYMENT) -> list[float]:
    """Real output minus potential output per month.

    With the PEAK rule potential output is the highest real output seen so far.
    """
    if PotentialRule(rule) == PotentialRule.EMPLOYMENT:
        return [r.output_gap for r in reports]
    gaps = []
    peak = 0.0
    for r in reports:
        peak = max(peak, r.real_output)
        gaps.append(r.real_output - peak)
    return gaps


# --- step -------------------------------------------------------------------------


def step_month(
    state: CountryState, inbox: Sequence[TradeMessage] = ()
) -> tuple[CountryState, StepReport, list[TradeMessage]]:
    """Advance a country by one month.

    The state is updated in place and returned together with the month's report
    and the trade messages for live partners.

    Raises:
        LedgerAuditError: Net financial assets drifted from the issued base money
    """
    imports_by_sector = _begin_month(state, inbox)
    _run_days(state)
    _record_unserved_budgets(state)

    state.ledger.day = state.config.engine.days_per_month
    if not state.assisted:
        _set_risky_budgets(state)
    state.tally.share_trades = run_clearing_house(state, free_demand=not state.assisted)
    _pay_wages(state)
    _distribute(state)
    _government_transfers(state)
    _external_and_investment_transfers(state)
    _bank_flows(state)
    _receive_transfers(state, inbox)
    outbox = _settle_foreign(state)
    _update_windows(state)
    _exits(state)
    _entries(state)
    _rematch_labour(state)
    _banking_structure(state)
    _list_firms(state)

    closed = state.recorder.close_month()
    report = _report(state, closed, imports_by_sector, inbox)
    state.reports.append(report)
    if state.config.engine.audit_every_month and report.audit_drift != 0:
        logger.error(f"{state.name}: ledger drift {report.audit_drift} at month {state.month}")
        raise LedgerAuditError(report.audit_drift, state.month)
    logger.debug(
        f"{state.name} month {state.month}: output {report.total_output}, "
        f"unemployment {report.unemployment_rate:.1%}, firms {report.n_firms}"
    )
    state.month += 1
    return state, report, outbox
