"""Goods purchases and the monthly clearing house for shares."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from deployers.lib.money import to_base_units
from deployers.models.tables import AccountKind
from deployers.services.economy import CountryState, Firm, InterfaceFirm
from deployers.services.ledger import PostingKind
from deployers.services.rules import Order, Trade, clearing_house_match, price_update

logger = logging.getLogger(__name__)

# Agent id of the issuing firm itself in share orders.
ISSUER = -1


@dataclass(frozen=True, slots=True)
class Purchase:
    """Outcome of one purchase routine: money spent and units received."""

    spent: int
    units: float


def sellers_of(state: CountryState, account: int, cell: int | None) -> list[Firm | InterfaceFirm]:
    """Sellers of an account, cheapest first with random tie-breaks.

    External accounts are sold by their interface firm. Producer accounts are sold
    by the firms of that sector, restricted to the buyer's neighbourhood when a
    cell is given.
    """
    x = state.interface_of(account)
    if x is not None:
        return [x] if x.inventory > 0 else []
    if cell is None:
        firms = [f for f in state.firms.values() if f.account == account]
    else:
        near = set(state.grid.neighbourhood(cell))
        firms = [f for f in state.firms.values() if f.account == account and f.cell in near]
    firms = [f for f in firms if f.inventory > 0]
    if not firms:
        return []
    ties = state.rng.random(len(firms))
    order = np.lexsort((ties, [f.price for f in firms]))
    return [firms[i] for i in order]


def purchase(
    state: CountryState,
    buyer: object,
    account: int,
    budget: int,
    buyer_account: int,
    cell: int | None = None,
    record_unmet: bool = True,
) -> Purchase:
    """Spend up to `budget` on one goods account.

    Each seller is approached with up to `market.purchase_attempts` price
    negotiations; after every attempt both sides move their prices. Interface firms
    keep a fixed price. The part of the budget nobody could serve is recorded as
    unmet demand, by neighbourhood cell for households and nationally otherwise.

    Args:
        state: Country state
        buyer: Paying agent (household, firm, government, GFCF or interface firm)
        account: Goods account bought
        budget: Money to spend, in base units
        buyer_account: SAM column of the buyer (the recorded cell is (account, buyer_account))
        cell: Buyer's grid cell for neighbourhood purchases, None for national reach
        record_unmet: Record the unserved budget as unmet demand; buyers that retry
            on later days record their residual themselves
    """
    if budget <= 0:
        return Purchase(0, 0.0)
    eps = state.config.market.eps
    attempts = state.config.market.purchase_attempts
    reservation: dict[int, float] = buyer.reservation  # type: ignore[attr-defined]
    left = budget
    units = 0.0
    for seller in sellers_of(state, account, cell):
        if left <= 0:
            break
        fixed = isinstance(seller, InterfaceFirm)
        bid = reservation.get(account, state.reference_price)
        traded = False
        ask = seller.price
        for _ in range(attempts):
            ask = seller.price
            traded, bid, new_ask = price_update(bid, ask, eps)
            if not fixed:
                seller.price = new_ask
            if traded:
                break
        reservation[account] = bid
        if not traded:
            continue
        stock_value = math.floor(seller.inventory * ask)
        if stock_value <= 0:
            continue
        if left <= stock_value:
            cost, got = left, left / ask
        else:
            cost, got = stock_value, seller.inventory
        state.ledger.pay(buyer, seller, cost, PostingKind.PURCHASE, (account, buyer_account))
        seller.inventory = max(0.0, seller.inventory - got)
        if fixed:
            seller.month_sales += cost
        else:
            seller.month.sales += cost
            seller.month.units_sold += got
        left -= cost
        units += got
    if left > 0 and record_unmet:
        if cell is not None:
            state.unmet_local[cell, account] += left
        else:
            state.unmet_national[account] += left
    return Purchase(budget - left, units)


def neighbourhood_prices(state: CountryState, cell: int, accounts: list[int]) -> list[float]:
    """Mean asking price per goods account around a cell.

    Falls back to the national mean, then to the reference price.
    """
    near = set(state.grid.neighbourhood(cell))
    prices = []
    for account in accounts:
        x = state.interface_of(account)
        if x is not None:
            prices.append(x.price)
            continue
        local = [f.price for f in state.firms.values() if f.account == account and f.cell in near]
        if not local:
            local = [f.price for f in state.firms.values() if f.account == account]
        prices.append(float(np.mean(local)) if local else state.reference_price)
    return prices


# --- clearing house ---------------------------------------------------------------


def _investment_cell(state: CountryState) -> tuple[int, int] | None:
    f = state.account_of(AccountKind.GFCF)
    h = state.account_of(AccountKind.HOUSEHOLDS)
    return (f, h) if f is not None and h is not None else None


def share_orders(state: CountryState, free_demand: bool) -> tuple[list[Order], list[Order]]:
    """Monthly order batch: new issues, household buy and sell orders.

    Households bid with their risky budget on one random listed firm. Households
    short of their liquidity buffer offer part of their holdings.
    """
    listed = sorted(fid for fid, f in state.firms.items() if f.listed and f.share_price > 0)
    buys: list[Order] = []
    sells: list[Order] = []
    if not listed:
        return buys, sells
    jitter = state.config.market.order_jitter
    for fid in listed:
        firm = state.firms[fid]
        if firm.pending_issue > 0:
            sells.append(Order(fid, firm.share_price, firm.pending_issue, ISSUER))
    phi = state.config.household.phi
    fraction = state.config.market.share_sell_fraction
    for h in state.households:
        if free_demand and h.risky_budget > 0:
            fid = listed[int(state.rng.integers(len(listed)))]
            price = state.firms[fid].share_price * (1 + jitter * state.rng.random())
            quantity = int(h.risky_budget // price)
            if quantity > 0:
                buys.append(Order(fid, price, quantity, h.id))
        if h.liquidity < phi * h.income_avg:
            for fid, n in sorted(h.shares.items()):
                if fid in state.firms and state.firms[fid].listed and fid != h.owned_firm:
                    quantity = math.floor(n * fraction)
                    if quantity > 0:
                        price = state.firms[fid].share_price * (1 - jitter * state.rng.random())
                        sells.append(Order(fid, price, quantity, h.id))
    return buys, sells


def run_clearing_house(state: CountryState, free_demand: bool) -> int:
    """Collect, match and settle the month's share orders; returns the trade count.

    Trades settle at the ask. A buyer who can no longer pay for the whole match
    receives only the shares its liquidity covers. Unspent risky budgets finance
    investment through the GFCF account. Quotes move with the bilateral price
    rule on the best unmatched bid and ask.
    """
    buys, sells = share_orders(state, free_demand)
    trades = clearing_house_match(buys, sells, known_shares=set(state.firms))
    spent: dict[int, int] = {}
    last_price: dict[int, float] = {}
    executed: list[Trade] = []
    for trade in trades:
        firm = state.firms[trade.share]
        buyer = state.household(trade.buyer)
        affordable = math.floor(max(0, buyer.liquidity) / trade.price) if trade.price > 0 else 0
        quantity = min(trade.quantity, affordable)
        if quantity <= 0:
            continue
        value = to_base_units(trade.price * quantity)
        if trade.seller == ISSUER:
            state.ledger.pay(buyer, firm, value, PostingKind.SHARE_TRADE)
            firm.pending_issue -= quantity
        else:
            seller = state.household(trade.seller)
            state.ledger.pay(buyer, seller, value, PostingKind.SHARE_TRADE)
            seller.shares[firm.id] -= quantity
            firm.registry[seller.id] -= quantity
            if seller.shares[firm.id] <= 0:
                del seller.shares[firm.id]
                del firm.registry[seller.id]
        buyer.shares[firm.id] = buyer.shares.get(firm.id, 0) + quantity
        firm.registry[buyer.id] = firm.registry.get(buyer.id, 0) + quantity
        spent[buyer.id] = spent.get(buyer.id, 0) + value
        last_price[firm.id] = trade.price
        executed.append(Trade(trade.share, trade.price, quantity, trade.buyer, trade.seller))

    if free_demand:
        cell = _investment_cell(state)
        for h in state.households:
            rest = h.risky_budget - spent.get(h.id, 0)
            if rest > 0:
                state.ledger.pay_up_to(h, state.gfcf, rest, PostingKind.CAPITAL, cell)
            h.risky_budget = 0

    _update_quotes(state, buys, sells, executed, last_price)
    return len(executed)


def _update_quotes(
    state: CountryState,
    buys: list[Order],
    sells: list[Order],
    trades: list[Trade],
    last_price: dict[int, float],
) -> None:
    eps = state.config.market.eps
    filled_buy: dict[tuple[int, int], int] = {}
    filled_sell: dict[tuple[int, int], int] = {}
    for t in trades:
        filled_buy[(t.share, t.buyer)] = filled_buy.get((t.share, t.buyer), 0) + t.quantity
        filled_sell[(t.share, t.seller)] = filled_sell.get((t.share, t.seller), 0) + t.quantity
    for fid, firm in state.firms.items():
        if not firm.listed:
            continue
        bids = [o.price for o in buys if o.share == fid and o.quantity > filled_buy.get((fid, o.agent), 0)]
        asks = [o.price for o in sells if o.share == fid and o.quantity > filled_sell.get((fid, o.agent), 0)]
        quote = last_price.get(fid, firm.share_price)
        if bids and asks:
            _, bid, ask = price_update(max(bids), min(asks), eps)
            quote = 0.5 * (bid + ask)
        elif bids:
            quote *= 1 + eps
        elif asks:
            quote *= 1 - eps
        firm.share_price = quote
