"""Behavioural rules of households, firms, banks and markets.

Every function here is pure: inputs are explicit values, nothing is mutated, and
random decisions take their uniform draw as an argument. The engine owns all
state changes.
"""

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from deployers.errors import RuleError
from deployers.lib.money import largest_remainder, to_base_units
from deployers.models.config import HouseholdParams, RiskParams
from deployers.models.tables import AccountKind

# --- households -------------------------------------------------------------------


def consumption_budget(
    income_avg: float,
    wealth: float,
    params: HouseholdParams,
    available: float | None = None,
) -> float:
    """Buffer-stock consumption C = I + kappa * (W - phi * I).

    The result is clamped below at 0 and above at the liquid money available.
    """
    budget = income_avg + params.kappa * (wealth - params.phi * income_avg)
    budget = max(0.0, budget)
    if available is not None:
        budget = min(budget, max(0.0, available))
    return budget


def logit_weights(
    sam_shares: Sequence[float],
    prices: Sequence[float],
    beta: float,
    reference_prices: Sequence[float] | None = None,
) -> np.ndarray:
    """SAM shares modulated by exp(-beta * p / p_ref).

    Raises:
        RuleError: If a price is not positive or every weight is zero
    """
    shares = np.asarray(sam_shares, dtype=float)
    p = np.asarray(prices, dtype=float)
    ref = np.ones_like(p) if reference_prices is None else np.asarray(reference_prices, dtype=float)
    if np.any(p <= 0) or np.any(ref <= 0):
        raise RuleError("prices must be positive")
    if np.any(shares < 0) or shares.sum() <= 0:
        raise RuleError("SAM shares must be nonnegative and not all zero")
    logits = -beta * p / ref
    active = shares > 0
    # Shift by the largest active logit: equal relative prices give factors of exactly 1.
    logits = logits - logits[active].max()
    return shares * np.exp(logits)


def allocate_budget(
    budget: int,
    sam_shares: Sequence[float],
    prices: Sequence[float],
    beta: float,
    reference_prices: Sequence[float] | None = None,
) -> list[int]:
    """Split an integer budget over sectors with logit-modulated SAM shares.

    Args:
        budget: Money to spend, in base units
        sam_shares: SAM column proportions per sector
        prices: Local prices per sector
        beta: Price sensitivity
        reference_prices: Deployment-time prices (1 when omitted)

    Returns:
        Integer spend per sector summing exactly to budget
    """
    weights = logit_weights(sam_shares, prices, beta, reference_prices)
    return largest_remainder(budget, weights.tolist())


# --- goods market -----------------------------------------------------------------


def price_update(buyer_price: float, seller_price: float, eps: float) -> tuple[bool, float, float]:
    """Bilateral price adjustment after a purchase attempt.

    A trade happens when the buyer's price is at least the seller's; both sides then
    move away from each other (buyer lower, seller higher). Without a trade they move
    towards each other.
    """
    if not 0.0 < eps < 1.0:
        raise RuleError(f"eps must lie in (0, 1), got {eps}")
    if buyer_price >= seller_price:
        return True, buyer_price * (1 - eps), seller_price * (1 + eps)
    return False, buyer_price * (1 + eps), seller_price * (1 - eps)


# --- firms ------------------------------------------------------------------------


def production_plan(
    demand_window: Sequence[float],
    inventory: float,
    lambda_inv: float,
    seed_demand: float = 0.0,
) -> float:
    """Output target that restores an inventory cover of lambda_inv months of demand.

    Newborn firms (empty demand window) use the seed demand observed in their
    neighbourhood.
    """
    mean_demand = float(np.mean(demand_window)) if len(demand_window) else seed_demand
    return max(0.0, lambda_inv * mean_demand - inventory)


class Technology(StrEnum):
    LEONTIEF = "leontief"
    COBB_DOUGLAS = "cobb_douglas"


@dataclass(frozen=True)
class ColumnCoefficients:
    """One producer's SAM column divided by its total.

    Attributes:
        inputs: Intermediate inputs per supplying account (producers and external sectors)
        labor: Labor coefficient
        capital: Gross-operating-surplus coefficient
        taxes: Tax coefficient and kind per tax account
    """

    inputs: dict[int, float]
    labor: float
    capital: float
    taxes: dict[int, tuple[AccountKind, float]] = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        """Labor exponent alpha = L / (L + K) (0.5 when both are zero)."""
        total = self.labor + self.capital
        return self.labor / total if total > 0 else 0.5


@dataclass(frozen=True)
class Requirements:
    """Monetary inputs needed for one production run."""

    ic: dict[int, float]
    labor_bill: float
    hires: int
    capital_services: float
    taxes: dict[int, float]


def input_requirements(
    column: ColumnCoefficients,
    output: float,
    price: float,
    wage: float,
    tech: Technology | str = Technology.LEONTIEF,
    alpha: float | None = None,
) -> Requirements:
    """Money needed per input for `output` units valued at `price`.

    Under Leontief both labor and capital scale linearly with output. Under
    Cobb-Douglas the value-added bill is split with cost shares alpha and 1 - alpha,
    which is the cost-minimising mix for any wage and capital cost.

    Raises:
        RuleError: Negative output or alpha outside [0, 1]
    """
    if output < 0:
        raise RuleError(f"output must be nonnegative, got {output}")
    value = output * price
    ic = {acc: coef * value for acc, coef in column.inputs.items()}
    taxes = {acc: coef * value for acc, (_, coef) in column.taxes.items()}
    if Technology(tech) == Technology.LEONTIEF:
        labor_bill = column.labor * value
        capital = column.capital * value
    else:
        a = column.alpha if alpha is None else alpha
        if not 0.0 <= a <= 1.0:
            raise RuleError(f"Cobb-Douglas alpha must lie in [0, 1], got {a}")
        added = (column.labor + column.capital) * value
        labor_bill = a * added
        capital = (1 - a) * added
    hires = math.ceil(labor_bill / wage - 1e-9) if wage > 0 and labor_bill > 0 else 0
    return Requirements(ic=ic, labor_bill=labor_bill, hires=hires, capital_services=capital, taxes=taxes)


# --- banks ------------------------------------------------------------------------


class DenialReason(StrEnum):
    CAR = "CAR"
    RRR = "RRR"
    INSOLVENT = "insolvent borrower"


@dataclass(frozen=True)
class Offer:
    rate: float
    probability_of_default: float


@dataclass(frozen=True)
class Denial:
    reason: DenialReason


@dataclass(frozen=True)
class BankPosition:
    """Balance-sheet figures a bank checks before lending."""

    equity: int
    reserves: int
    deposits: int
    loans: int
    car: float
    rrr: float


@dataclass(frozen=True)
class BorrowerPosition:
    """Borrower figures used for risk pricing.

    Attributes:
        debt: Outstanding loan principal
        equity: Net worth
        deposits_here: Whether the loan proceeds stay at the lending bank
    """

    debt: int
    equity: float
    deposits_here: bool


def default_probability(debt_to_equity: float, rho: float) -> float:
    """PD = 1 - exp(-rho * max(0, D/E))."""
    return 1.0 - math.exp(-rho * max(0.0, debt_to_equity))


def loan_offer(
    bank: BankPosition,
    borrower: BorrowerPosition,
    amount: int,
    base_rate: float,
    risk: RiskParams,
) -> Offer | Denial:
    """Answer a loan application on a first-come, first-served basis.

    Rates are annual: base_rate + mu * PD.
    """
    if amount <= 0:
        raise RuleError("loan amount must be positive")
    if bank.equity < bank.car * (bank.loans + amount):
        return Denial(DenialReason.CAR)
    if borrower.deposits_here:
        reserves_after, deposits_after = bank.reserves, bank.deposits + amount
    else:
        reserves_after, deposits_after = bank.reserves - amount, bank.deposits
    if reserves_after < bank.rrr * deposits_after:
        return Denial(DenialReason.RRR)
    if borrower.equity <= 0:
        return Denial(DenialReason.INSOLVENT)
    pd = default_probability((borrower.debt + amount) / borrower.equity, risk.rho)
    return Offer(rate=base_rate + risk.mu * pd, probability_of_default=pd)


# --- final consumers --------------------------------------------------------------


def gfcf_distribute(value: int, gfcf_column: Sequence[float]) -> list[int]:
    """Split investment spending over the GFCF column in exact integer money.

    Raises:
        RuleError: Zero or negative column
    """
    column = [float(c) for c in gfcf_column]
    if any(c < 0 for c in column) or sum(column) <= 0:
        raise RuleError("GFCF column must be nonnegative with a positive sum")
    return largest_remainder(value, column)


# --- stock market -----------------------------------------------------------------


@dataclass(frozen=True)
class Order:
    """Limit order on the shares of one firm."""

    share: int
    price: float
    quantity: int
    agent: int


@dataclass(frozen=True)
class Trade:
    share: int
    price: float
    quantity: int
    buyer: int
    seller: int


def clearing_house_match(
    buy_orders: Sequence[Order],
    sell_orders: Sequence[Order],
    known_shares: set[int] | None = None,
) -> list[Trade]:
    """Match one monthly batch of share orders.

    Per share, buys are taken from the highest price and sells from the lowest;
    matching stops at the first buy whose limit is below the current ask. Trades
    execute at the ask. Ties keep submission order.

    Raises:
        RuleError: Negative quantity or an order on an unknown share
    """
    for order in (*buy_orders, *sell_orders):
        if order.quantity < 0:
            raise RuleError(f"negative quantity in order {order}")
        if known_shares is not None and order.share not in known_shares:
            raise RuleError(f"order references unknown share {order.share}")

    trades: list[Trade] = []
    for share in sorted({o.share for o in buy_orders} & {o.share for o in sell_orders}):
        buys = sorted(
            (o for o in buy_orders if o.share == share and o.quantity > 0), key=lambda o: -o.price
        )
        sells = sorted(
            (o for o in sell_orders if o.share == share and o.quantity > 0), key=lambda o: o.price
        )
        left_buy = [o.quantity for o in buys]
        left_sell = [o.quantity for o in sells]
        i = j = 0
        while i < len(buys) and j < len(sells) and buys[i].price >= sells[j].price:
            qty = min(left_buy[i], left_sell[j])
            trades.append(Trade(share, sells[j].price, qty, buys[i].agent, sells[j].agent))
            left_buy[i] -= qty
            left_sell[j] -= qty
            if left_buy[i] == 0:
                i += 1
            if left_sell[j] == 0:
                j += 1
    return trades


# --- profits, taxes and dividends -------------------------------------------------


@dataclass(frozen=True)
class FirmPnl:
    """Monthly profit-and-loss figures of a firm, in base units."""

    sales: int
    production_value: int
    costs: int


@dataclass(frozen=True)
class Distribution:
    """Outcome of the month-end profit distribution.

    Attributes:
        taxes: Tax due per tax account (negative = subsidy)
        dividends: Net dividend per shareholder
        retained: After-tax profit kept by the firm (negative on a loss)
        profit: After-tax profit before distribution
    """

    taxes: dict[int, int]
    dividends: dict[int, int]
    retained: int
    profit: int


def dividend_and_tax_flows(
    pnl: FirmPnl,
    tax_coefficients: Mapping[int, tuple[AccountKind, float]],
    payout_ratio: float,
    shareholders: Mapping[int, int],
) -> Distribution:
    """Taxes, dividends and retained earnings of one firm for one month.

    Social contributions and production taxes are levied on production value,
    product taxes on sales and income tax on distributed dividends (withheld from
    the shareholders' payout).
    """
    taxes: dict[int, int] = {}
    income_rates: dict[int, float] = {}
    for account, (kind, coef) in tax_coefficients.items():
        if kind == AccountKind.TAX_PRODUCTS:
            taxes[account] = to_base_units(coef * pnl.sales)
        elif kind == AccountKind.TAX_INCOME:
            income_rates[account] = coef
        else:
            taxes[account] = to_base_units(coef * pnl.production_value)

    profit = pnl.sales - pnl.costs - sum(taxes.values())
    gross_dividends = math.floor(payout_ratio * max(0, profit))
    withheld = 0
    for account, rate in income_rates.items():
        taxes[account] = to_base_units(rate * gross_dividends)
        withheld += taxes[account]
    net = max(0, gross_dividends - withheld)

    dividends: dict[int, int] = {}
    holders = sorted(h for h, n in shareholders.items() if n > 0)
    if net > 0 and holders:
        parts = largest_remainder(net, [shareholders[h] for h in holders])
        dividends = {h: p for h, p in zip(holders, parts, strict=True) if p}
    paid_out = sum(dividends.values()) + withheld if dividends or withheld else 0
    return Distribution(taxes=taxes, dividends=dividends, retained=profit - paid_out, profit=profit)


# --- entry and exit ---------------------------------------------------------------


def entry_probabilities(gaps: Sequence[float], p_open: float) -> list[float]:
    """Per-sector opening probability p_open * gap_s+ / sum(gap+)."""
    positive = [max(0.0, g) for g in gaps]
    total = sum(positive)
    if total <= 0:
        return [0.0] * len(positive)
    return [p_open * g / total for g in positive]


def firm_entry_decision(gaps: Sequence[float], p_open: float, draw: float) -> int | None:
    """Sector a household opens a firm in, or None.

    Args:
        gaps: Unmet demand per sector in the household's neighbourhood
        p_open: Maximum monthly opening probability
        draw: Uniform draw in [0, 1)
    """
    cumulative = 0.0
    for sector, p in enumerate(entry_probabilities(gaps, p_open)):
        cumulative += p
        if p > 0 and draw < cumulative:
            return sector
    return None


class ExitDecision(StrEnum):
    CLOSE = "close"
    KEEP = "keep"


def firm_exit_decision(
    equity: float,
    profit_history: Sequence[int],
    loss_window: int,
    equity_floor: float,
    sales_history: Sequence[int] = (),
) -> ExitDecision:
    """Close on equity below the floor, a full window of losses or a full window without sales."""
    if equity < equity_floor:
        return ExitDecision.CLOSE
    recent = list(profit_history)[-loss_window:]
    if len(recent) >= loss_window and all(p < 0 for p in recent):
        return ExitDecision.CLOSE
    idle = list(sales_history)[-loss_window:]
    if len(idle) >= loss_window and all(s <= 0 for s in idle):
        return ExitDecision.CLOSE
    return ExitDecision.KEEP


def liquidation_waterfall(liquidity: int, loan_balances: Sequence[int]) -> tuple[list[int], int]:
    """Pay loans in seniority order, then the residual to the owner.

    Returns:
        Repayment per loan and the owner's residual
    """
    left = max(0, liquidity)
    repaid = []
    for balance in loan_balances:
        paid = min(left, balance)
        repaid.append(paid)
        left -= paid
    return repaid, left


# --- calibration ------------------------------------------------------------------


def adjust_kappa(
    kappa: float, relative_error: float, gain: float, lower: float = 0.01, upper: float = 1.0
) -> float:
    """Multiplicative feedback on kappa: too much consumption lowers it."""
    return min(upper, max(lower, kappa * (1.0 - gain * relative_error)))
