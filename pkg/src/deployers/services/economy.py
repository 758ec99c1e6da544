"""Agent state of one country and its structural operations.

Agents are plain dataclasses; `CountryState` owns them together with the ledger,
the recorder and the random generator. Month-to-month behaviour lives in
`deployers.services.engine`.
"""

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from deployers.errors import DeadCounterpartError
from deployers.lib.grid import Grid, grid_for_population
from deployers.lib.money import largest_remainder, to_base_units
from deployers.models.config import RunConfig
from deployers.models.reports import StepReport
from deployers.models.tables import AccountKind, ScaledTargets
from deployers.services.extraction import external_account_partner
from deployers.services.ledger import Ledger, PostingKind, Recorder
from deployers.services.rules import ColumnCoefficients, liquidation_waterfall

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class Loan:
    """Bank loan to a firm. `rate` is monthly."""

    principal: int
    rate: float
    remaining_term: int
    borrower: int
    lender: int


@dataclass(slots=True)
class Household:
    id: int
    cell: int
    shopping_day: int
    liquidity: int = 0
    bank: int | None = None
    shares: dict[int, int] = field(default_factory=dict)
    employer: int | None = None
    owned_firm: int | None = None
    owned_bank: int | None = None
    income_history: list[int] = field(default_factory=list)
    income_avg: float = 0.0
    reservation: dict[int, float] = field(default_factory=dict)
    budget: dict[int, int] = field(default_factory=dict)
    month_income: int = 0
    month_spent: int = 0
    risky_budget: int = 0

    @property
    def label(self) -> str:
        return f"H{self.id}"

    @property
    def may_overdraw(self) -> bool:
        return False

    @property
    def cash(self) -> int:
        return self.liquidity if self.bank is None else 0

    @property
    def deposits(self) -> int:
        return self.liquidity if self.bank is not None else 0

    def wealth(self, share_values: Mapping[int, float]) -> float:
        """Cash plus deposits plus the value of share holdings."""
        return self.liquidity + sum(n * share_values.get(f, 0.0) for f, n in self.shares.items())


@dataclass(slots=True)
class FirmMonth:
    """Flow counters of the month in progress."""

    sales: int = 0
    units_sold: float = 0.0
    ic_cost: int = 0
    wage_cost: int = 0
    interest: int = 0
    taxes: int = 0
    produced: float = 0.0
    production_value: int = 0


@dataclass(slots=True)
class Firm:
    id: int
    sector: int
    account: int
    cell: int
    production_day: int
    owner: int
    price: float
    liquidity: int = 0
    bank: int | None = None
    inventory: float = 0.0
    capital: int = 0
    loans: list[Loan] = field(default_factory=list)
    employees: list[int] = field(default_factory=list)
    wanted_workers: int = 0
    demand_window: list[float] = field(default_factory=list)
    seed_demand: float = 0.0
    registry: dict[int, int] = field(default_factory=dict)
    listed: bool = False
    share_price: float = 0.0
    pending_issue: int = 0
    profit_history: list[int] = field(default_factory=list)
    sales_history: list[int] = field(default_factory=list)
    retained: int = 0
    input_stock: dict[int, float] = field(default_factory=dict)
    input_book: dict[int, int] = field(default_factory=dict)
    born: int = 0
    reservation: dict[int, float] = field(default_factory=dict)
    month: FirmMonth = field(default_factory=FirmMonth)

    @property
    def label(self) -> str:
        return f"F{self.id}"

    @property
    def may_overdraw(self) -> bool:
        return False

    @property
    def debt(self) -> int:
        return sum(loan.principal for loan in self.loans)

    def equity(self) -> float:
        return self.liquidity + self.inventory * self.price + sum(self.input_book.values()) + self.capital - self.debt

    @property
    def outstanding_shares(self) -> int:
        return sum(self.registry.values())

    def share_value(self) -> float:
        """Quoted price when listed, else book equity per share."""
        if self.listed and self.share_price > 0:
            return self.share_price
        n = self.outstanding_shares
        return max(0.0, self.equity()) / n if n else 0.0


@dataclass(slots=True)
class Bank:
    """Commercial bank. Client deposits are the liquidity of agents banking here."""

    id: int
    owner: int | None
    reserves: int = 0
    deposits: int = 0
    loans: int = 0
    advances: int = 0
    month_income: int = 0
    month_expense: int = 0

    @property
    def label(self) -> str:
        return f"B{self.id}"

    @property
    def equity(self) -> int:
        return self.reserves - self.advances + self.loans - self.deposits


@dataclass(slots=True)
class Government:
    liquidity: int = 0
    bank: int | None = None
    reservation: dict[int, float] = field(default_factory=dict)
    budget: dict[int, int] = field(default_factory=dict)
    month_taxes: int = 0
    month_subsidies: int = 0

    @property
    def label(self) -> str:
        return "G"

    @property
    def may_overdraw(self) -> bool:
        return True


@dataclass(slots=True)
class GfcfAgent:
    """Pass-through investment account spending along the GFCF column."""

    liquidity: int = 0
    bank: int | None = None
    reservation: dict[int, float] = field(default_factory=dict)
    budget: dict[int, int] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return "GFCF"

    @property
    def may_overdraw(self) -> bool:
        return True


@dataclass(slots=True)
class InterfaceFirm:
    """Domestic import/export firm standing for one external account.

    It sells imported goods to domestic buyers every day and buys domestic goods
    for export; it deals with its foreign partner only at month boundaries.

    Attributes:
        partner: Live partner country, or None for constant table flows
        partner_label: Partner name used in reports
        product: Partner product for disaggregated accounts
    """

    id: int
    account: int
    partner: str | None
    partner_label: str
    product: str | None
    price: float
    liquidity: int = 0
    bank: int | None = None
    inventory: float = 0.0
    reservation: dict[int, float] = field(default_factory=dict)
    budget: dict[int, int] = field(default_factory=dict)
    export_budget: int = 0
    month_sales: int = 0
    month_imports: int = 0
    month_exports: dict[int, int] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return f"X{self.id}"

    @property
    def may_overdraw(self) -> bool:
        return True


@dataclass(slots=True)
class CentralBank:
    base_rate: float
    issued_base_money: int = 0

    @property
    def label(self) -> str:
        return "CB"


@dataclass(slots=True)
class MonthTally:
    """Country-level counters of the month in progress."""

    new_firms: int = 0
    closed_firms: int = 0
    credit_issued: int = 0
    share_trades: int = 0
    consumption: int = 0
    recapitalisations: int = 0


@dataclass
class CountryState:
    """Complete state of one simulated country."""

    name: str
    config: RunConfig
    targets: ScaledTargets
    rng: np.random.Generator
    grid: Grid
    ledger: Ledger
    recorder: Recorder
    central_bank: CentralBank
    households: list[Household]
    government: Government
    gfcf: GfcfAgent
    interface_firms: list[InterfaceFirm]
    columns: dict[int, ColumnCoefficients]
    household_taxes: dict[int, tuple[AccountKind, float]]
    banks: dict[int, Bank] = field(default_factory=dict)
    firms: dict[int, Firm] = field(default_factory=dict)
    month: int = 0
    assisted: bool = True
    tax_scale: dict[int, float] = field(default_factory=dict)
    next_firm_id: int = 0
    next_bank_id: int = 0
    unmet_local: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    unmet_national: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tally: MonthTally = field(default_factory=MonthTally)
    reports: list[StepReport] = field(default_factory=list)

    # --- lookups -------------------------------------------------------------------

    @property
    def n_active(self) -> int:
        return len(self.households)

    @property
    def wage(self) -> int:
        return self.targets.monthly_wage

    @property
    def reference_price(self) -> float:
        return self.targets.reference_price

    def producer_accounts(self) -> list[int]:
        return self.targets.producers

    def goods_accounts(self) -> list[int]:
        """Accounts whose row is bought as a good: producers and external sectors."""
        return self.targets.sam.indices_of(AccountKind.PRODUCER, AccountKind.EXTERNAL)

    def account_of(self, kind: AccountKind) -> int | None:
        return self.targets.first_of(kind)

    def interface_of(self, account: int) -> InterfaceFirm | None:
        for x in self.interface_firms:
            if x.account == account:
                return x
        return None

    def household(self, hid: int) -> Household:
        if not 0 <= hid < len(self.households):
            raise DeadCounterpartError(f"household H{hid} does not exist")
        return self.households[hid]

    def share_values(self) -> dict[int, float]:
        return {fid: f.share_value() for fid, f in self.firms.items()}

    def unemployed(self) -> list[Household]:
        return [h for h in self.households if h.employer is None]

    def unemployment_rate(self) -> float:
        n = len(self.households)
        return len(self.unemployed()) / n if n else 0.0

    def tax_coefficients(self, taxes: Mapping[int, tuple[AccountKind, float]]) -> dict[int, tuple[AccountKind, float]]:
        """Apply scenario scale factors to a set of tax coefficients."""
        return {
            acc: (kind, coef * self.tax_scale.get(acc, 1.0)) for acc, (kind, coef) in taxes.items()
        }

    # --- structural operations -------------------------------------------------------

    def found_bank(self, owner: Household, capital: int) -> Bank:
        """A household pays capital into a new bank and becomes its owner."""
        bank = Bank(id=self.next_bank_id, owner=owner.id)
        self.next_bank_id += 1
        self.banks[bank.id] = bank
        self.ledger.pay(owner, bank, capital, PostingKind.FOUNDING)
        owner.owned_bank = bank.id
        logger.debug(f"{self.name}: household {owner.id} founded bank {bank.id} with {capital}")
        return bank

    def open_firm(self, owner: Household, sector: int, seed: int, seed_demand: float) -> Firm:
        """Create a firm: the owner pays the seed money, part of it buys fixed capital.

        The capital purchase goes to the GFCF account and is recorded in its
        household cell.
        """
        account = self.producer_accounts()[sector]
        params = self.config.firm
        capital = math.floor(params.capital_fraction * seed)
        firm = Firm(
            id=self.next_firm_id,
            sector=sector,
            account=account,
            cell=owner.cell,
            production_day=int(self.rng.integers(self.config.engine.days_per_month)),
            owner=owner.id,
            price=self.market_price(account),
            bank=None,
            seed_demand=seed_demand,
            registry={owner.id: self.config.market.initial_shares},
            born=self.month,
            reservation={a: self.reference_price for a in self.goods_accounts()},
        )
        self.next_firm_id += 1
        self.firms[firm.id] = firm
        if owner.bank is not None:
            self.ledger.open_account(firm, self.ledger.bank(owner.bank))
        h_acc = self.account_of(AccountKind.HOUSEHOLDS)
        f_acc = self.account_of(AccountKind.GFCF)
        cell = (f_acc, h_acc) if f_acc is not None and h_acc is not None else None
        self.ledger.pay(owner, self.gfcf, capital, PostingKind.CAPITAL, cell)
        self.ledger.pay(owner, firm, seed - capital, PostingKind.SEED)
        firm.capital = capital
        owner.owned_firm = firm.id
        owner.shares[firm.id] = self.config.market.initial_shares
        self.hire(firm, owner)
        self.tally.new_firms += 1
        return firm

    def market_price(self, account: int) -> float:
        """Fixed price of an external account, else the mean asking price of its sector."""
        x = self.interface_of(account)
        if x is not None:
            return x.price
        prices = [f.price for f in self.firms.values() if f.account == account]
        return float(np.mean(prices)) if prices else self.reference_price

    def hire(self, firm: Firm, household: Household) -> None:
        if household.employer is not None:
            self.release(household)
        household.employer = firm.id
        firm.employees.append(household.id)

    def release(self, household: Household) -> None:
        firm = self.firms.get(household.employer) if household.employer is not None else None
        if firm is not None and household.id in firm.employees:
            firm.employees.remove(household.id)
        household.employer = None

    def close_firm(self, firm: Firm) -> None:
        """Liquidate a firm: loans first in seniority order, the rest to shareholders.

        Inventory and input stocks are written off, employees lose their jobs and
        unpaid principal is written off by the lending banks.
        """
        loans = list(firm.loans)
        repaid, residual = liquidation_waterfall(firm.liquidity, [loan.principal for loan in loans])
        for loan, paid in zip(loans, repaid, strict=True):
            bank = self.ledger.bank(loan.lender)
            self.ledger.repay(firm, bank, paid)
            self.ledger.write_off(bank, firm.label, loan.principal - paid)
        firm.loans.clear()
        if residual > 0:
            holders = sorted(h for h, n in firm.registry.items() if n > 0)
            if holders:
                parts = largest_remainder(residual, [firm.registry[h] for h in holders])
                for hid, part in zip(holders, parts, strict=True):
                    self.ledger.pay(firm, self.household(hid), part, PostingKind.LIQUIDATION)
        if firm.liquidity:
            # No shareholder left: the residual goes to the owner of record.
            self.ledger.pay(firm, self.household(firm.owner), firm.liquidity, PostingKind.LIQUIDATION)
        for hid in list(firm.employees):
            self.household(hid).employer = None
        firm.employees.clear()
        for hid in firm.registry:
            self.household(hid).shares.pop(firm.id, None)
        owner = self.household(firm.owner)
        if owner.owned_firm == firm.id:
            owner.owned_firm = None
        firm.inventory = 0.0
        if firm.bank is not None:
            self.ledger.close_account(firm)
        del self.firms[firm.id]
        self.tally.closed_firms += 1


def household_tax_rates(targets: ScaledTargets) -> dict[int, tuple[AccountKind, float]]:
    """Household tax rates from the households column.

    Product taxes are a rate on goods spending, every other tax a rate on income.
    """
    h = targets.first_of(AccountKind.HOUSEHOLDS)
    if h is None:
        return {}
    sam = targets.sam
    income = float(targets.monthly[h, :].sum())
    goods = float(sum(targets.monthly[g, h] for g in sam.indices_of(AccountKind.PRODUCER, AccountKind.EXTERNAL)))
    rates: dict[int, tuple[AccountKind, float]] = {}
    for t in sam.indices_of(*[k for k in AccountKind if k.is_tax]):
        kind = sam.accounts[t].kind
        value = float(targets.monthly[t, h])
        base = goods if kind == AccountKind.TAX_PRODUCTS else income
        if value != 0 and base > 0:
            rates[t] = (kind, value / base)
    return rates


def column_coefficients(targets: ScaledTargets, producer: int) -> ColumnCoefficients:
    """Split a producer column into inputs, labor, capital and taxes."""
    sam = targets.sam
    coef = targets.coefficients[:, producer]
    inputs = {
        i: float(coef[i])
        for i in sam.indices_of(AccountKind.PRODUCER, AccountKind.EXTERNAL)
        if coef[i] > 0
    }
    labor = float(sum(coef[i] for i in sam.indices_of(AccountKind.LABOR)))
    capital = float(sum(coef[i] for i in sam.indices_of(AccountKind.SURPLUS)))
    taxes = {
        i: (sam.accounts[i].kind, float(coef[i]))
        for i in sam.indices_of(*[k for k in AccountKind if k.is_tax])
        if coef[i] != 0
    }
    return ColumnCoefficients(inputs=inputs, labor=labor, capital=capital, taxes=taxes)


def build_country_state(
    targets: ScaledTargets,
    config: RunConfig,
    name: str = "",
    partners: Mapping[int, str] | None = None,
) -> CountryState:
    """Initialise households, banks, public accounts and interface firms.

    The economy starts without firms; deployment grows them.

    Args:
        targets: Scaled SAM targets
        config: Run configuration (seed, behaviour, grid)
        name: Country label used in logs and reports
        partners: Live partner country per external account; other external
            accounts replay their table flows every month
    """
    partners = partners or {}
    rng = np.random.Generator(np.random.PCG64(config.seed))
    engine = config.engine
    sam = targets.sam
    grid = grid_for_population(targets.n_active, config.grid.radius, config.grid.width, config.grid.height)
    recorder = Recorder(sam.size, engine.history_months)
    central_bank = CentralBank(base_rate=config.bank.base_rate)
    banks: dict[int, Bank] = {}
    ledger = Ledger(banks, central_bank, recorder, keep_postings=engine.keep_postings)
    p_ref = targets.reference_price
    goods = sam.indices_of(AccountKind.PRODUCER, AccountKind.EXTERNAL)

    households = [
        Household(
            id=i,
            cell=int(rng.integers(grid.n_cells)),
            shopping_day=int(rng.integers(engine.days_per_month)),
            reservation={g: p_ref for g in goods},
        )
        for i in range(targets.n_active)
    ]
    interface_firms = []
    for k, x in enumerate(sam.indices_of(AccountKind.EXTERNAL)):
        code = sam.accounts[x].code
        partner_label, product = external_account_partner(code)
        interface_firms.append(
            InterfaceFirm(
                id=k,
                account=x,
                partner=partners.get(x),
                partner_label=partners.get(x) or partner_label or code,
                product=product,
                price=p_ref,
                reservation={g: p_ref for g in goods},
            )
        )

    state = CountryState(
        name=name or sam.region or sam.name,
        config=config,
        targets=targets,
        rng=rng,
        grid=grid,
        ledger=ledger,
        recorder=recorder,
        central_bank=central_bank,
        households=households,
        government=Government(reservation={g: p_ref for g in goods}),
        gfcf=GfcfAgent(reservation={g: p_ref for g in goods}),
        interface_firms=interface_firms,
        columns={p: column_coefficients(targets, p) for p in targets.producers},
        household_taxes=household_tax_rates(targets),
        banks=banks,
        unmet_local=np.zeros((grid.n_cells, sam.size)),
        unmet_national=np.zeros(sam.size),
    )

    endowment = to_base_units(config.household.endowment_months * targets.monthly_wage)
    for h in households:
        ledger.issue(h, endowment)

    bank_capital = to_base_units(
        config.bank.initial_equity_months * targets.monthly_wage * float(np.sum(targets.employment))
    )
    if bank_capital > 0 and households:
        for _ in range(config.bank.initial_banks):
            owner = households[int(rng.integers(len(households)))]
            ledger.issue(owner, bank_capital)
            state.found_bank(owner, bank_capital)

    logger.info(
        f"Built {state.name}: {len(households)} households, {len(banks)} banks, "
        f"{len(interface_firms)} interface firms, grid {grid.width}x{grid.height}"
    )
    return state
