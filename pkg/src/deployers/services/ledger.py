"""Double-entry ledger: money movements, postings and SAM-cell recording.

Every non-bank agent holds `liquidity`, either as cash (or a central-bank account)
when `bank` is None, or as a deposit at that bank. A bank's own money is its
reserve balance at the central bank. Paying from a deposit therefore lowers the
client's liquidity and the bank's deposits and reserves together, which keeps the
sum of net financial assets equal to the issued base money.
"""

import json
import logging
from collections.abc import Iterator
from dataclasses import asdict, dataclass
from enum import StrEnum
from typing import Any, Protocol

import numpy as np

from deployers.errors import DeadCounterpartError, OverdraftError

logger = logging.getLogger(__name__)


class PostingKind(StrEnum):
    PURCHASE = "purchase"
    WAGE = "wage"
    TAX = "tax"
    DIVIDEND = "dividend"
    SUBSIDY = "subsidy"
    TRANSFER = "transfer"
    CAPITAL = "capital"
    SEED = "seed"
    LOAN = "loan"
    INTEREST = "interest"
    AMORTIZATION = "amortization"
    WRITE_OFF = "write_off"
    DEPOSIT_INTEREST = "deposit_interest"
    SHARE_TRADE = "share_trade"
    FOUNDING = "founding"
    ISSUE = "issue"
    SETTLEMENT = "settlement"
    ADVANCE = "advance"
    LIQUIDATION = "liquidation"
    RECAPITALISATION = "recapitalisation"


@dataclass(frozen=True, slots=True)
class Posting:
    """One journal line. `row`/`col` name the SAM cell when the flow maps to one."""

    month: int
    day: int
    payer: str
    payee: str
    kind: PostingKind
    amount: int
    row: int | None = None
    col: int | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))


class MoneyHolder(Protocol):
    liquidity: int
    bank: int | None

    @property
    def label(self) -> str: ...

    @property
    def may_overdraw(self) -> bool: ...


class BankAccount(Protocol):
    id: int
    reserves: int
    deposits: int
    loans: int
    advances: int

    @property
    def label(self) -> str: ...


class IssuingBank(Protocol):
    issued_base_money: int


class Recorder:
    """Monthly transaction aggregates keyed by (receiving account, paying account).

    Posted cells and imputed cells (operating surplus) are kept apart during the
    month and merged when the month closes.
    """

    def __init__(self, n_accounts: int, history_months: int) -> None:
        self.n_accounts = n_accounts
        self.history_months = history_months
        self.current = np.zeros((n_accounts, n_accounts), dtype=np.int64)
        self.imputed = np.zeros((n_accounts, n_accounts), dtype=np.int64)
        self.history: list[np.ndarray] = []

    def record(self, row: int, col: int, amount: int) -> None:
        self.current[row, col] += amount

    def impute(self, row: int, col: int, amount: int) -> None:
        self.imputed[row, col] += amount

    def month_view(self) -> np.ndarray:
        """Posted plus imputed cells of the month in progress."""
        return self.current + self.imputed

    def close_month(self) -> np.ndarray:
        closed = self.month_view()
        self.history.append(closed)
        if len(self.history) > self.history_months:
            del self.history[: len(self.history) - self.history_months]
        self.current = np.zeros_like(self.current)
        self.imputed = np.zeros_like(self.imputed)
        return closed

    def window(self, months: int) -> np.ndarray:
        """Sum of the last `months` closed months.

        Raises:
            ValueError: If fewer months are recorded
        """
        if months < 1 or months > len(self.history):
            raise ValueError(f"window of {months} months exceeds the {len(self.history)} recorded")
        return np.sum(self.history[-months:], axis=0)


class Ledger:
    """Moves money between agents and journals every movement."""

    def __init__(
        self,
        banks: dict[int, Any],
        central_bank: IssuingBank,
        recorder: Recorder,
        keep_postings: bool = False,
    ) -> None:
        self.banks = banks
        self.central_bank = central_bank
        self.recorder = recorder
        self.keep_postings = keep_postings
        self.postings: list[Posting] = []
        self.month = 0
        self.day = 0

    def _journal(
        self, payer: str, payee: str, kind: PostingKind, amount: int, cell: tuple[int, int] | None
    ) -> None:
        if cell is not None:
            self.recorder.record(cell[0], cell[1], amount)
        if self.keep_postings:
            row, col = cell if cell is not None else (None, None)
            self.postings.append(Posting(self.month, self.day, payer, payee, kind, amount, row, col))

    def bank(self, bank_id: int) -> BankAccount:
        try:
            return self.banks[bank_id]  # type: ignore[no-any-return]
        except KeyError as e:
            raise DeadCounterpartError(f"bank B{bank_id} no longer exists") from e

    def _debit(self, agent: Any, amount: int) -> None:
        if hasattr(agent, "reserves"):
            agent.reserves -= amount
            return
        if agent.liquidity < amount and not agent.may_overdraw:
            raise OverdraftError(f"{agent.label} cannot pay {amount} with {agent.liquidity}")
        agent.liquidity -= amount
        if agent.bank is not None:
            bank = self.bank(agent.bank)
            bank.deposits -= amount
            bank.reserves -= amount

    def _credit(self, agent: Any, amount: int) -> None:
        if hasattr(agent, "reserves"):
            agent.reserves += amount
            return
        agent.liquidity += amount
        if agent.bank is not None:
            bank = self.bank(agent.bank)
            bank.deposits += amount
            bank.reserves += amount

    def pay(
        self,
        payer: Any,
        payee: Any,
        amount: int,
        kind: PostingKind,
        cell: tuple[int, int] | None = None,
    ) -> None:
        """Transfer money and record the SAM cell (if any).

        A negative amount moves money from payee to payer but is recorded as a
        negative cell value (e.g. a production subsidy). A payer paying itself only
        records the cell.
        """
        if amount == 0:
            return
        if payer is not payee:
            if amount > 0:
                self._debit(payer, amount)
                self._credit(payee, amount)
            else:
                self._debit(payee, -amount)
                self._credit(payer, -amount)
        self._journal(payer.label, payee.label, kind, amount, cell)

    def pay_up_to(
        self,
        payer: Any,
        payee: Any,
        amount: int,
        kind: PostingKind,
        cell: tuple[int, int] | None = None,
    ) -> int:
        """Pay as much of `amount` as the payer can afford; returns the amount paid."""
        if amount <= 0:
            return 0
        affordable = amount if payer.may_overdraw else max(0, min(amount, payer.liquidity))
        self.pay(payer, payee, affordable, kind, cell)
        return affordable

    def issue(self, payee: Any, amount: int, kind: PostingKind = PostingKind.ISSUE) -> None:
        """Create base money in favour of an agent (endowments, foreign settlement)."""
        if amount == 0:
            return
        self.central_bank.issued_base_money += amount
        self._credit(payee, amount)
        self._journal("CB", payee.label, kind, amount, None)

    def retire(self, payer: Any, amount: int, kind: PostingKind = PostingKind.SETTLEMENT) -> None:
        """Destroy base money paid out of the economy."""
        if amount == 0:
            return
        self._debit(payer, amount)
        self.central_bank.issued_base_money -= amount
        self._journal(payer.label, "CB", kind, amount, None)

    def lend(self, bank: BankAccount, borrower: Any, amount: int) -> None:
        """Disburse a loan as a new deposit of the borrower at the lending bank."""
        if borrower.bank != bank.id:
            raise DeadCounterpartError(f"{borrower.label} does not bank at {bank.label}")
        bank.loans += amount
        borrower.liquidity += amount
        bank.deposits += amount
        self._journal(bank.label, borrower.label, PostingKind.LOAN, amount, None)

    def repay(self, borrower: Any, bank: BankAccount, amount: int) -> None:
        """Amortize principal: the deposit and the loan asset shrink together."""
        if amount <= 0:
            return
        self._debit(borrower, amount)
        bank.reserves += amount
        bank.loans -= amount
        self._journal(borrower.label, bank.label, PostingKind.AMORTIZATION, amount, None)

    def write_off(self, bank: BankAccount, borrower_label: str, amount: int) -> None:
        if amount <= 0:
            return
        bank.loans -= amount
        self._journal(bank.label, borrower_label, PostingKind.WRITE_OFF, amount, None)

    def advance(self, bank: BankAccount, amount: int) -> None:
        """Central-bank standing advance (negative amount repays)."""
        if amount == 0:
            return
        bank.reserves += amount
        bank.advances += amount
        self._journal("CB", bank.label, PostingKind.ADVANCE, amount, None)

    def open_account(self, holder: Any, bank: BankAccount) -> None:
        """Move an unbanked agent's cash into a deposit; base money is unchanged."""
        if holder.bank is not None:
            return
        holder.bank = bank.id
        bank.deposits += holder.liquidity
        bank.reserves += holder.liquidity

    def close_account(self, holder: Any) -> None:
        """Withdraw a deposit as cash."""
        if holder.bank is None:
            return
        bank = self.bank(holder.bank)
        bank.deposits -= holder.liquidity
        bank.reserves -= holder.liquidity
        holder.bank = None

    def drain(self) -> list[Posting]:
        """Return and forget the kept postings."""
        out, self.postings = self.postings, []
        return out

    def __iter__(self) -> Iterator[Posting]:
        return iter(self.postings)
