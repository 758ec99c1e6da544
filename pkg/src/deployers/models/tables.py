"""Table data models: SAM, inter-country IO tables and scaled targets."""

import re
from enum import StrEnum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from deployers.errors import TableFormatError


class AccountKind(StrEnum):
    """Kind of a SAM account."""

    PRODUCER = "Producer"
    GFCF = "GFCF"
    EXTERNAL = "ExternalSector"
    LABOR = "Labor"
    SURPLUS = "GrossOpSurplus"
    TAX_SSOC = "TaxSSoc"
    TAX_PRODUCTION = "TaxProduction"
    TAX_PRODUCTS = "TaxProducts"
    TAX_INCOME = "TaxIncome"
    GOVERNMENT = "Government"
    HOUSEHOLDS = "Households"

    @property
    def is_tax(self) -> bool:
        return self in TAX_KINDS

    @property
    def is_final_consumer(self) -> bool:
        return self in FINAL_CONSUMER_KINDS


TAX_KINDS = frozenset(
    {
        AccountKind.TAX_SSOC,
        AccountKind.TAX_PRODUCTION,
        AccountKind.TAX_PRODUCTS,
        AccountKind.TAX_INCOME,
    }
)
FINAL_CONSUMER_KINDS = frozenset(
    {
        AccountKind.GFCF,
        AccountKind.EXTERNAL,
        AccountKind.GOVERNMENT,
        AccountKind.HOUSEHOLDS,
    }
)

_PREFIX_KINDS = {
    "P": AccountKind.PRODUCER,
    "N": AccountKind.PRODUCER,
    "F": AccountKind.GFCF,
    "X": AccountKind.EXTERNAL,
    "L": AccountKind.LABOR,
    "K": AccountKind.SURPLUS,
    "G": AccountKind.GOVERNMENT,
    "H": AccountKind.HOUSEHOLDS,
}

# Tax accounts share the T prefix; the kind comes from a keyword in the name.
# Order matters: "TaxProducts" must be tested before "TaxProduction".
_TAX_KEYWORDS = (
    ("ssoc", AccountKind.TAX_SSOC),
    ("social", AccountKind.TAX_SSOC),
    ("products", AccountKind.TAX_PRODUCTS),
    ("product", AccountKind.TAX_PRODUCTION),
    ("irpf", AccountKind.TAX_INCOME),
    ("income", AccountKind.TAX_INCOME),
)

_CODE_PATTERN = re.compile(r"^[A-Za-z][A-Za-z0-9_\-]*$")


class AccountId(BaseModel):
    """Identifier and kind of a SAM account.

    Attributes:
        code: Short identifier, e.g. "P01_AgroPesc"
        kind: Account kind
    """

    code: str
    kind: AccountKind

    model_config = ConfigDict(frozen=True)

    @classmethod
    def from_code(cls, code: str) -> "AccountId":
        """Infer the account kind from the code prefix convention.

        Args:
            code: Account code such as "T13_TaxProducts"

        Returns:
            AccountId with the inferred kind

        Raises:
            TableFormatError: If the prefix (or tax keyword) is not recognised
        """
        if not code or not _CODE_PATTERN.match(code):
            raise TableFormatError(f"Invalid account code {code!r}")
        prefix = code[0].upper()
        if prefix == "T":
            lowered = code.lower()
            for keyword, kind in _TAX_KEYWORDS:
                if keyword in lowered:
                    return cls(code=code, kind=kind)
            raise TableFormatError(f"Cannot infer the tax kind of account {code!r}")
        kind = _PREFIX_KINDS.get(prefix)
        if kind is None:
            raise TableFormatError(f"Unknown account-kind prefix in {code!r}")
        return cls(code=code, kind=kind)


def format_number(value: float) -> str:
    """Canonical text form of a table cell: integers without a decimal point,
    everything else in shortest round-trip form."""
    if value == 0:
        return "0"
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


class SamTable(BaseModel):
    """Social Accounting Matrix: square flows, row = receiver, column = payer.

    Attributes:
        name: Table name (e.g. "MCAESP08")
        region: Region or country label
        year: Reference year
        population: Total population
        active_population: Active population used for agent scaling
        unit_scale: Currency per matrix unit (e.g. 100000)
        currency: Currency label
        accounts: Ordered accounts
        flows: Dense flow matrix (accounts x accounts), money per year in matrix units
        metadata: Any further "Key: value" metadata of the source document
        declared_row_sums: Row totals printed in the source (None when not given)
        declared_col_sums: Column totals printed in the source (None when not given)
    """

    name: str = "SAM"
    region: str = ""
    year: int | None = None
    population: float = 0.0
    active_population: float = 0.0
    unit_scale: float = 1.0
    currency: str = ""
    accounts: list[AccountId]
    flows: np.ndarray
    metadata: dict[str, str] = Field(default_factory=dict)
    declared_row_sums: np.ndarray | None = None
    declared_col_sums: np.ndarray | None = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("flows")
    @classmethod
    def flows_are_float_matrix(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"SAM flows must be a square matrix, got shape {v.shape}")
        return v

    @model_validator(mode="after")
    def accounts_match_flows(self) -> "SamTable":
        codes = [a.code for a in self.accounts]
        if len(set(codes)) != len(codes):
            raise ValueError("Account codes must be unique")
        if len(codes) != self.flows.shape[0]:
            raise ValueError(
                f"{len(codes)} accounts but flow matrix has {self.flows.shape[0]} rows"
            )
        return self

    @property
    def codes(self) -> list[str]:
        return [a.code for a in self.accounts]

    @property
    def size(self) -> int:
        return len(self.accounts)

    def index(self, code: str) -> int:
        """Position of an account code.

        Raises:
            KeyError: If the code is not in the table
        """
        for i, account in enumerate(self.accounts):
            if account.code == code:
                return i
        raise KeyError(code)

    def flow(self, row: str, col: str) -> float:
        """Flow received by `row` and paid by `col`."""
        return float(self.flows[self.index(row), self.index(col)])

    def row_sums(self) -> np.ndarray:
        return self.flows.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.flows.sum(axis=0)

    def indices_of(self, *kinds: AccountKind) -> list[int]:
        """Positions of all accounts whose kind is one of `kinds`, in table order."""
        return [i for i, a in enumerate(self.accounts) if a.kind in kinds]

    def balance_errors(self) -> np.ndarray:
        """Relative row/column mismatch per account (0 for empty accounts)."""
        rows, cols = self.row_sums(), self.col_sums()
        scale = np.maximum(np.abs(rows), np.abs(cols))
        with np.errstate(divide="ignore", invalid="ignore"):
            err = np.where(scale > 0, np.abs(rows - cols) / scale, 0.0)
        return err

    def worst_imbalance(self) -> tuple[str, float]:
        """Account with the largest relative imbalance and that error."""
        if self.size == 0:
            return "", 0.0
        err = self.balance_errors()
        i = int(np.argmax(err))
        return self.accounts[i].code, float(err[i])

    def equals(self, other: "SamTable") -> bool:
        """Exact equality of accounts and flows."""
        return self.accounts == other.accounts and np.array_equal(self.flows, other.flows)

    def to_frame(self) -> Any:
        """Flows as a labelled pandas DataFrame (rows = receivers)."""
        import pandas as pd

        return pd.DataFrame(self.flows, index=self.codes, columns=self.codes)


class PartnerMode(BaseModel):
    """How a trading partner is represented in a country SAM.

    Attributes:
        partner: Country code
        mode: "aggregated" (one row and column) or "disaggregated" (one per sector)
    """

    partner: str
    mode: str = Field(default="aggregated", pattern=r"^(aggregated|disaggregated)$")

    @field_validator("mode", mode="before")
    @classmethod
    def normalise_mode(cls, v: str) -> str:
        aliases = {"agg": "aggregated", "dis": "disaggregated", "disagg": "disaggregated"}
        v = str(v).strip().lower()
        return aliases.get(v, v)

    @property
    def disaggregated(self) -> bool:
        return self.mode == "disaggregated"


class CountrySamSpec(BaseModel):
    """Which country to extract and how its partners are represented.

    Attributes:
        home: Home country code
        partners: Explicit partners with their modes
        residual_name: Label of the rest-of-world lump
        population: Population recorded in the extracted SAM
        active_population: Active population recorded in the extracted SAM
        unit_scale: Currency per table unit (FIGARO: millions)
        year: Reference year
    """

    home: str
    partners: list[PartnerMode] = Field(default_factory=list)
    residual_name: str = "RoW"
    population: float = 0.0
    active_population: float = 0.0
    unit_scale: float = 1e6
    year: int | None = None

    @model_validator(mode="after")
    def partners_are_valid(self) -> "CountrySamSpec":
        names = [p.partner for p in self.partners]
        if len(set(names)) != len(names):
            raise ValueError("Partners must be distinct")
        if self.home in names:
            raise ValueError(f"Country {self.home} cannot be its own partner")
        return self

    @classmethod
    def parse_partners(cls, text: str) -> list[PartnerMode]:
        """Parse a partner list such as "FR:dis,DE:agg,US:agg"."""
        partners = []
        for item in filter(None, (t.strip() for t in text.split(","))):
            code, _, mode = item.partition(":")
            partners.append(PartnerMode(partner=code.strip(), mode=mode or "aggregated"))
        return partners


class IcioTable(BaseModel):
    """Inter-country input-output table in FIGARO layout.

    The full labelled matrix is kept as read; tensor views are derived from it.

    Attributes:
        corner_label: Text of the top-left header cell
        row_labels: Row labels (COUNTRY_SECTOR, plus value-added rows)
        col_labels: Column labels (COUNTRY_SECTOR, plus final-demand columns)
        matrix: Numeric body
        countries: Countries in order of first appearance among industry rows
        sectors: Sector codes in order of first appearance
        fd_categories: Final-demand category codes in order of first appearance
        va_codes: Value-added row codes (label without the pseudo-country prefix)
    """

    corner_label: str = ""
    row_labels: list[str]
    col_labels: list[str]
    matrix: np.ndarray
    countries: list[str]
    sectors: list[str]
    fd_categories: list[str]
    va_codes: list[str]

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def dimensions_are_consistent(self) -> "IcioTable":
        if self.matrix.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError(
                f"Matrix shape {self.matrix.shape} does not match "
                f"{len(self.row_labels)} row and {len(self.col_labels)} column labels"
            )
        return self

    def _row_index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.row_labels)}

    def _col_index(self) -> dict[str, int]:
        return {label: j for j, label in enumerate(self.col_labels)}

    @property
    def z(self) -> np.ndarray:
        """Intermediate use, indexed (origin country, origin sector, dest country, dest sector)."""
        rows, cols = self._row_index(), self._col_index()
        nc, ns = len(self.countries), len(self.sectors)
        out = np.zeros((nc, ns, nc, ns))
        for a, ca in enumerate(self.countries):
            for s, sa in enumerate(self.sectors):
                i = rows.get(f"{ca}_{sa}")
                if i is None:
                    continue
                for b, cb in enumerate(self.countries):
                    for t, sb in enumerate(self.sectors):
                        j = cols.get(f"{cb}_{sb}")
                        if j is not None:
                            out[a, s, b, t] = self.matrix[i, j]
        return out

    @property
    def final_demand(self) -> np.ndarray:
        """Final demand, indexed (origin country, origin sector, dest country, category)."""
        rows, cols = self._row_index(), self._col_index()
        nc, ns, nf = len(self.countries), len(self.sectors), len(self.fd_categories)
        out = np.zeros((nc, ns, nc, nf))
        for a, ca in enumerate(self.countries):
            for s, sa in enumerate(self.sectors):
                i = rows.get(f"{ca}_{sa}")
                if i is None:
                    continue
                for b, cb in enumerate(self.countries):
                    for f, cat in enumerate(self.fd_categories):
                        j = cols.get(f"{cb}_{cat}")
                        if j is not None:
                            out[a, s, b, f] = self.matrix[i, j]
        return out

    @property
    def output(self) -> np.ndarray:
        """Gross output per (country, sector): row totals of industry rows."""
        rows = self._row_index()
        out = np.zeros((len(self.countries), len(self.sectors)))
        for a, c in enumerate(self.countries):
            for s, sec in enumerate(self.sectors):
                i = rows.get(f"{c}_{sec}")
                if i is not None:
                    out[a, s] = self.matrix[i].sum()
        return out

    def value_added_rows(self) -> list[int]:
        """Row positions of value-added and tax rows."""
        industry = {f"{c}_{s}" for c in self.countries for s in self.sectors}
        return [i for i, label in enumerate(self.row_labels) if label not in industry]

    def va_code_of_row(self, i: int) -> str:
        return self.row_labels[i].split("_", 1)[1]


class ScaledTargets(BaseModel):
    """Monthly agent-economy targets derived from a SAM.

    Attributes:
        sam: Source table (unscaled)
        n_active: Number of active agents
        factor: Agent scale factor f = n_active / active_population
        base_units_per_currency: Integer money units per currency unit
        annual: Scaled annual flows in matrix units (flows x factor)
        monthly: Scaled monthly flows in money base units (float), same layout as the SAM
        coefficients: Column coefficients (each column divided by its total; 0 for empty columns)
        annual_wage: Assumed annual wage per worker, in currency
        monthly_wage: Monthly wage per worker in money base units
        employment: Employment target per producer account (fractional workers)
        reference_price: Money base units per good unit at deployment
    """

    sam: SamTable
    n_active: int
    factor: float
    base_units_per_currency: int
    annual: np.ndarray
    monthly: np.ndarray
    coefficients: np.ndarray
    annual_wage: float
    monthly_wage: int
    employment: np.ndarray
    reference_price: float

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def producers(self) -> list[int]:
        return self.sam.indices_of(AccountKind.PRODUCER)

    @property
    def codes(self) -> list[str]:
        return self.sam.codes

    def kind(self, i: int) -> AccountKind:
        return self.sam.accounts[i].kind

    def first_of(self, kind: AccountKind) -> int | None:
        found = self.sam.indices_of(kind)
        return found[0] if found else None

    def monthly_flow(self, row: int, col: int) -> float:
        return float(self.monthly[row, col])

    def column_total(self, col: int) -> float:
        return float(self.monthly[:, col].sum())

    def gross_output(self) -> np.ndarray:
        """Monthly gross output target per producer (base units), in producer order."""
        return np.array([self.monthly[:, p].sum() for p in self.producers])

    def final_demand(self, kind: AccountKind) -> np.ndarray:
        """Monthly purchases of each producer's output by all final-consumer columns of `kind`."""
        cols = self.sam.indices_of(kind)
        return np.array([self.monthly[p, cols].sum() for p in self.producers])

    def labor_coefficient(self, producer: int) -> float:
        labor = self.sam.indices_of(AccountKind.LABOR)
        return float(self.coefficients[labor, producer].sum()) if labor else 0.0

    def productivity(self, producer: int) -> float:
        """Monthly output units per worker at the reference price (inf without labor input)."""
        coef = self.labor_coefficient(producer)
        if coef <= 0:
            return float("inf")
        return self.monthly_wage / (coef * self.reference_price)
