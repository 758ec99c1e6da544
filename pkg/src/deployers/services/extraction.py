"""Country SAM extraction from an inter-country input-output table.

The extraction first builds a fully disaggregated country SAM in which every
foreign (country, sector) pair has its own import row and export column, closes
the institutional accounts, and only then sums the accounts of aggregated
partners and of the residual countries. Aggregating by plain block summation
keeps aggregated and disaggregated extractions exactly additive.
"""

import logging

import numpy as np

from deployers.errors import ExtractionError, ScalingError
from deployers.models.config import LaborShareRule
from deployers.models.tables import AccountId, AccountKind, CountrySamSpec, IcioTable, SamTable
from deployers.services.sam_format import check_balance

logger = logging.getLogger(__name__)

# Final-demand categories and the SAM column that pays for them. Anything else
# (inventories, valuables) is folded into GFCF.
FD_CATEGORY_KINDS = {
    "P3_S13": AccountKind.GOVERNMENT,
    "P3_S14": AccountKind.HOUSEHOLDS,
    "P3_S15": AccountKind.HOUSEHOLDS,
    "P51G": AccountKind.GFCF,
    "P5M": AccountKind.GFCF,
}

# Value-added rows with a direct SAM counterpart. Other rows are split into
# labor and surplus with the labor-share rule.
VA_ROW_KINDS = {
    "D1": AccountKind.LABOR,
    "B2A3G": AccountKind.SURPLUS,
    "D29X39": AccountKind.TAX_PRODUCTION,
    "D21X31": AccountKind.TAX_PRODUCTS,
}

_INSTITUTIONS = (
    (AccountKind.LABOR, "Labor"),
    (AccountKind.SURPLUS, "GrossOpSurplus"),
    (AccountKind.TAX_PRODUCTION, "TaxProduction"),
    (AccountKind.TAX_PRODUCTS, "TaxProducts"),
    (AccountKind.TAX_INCOME, "TaxIncome"),
    (AccountKind.GOVERNMENT, "Government"),
    (AccountKind.HOUSEHOLDS, "Households"),
)


def split_value_added(va: float, rule: LaborShareRule, sector: str) -> tuple[float, float]:
    """Split value added into (labor, surplus) with the sector's labor share.

    Raises:
        ScalingError: If the share is outside [0, 1]
    """
    alpha = rule.share(sector)
    if not 0.0 <= alpha <= 1.0:
        raise ScalingError(f"Labor share {alpha} for sector {sector} is outside [0, 1]")
    labor = alpha * va
    return labor, va - labor


def extract_country_sam(
    icio: IcioTable,
    spec: CountrySamSpec,
    va_split: LaborShareRule | None = None,
    balance_tol: float = 1e-3,
) -> SamTable:
    """Extract the SAM of one country with its partners aggregated or disaggregated.

    Args:
        icio: Inter-country table
        spec: Home country, partner modes and metadata for the result
        va_split: Labor-share rule for value-added rows without a labor/surplus split
        balance_tol: Relative tolerance of the balance check of the result

    Returns:
        Balanced SamTable

    Raises:
        ExtractionError: Unknown country or negative labor/surplus after the split
        TableBalanceError: If the result is not balanced within tolerance
    """
    rule = va_split or LaborShareRule()
    if spec.home not in icio.countries:
        raise ExtractionError(f"Home country {spec.home} is not in the table")
    for partner in spec.partners:
        if partner.partner not in icio.countries:
            raise ExtractionError(f"Partner {partner.partner} is not in the table")

    full, layout = _disaggregated_matrix(icio, spec.home, rule)
    _close_accounts(full, layout)

    groups, accounts = _groups(icio, spec, layout)
    flows = aggregate_blocks(full, groups)

    table = SamTable(
        name=f"{spec.home}_ICIO",
        region=spec.home,
        year=spec.year,
        population=spec.population,
        active_population=spec.active_population,
        unit_scale=spec.unit_scale,
        currency="EUR",
        accounts=accounts,
        flows=flows,
    )
    check_balance(table, balance_tol)
    residual = "yes" if any(a.code.endswith(f"_{spec.residual_name}") for a in accounts) else "no"
    logger.info(
        f"Extracted {spec.home} SAM: {table.size} accounts ({len(spec.partners)} partners, residual {residual})"
    )
    return table


def aggregate_blocks(matrix: np.ndarray, groups: list[list[int]]) -> np.ndarray:
    """Sum a square matrix over account groups, columns first then rows."""
    by_col = np.stack([matrix[:, g].sum(axis=1) for g in groups], axis=1)
    return np.stack([by_col[g, :].sum(axis=0) for g in groups], axis=0)


def external_account_partner(code: str) -> tuple[str, str | None]:
    """Partner and sector encoded in an extracted external account code.

    "X05_FR_C10T12" -> ("FR", "C10T12"); "X09_DE" -> ("DE", None).
    """
    _, _, rest = code.partition("_")
    partner, _, sector = rest.partition("_")
    return partner, sector or None


class _Layout:
    """Positions of the accounts in the fully disaggregated matrix."""

    def __init__(self, icio: IcioTable, home: str) -> None:
        self.sectors = icio.sectors
        self.foreign = [c for c in icio.countries if c != home]
        ns = len(self.sectors)
        self.gfcf = ns
        self.first_foreign = ns + 1
        base = self.first_foreign + len(self.foreign) * ns
        self.inst = {kind: base + k for k, (kind, _) in enumerate(_INSTITUTIONS)}
        self.size = base + len(_INSTITUTIONS)

    def foreign_account(self, country_pos: int, sector: int) -> int:
        return self.first_foreign + country_pos * len(self.sectors) + sector

    def final_column(self, category: str) -> int:
        kind = FD_CATEGORY_KINDS.get(category, AccountKind.GFCF)
        return self.gfcf if kind == AccountKind.GFCF else self.inst[kind]


def _disaggregated_matrix(icio: IcioTable, home: str, rule: LaborShareRule) -> tuple[np.ndarray, _Layout]:
    layout = _Layout(icio, home)
    ns = len(icio.sectors)
    h = icio.countries.index(home)
    z = icio.z
    fd = icio.final_demand
    m = np.zeros((layout.size, layout.size))

    m[:ns, :ns] = z[h, :, h, :]
    for f, category in enumerate(icio.fd_categories):
        m[:ns, layout.final_column(category)] += fd[h, :, h, f]

    for pos, country in enumerate(layout.foreign):
        a = icio.countries.index(country)
        for s in range(ns):
            acc = layout.foreign_account(pos, s)
            m[acc, :ns] = z[a, s, h, :]
            m[:ns, acc] = z[h, :, a, s]
            for f, category in enumerate(icio.fd_categories):
                m[acc, layout.final_column(category)] += fd[a, s, h, f]
                # Partner final demand for home product s is booked in export column s.
                m[s, acc] += fd[h, s, a, f]

    cols = {label: j for j, label in enumerate(icio.col_labels)}
    for r in icio.value_added_rows():
        code = icio.va_code_of_row(r)
        for j, sector in enumerate(icio.sectors):
            value = icio.matrix[r, cols[f"{home}_{sector}"]]
            _route_value_added(m, layout, code, value, j, rule, sector)
        for category in icio.fd_categories:
            j = cols.get(f"{home}_{category}")
            if j is not None and icio.matrix[r, j] != 0:
                _route_value_added(
                    m, layout, code, icio.matrix[r, j], layout.final_column(category), rule, category
                )

    labor, surplus = layout.inst[AccountKind.LABOR], layout.inst[AccountKind.SURPLUS]
    for j, sector in enumerate(icio.sectors):
        if m[labor, j] < 0 or m[surplus, j] < 0:
            raise ExtractionError(
                f"Value-added split gives negative labor ({m[labor, j]:.6g}) or surplus "
                f"({m[surplus, j]:.6g}) for sector {sector}"
            )
    return m, layout


def _route_value_added(
    m: np.ndarray, layout: _Layout, code: str, value: float, col: int, rule: LaborShareRule, sector: str
) -> None:
    kind = VA_ROW_KINDS.get(code)
    if kind is not None:
        m[layout.inst[kind], col] += value
        return
    labor, surplus = split_value_added(value, rule, sector)
    m[layout.inst[AccountKind.LABOR], col] += labor
    m[layout.inst[AccountKind.SURPLUS], col] += surplus


def _close_accounts(m: np.ndarray, layout: _Layout) -> None:
    """Balance external, factor, tax, government and household accounts in place.

    GFCF is left to balance by the accounting identity of the whole table.
    """
    f = layout.gfcf
    for acc in range(layout.first_foreign, layout.inst[AccountKind.LABOR]):
        imports, exports = m[acc, :].sum(), m[:, acc].sum()
        m[f, acc] += imports
        m[acc, f] += exports

    inst = layout.inst
    gov, hh, income_tax = inst[AccountKind.GOVERNMENT], inst[AccountKind.HOUSEHOLDS], inst[AccountKind.TAX_INCOME]
    m[hh, inst[AccountKind.LABOR]] += m[inst[AccountKind.LABOR], :].sum()
    m[hh, inst[AccountKind.SURPLUS]] += m[inst[AccountKind.SURPLUS], :].sum()
    for kind in (AccountKind.TAX_PRODUCTION, AccountKind.TAX_PRODUCTS):
        m[gov, inst[kind]] += m[inst[kind], :].sum()

    fiscal = m[gov, :].sum() - m[:, gov].sum()
    if fiscal >= 0:
        m[hh, gov] += fiscal
    else:
        m[income_tax, hh] += -fiscal
        m[gov, income_tax] += -fiscal

    saving = m[hh, :].sum() - m[:, hh].sum()
    if saving >= 0:
        m[f, hh] += saving
    else:
        m[hh, f] += -saving


def _groups(icio: IcioTable, spec: CountrySamSpec, layout: _Layout) -> tuple[list[list[int]], list[AccountId]]:
    groups: list[list[int]] = []
    named: list[tuple[str, AccountKind]] = []
    for j, sector in enumerate(icio.sectors):
        groups.append([j])
        named.append((f"P_{sector}", AccountKind.PRODUCER))
    groups.append([layout.gfcf])
    named.append(("F_GFCF", AccountKind.GFCF))

    ns = len(icio.sectors)
    listed = set()
    for partner in spec.partners:
        pos = layout.foreign.index(partner.partner)
        listed.add(partner.partner)
        accounts = [layout.foreign_account(pos, s) for s in range(ns)]
        if partner.disaggregated:
            for s, acc in zip(range(ns), accounts, strict=True):
                groups.append([acc])
                named.append((f"X_{partner.partner}_{icio.sectors[s]}", AccountKind.EXTERNAL))
        else:
            groups.append(accounts)
            named.append((f"X_{partner.partner}", AccountKind.EXTERNAL))
    residual = [
        layout.foreign_account(pos, s)
        for pos, country in enumerate(layout.foreign)
        if country not in listed
        for s in range(ns)
    ]
    if residual:
        groups.append(residual)
        named.append((f"X_{spec.residual_name}", AccountKind.EXTERNAL))

    for kind, label in _INSTITUTIONS:
        groups.append([layout.inst[kind]])
        named.append((f"{_prefix(kind)}_{label}", kind))

    accounts = [
        AccountId(code=f"{code[0]}{n:02d}{code[1:]}", kind=kind)
        for n, (code, kind) in enumerate(named, start=1)
    ]
    return groups, accounts


def _prefix(kind: AccountKind) -> str:
    if kind.is_tax:
        return "T"
    return {
        AccountKind.LABOR: "L",
        AccountKind.SURPLUS: "K",
        AccountKind.GOVERNMENT: "G",
        AccountKind.HOUSEHOLDS: "H",
    }[kind]
