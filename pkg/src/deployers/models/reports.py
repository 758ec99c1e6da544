"""Report models produced by the engine, controllers and the survey."""

from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from deployers.models.tables import SamTable


class StepReport(BaseModel):
    """Summary of one simulated month. Money in base units.

    Attributes:
        month: Absolute month index
        gross_output: Sales per producer account code
        real_output: Units produced, valued at the reference price
        potential_output: Output at full employment with the current sector mix
        consumption: Household spending on goods
        unemployment_rate: Unemployed share of the active population
        n_firms: Firms alive at month end
        new_firms: Firms opened this month
        closed_firms: Firms closed this month
        credit_issued: New loan principal
        share_trades: Clearing-house trades
        recapitalisations: Government capital injected into undercapitalised banks
        price_index: Laspeyres goods price index (reference prices = 1)
        gdp_income: Value added (wages, surplus, production and product taxes)
        gdp_expenditure: Final demand plus product taxes on it, minus imported inputs
        exports: Interface-firm purchases from domestic producers, per partner
        imports: Import supply received by interface firms, per partner
        exports_by_sector: Exports per partner and domestic product
        imports_by_sector: Import supply per partner and partner product
        import_shortfall: Orders of this country each partner reported it could not fill
        government_balance: Government account at the central bank
        mean_wealth: Mean household wealth
        kappa: Household consumption sensitivity in force
        audit_drift: Net financial assets minus issued base money
    """

    month: int
    gross_output: dict[str, int] = Field(default_factory=dict)
    real_output: float = 0.0
    potential_output: float = 0.0
    consumption: int = 0
    unemployment_rate: float = 0.0
    n_firms: int = 0
    new_firms: int = 0
    closed_firms: int = 0
    credit_issued: int = 0
    share_trades: int = 0
    recapitalisations: int = 0
    price_index: float = 1.0
    gdp_income: int = 0
    gdp_expenditure: int = 0
    exports: dict[str, int] = Field(default_factory=dict)
    imports: dict[str, int] = Field(default_factory=dict)
    exports_by_sector: dict[str, list[int]] = Field(default_factory=dict)
    imports_by_sector: dict[str, list[int]] = Field(default_factory=dict)
    import_shortfall: dict[str, int] = Field(default_factory=dict)
    government_balance: int = 0
    inventory_value: float = 0.0
    mean_wealth: float = 0.0
    kappa: float = 0.0
    audit_drift: int = 0

    @property
    def total_output(self) -> int:
        return sum(self.gross_output.values())

    @property
    def output_gap(self) -> float:
        return self.real_output - self.potential_output


class PotentialRule(StrEnum):
    """How potential output is measured.

    EMPLOYMENT: capacity of the active population at full employment with the
    month's sector mix of employment. PEAK: highest real output observed so far.
    """

    EMPLOYMENT = "employment"
    PEAK = "peak"


class DeviationRow(BaseModel):
    """One compared quantity.

    Attributes:
        metric: gross_output, final_demand, intermediate or unemployment
        account: Account code (row/column pair for final demand)
        target: Monthly target
        actual: Monthly mean over the comparison window
        error: Relative error (absolute rate for unemployment)
    """

    metric: str
    account: str
    target: float
    actual: float
    error: float


class DeviationReport(BaseModel):
    """Per-quantity deviation from SAM targets, worst first."""

    month: int
    window: int
    rows: list[DeviationRow] = Field(default_factory=list)

    @property
    def worst(self) -> float:
        return max((r.error for r in self.rows), default=0.0)

    def within(self, tol: float) -> bool:
        return self.worst <= tol


class SurveyReport(BaseModel):
    """Annualised SAM rebuilt from recorded activity, compared with its target.

    Attributes:
        window: Months aggregated
        sim_sam: Simulated SAM in the target's units and account set
        ratio: 100 * sim / target per cell (NaN where the target is zero)
        reports: Monthly series the survey covers
        wealth_bins: Bin edges of the household wealth histogram
        wealth_counts: Households per bin
        wealth_skewness: Sample skewness of household wealth
    """

    window: int
    sim_sam: SamTable
    ratio: np.ndarray
    reports: list[StepReport] = Field(default_factory=list)
    wealth_bins: list[float] = Field(default_factory=list)
    wealth_counts: list[int] = Field(default_factory=list)
    wealth_skewness: float = 0.0

    model_config = ConfigDict(arbitrary_types_allowed=True)
