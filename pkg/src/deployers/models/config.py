"""Configuration models for runs, agents and controllers."""

import hashlib
import json
from typing import Any, Literal

from pydantic import BaseModel, Field, field_validator, model_validator


class HouseholdParams(BaseModel):
    """Household behaviour.

    Attributes:
        kappa: Sensitivity of consumption to the wealth buffer gap
        phi: Target buffer in months of income
        beta_logit: Price sensitivity of the logit sector choice
        deposit_fraction: Share of surplus kept as deposits (the rest buys shares)
        endowment_months: Initial cash in months of the average wage
        income_window: Months in the trailing income average
    """

    kappa: float = Field(default=0.1, ge=0.0, le=1.0)
    phi: float = Field(default=3.0, ge=0.0)
    beta_logit: float = Field(default=1.0, ge=0.0)
    deposit_fraction: float = Field(default=0.8, ge=0.0, le=1.0)
    endowment_months: float = Field(default=3.0, ge=0.0)
    income_window: int = Field(default=12, gt=0)


class FirmParams(BaseModel):
    """Firm behaviour, entry and exit.

    Attributes:
        lambda_inv: Inventory cover in months of mean demand
        demand_window: Months in the demand average
        payout_ratio: Share of after-tax profit paid as dividends
        p_open: Maximum monthly probability that a household opens a firm
        loss_window: Consecutive loss months that close a firm
        equity_floor: Equity below which a firm closes
        seed_months: Seed money of a new firm in months of the average wage
        capital_fraction: Share of the seed money spent on fixed capital
        technology: Production technology
        sector_cap_factor: Multiplier of the per-sector firm cap
        ic_competition: Whether missing intermediate inputs limit free-run production
        cash_buffer_months: Working capital kept, in months of planned costs; retained
            earnings above it are paid out
    """

    lambda_inv: float = Field(default=1.5, gt=0.0)
    demand_window: int = Field(default=3, gt=0)
    payout_ratio: float = Field(default=0.5, ge=0.0, le=1.0)
    p_open: float = Field(default=0.05, ge=0.0, le=1.0)
    loss_window: int = Field(default=6, gt=0)
    equity_floor: float = 0.0
    seed_months: float = Field(default=1.0, ge=0.0)
    capital_fraction: float = Field(default=0.5, ge=0.0, le=1.0)
    technology: Literal["leontief", "cobb_douglas"] = "leontief"
    sector_cap_factor: float = Field(default=1.0, gt=0.0)
    ic_competition: bool = True
    cash_buffer_months: float = Field(default=2.0, ge=0.0)


class RiskParams(BaseModel):
    """Probability-of-default pricing of loans.

    PD = 1 - exp(-rho * D/E); rate = base_rate + mu * PD.
    """

    rho: float = Field(default=0.1, ge=0.0)
    mu: float = Field(default=0.05, ge=0.0)


class BankParams(BaseModel):
    """Banks and central bank."""

    car: float = Field(default=0.08, ge=0.0, le=1.0)
    rrr: float = Field(default=0.02, ge=0.0, le=1.0)
    base_rate: float = Field(default=0.02, ge=0.0)
    deposit_rate: float = Field(default=0.0, ge=0.0)
    loan_term: int = Field(default=12, gt=0)
    risk: RiskParams = Field(default_factory=RiskParams)
    min_net_worth_months: float = Field(default=24.0, ge=0.0)
    max_banks: int = Field(default=3, ge=0)
    p_found: float = Field(default=0.02, ge=0.0, le=1.0)
    capital_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    initial_banks: int = Field(default=1, ge=0)
    initial_equity_months: float = Field(default=1.0, ge=0.0)
    payout_ratio: float = Field(default=0.5, ge=0.0, le=1.0)


class GovernmentParams(BaseModel):
    """Fiscal policy levels (totals come from the SAM)."""

    subsidy_fraction: float = Field(default=0.5, ge=0.0)


class MarketParams(BaseModel):
    """Goods price rule and the clearing-house stock market."""

    eps: float = Field(default=0.01, gt=0.0, lt=1.0)
    listing_threshold_years: float = Field(default=20.0, ge=0.0)
    issue_fraction: float = Field(default=0.2, ge=0.0)
    initial_shares: int = Field(default=1000, gt=0)
    share_sell_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    order_jitter: float = Field(default=0.02, ge=0.0, lt=1.0)
    purchase_attempts: int = Field(default=10, gt=0)


class GridParams(BaseModel):
    """Spatial layout."""

    radius: int = Field(default=2, ge=0)
    width: int | None = Field(default=None, gt=0)
    height: int | None = Field(default=None, gt=0)


class EngineParams(BaseModel):
    """Engine mechanics."""

    days_per_month: int = Field(default=21, gt=0)
    base_units_per_currency: int = Field(default=100, gt=0)
    reference_price: float = Field(default=100.0, gt=0.0)
    history_months: int = Field(default=36, gt=0)
    keep_postings: bool = False
    min_active: int = Field(default=200, gt=0)
    audit_every_month: bool = True


class DeploymentConfig(BaseModel):
    """Deployment and calibration controller settings.

    Attributes:
        max_deploy_months: Upper bound of the deployment stage
        max_calib_months: Upper bound of the calibration stage
        match_tol: Relative tolerance of SAM targets (unemployment: absolute rate)
        steady_window: Window length of the steady-state test
        steady_tol: Relative slope tolerance of the steady-state test
        kappa_adjust_gain: Gain of the multiplicative kappa feedback
        match_window: Months averaged when comparing activity to targets
        steady_floor: Lower bound on the series magnitude in the steady-state test
    """

    max_deploy_months: int = Field(default=120, gt=0)
    max_calib_months: int = Field(default=120, gt=0)
    match_tol: float = Field(default=0.1, gt=0.0, lt=1.0)
    steady_window: int = Field(default=24, gt=1)
    steady_tol: float = Field(default=0.01, gt=0.0)
    kappa_adjust_gain: float = Field(default=0.5, gt=0.0)
    match_window: int = Field(default=3, gt=0)
    steady_floor: float = Field(default=1.0, gt=0.0)


class LaborShareRule(BaseModel):
    """Labor share of value added per sector.

    Attributes:
        default: Share used for sectors without an override
        overrides: Per-sector shares
    """

    default: float = 0.5
    overrides: dict[str, float] = Field(default_factory=dict)

    def share(self, sector: str) -> float:
        return self.overrides.get(sector, self.default)


class InputPaths(BaseModel):
    """Input tables (local paths or http(s) URLs).

    Attributes:
        sam: SAM file
        figaro: FIGARO table to extract `country` from
        country: Home country of the extraction
        partners: Partner list such as "FR:dis,DE:agg"
        population: Population recorded in the extracted SAM
        active_population: Active population of the extracted SAM
    """

    sam: str | None = None
    figaro: str | None = None
    country: str | None = None
    partners: str | None = None
    population: float = Field(default=0.0, ge=0.0)
    active_population: float = Field(default=0.0, ge=0.0)


class RunConfig(BaseModel):
    """Root configuration of a run; the single canonical configuration artifact."""

    version: str = Field(default="1.0", pattern=r"^\d+\.\d+$")
    seed: int = 1
    n_active: int = Field(default=2000, gt=0)
    balance_tol: float = Field(default=1e-3, gt=0.0)
    household: HouseholdParams = Field(default_factory=HouseholdParams)
    firm: FirmParams = Field(default_factory=FirmParams)
    bank: BankParams = Field(default_factory=BankParams)
    government: GovernmentParams = Field(default_factory=GovernmentParams)
    market: MarketParams = Field(default_factory=MarketParams)
    grid: GridParams = Field(default_factory=GridParams)
    engine: EngineParams = Field(default_factory=EngineParams)
    deployment: DeploymentConfig = Field(default_factory=DeploymentConfig)
    labor_share: LaborShareRule = Field(default_factory=LaborShareRule)
    inputs: InputPaths = Field(default_factory=InputPaths)
    output_dir: str = "./output"

    @model_validator(mode="after")
    def population_is_viable(self) -> "RunConfig":
        if self.n_active < self.engine.min_active:
            raise ValueError(
                f"n_active={self.n_active} is below the minimum viable population "
                f"{self.engine.min_active}"
            )
        return self

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, assignments: dict[str, Any]) -> "RunConfig":
        """Return a copy with dotted-path assignments applied and re-validated."""
        data = self.model_dump(mode="json")
        for dotted, value in assignments.items():
            set_dotted(data, dotted, value)
        return RunConfig.model_validate(data)

    model_config = {
        "extra": "forbid",
        "json_schema_extra": {
            "examples": [
                {
                    "version": "1.0",
                    "seed": 1,
                    "n_active": 2000,
                    "inputs": {"sam": "data/mcaesp08.sam"},
                    "household": {"kappa": 0.1, "phi": 3.0},
                }
            ]
        },
    }


def set_dotted(data: dict[str, Any], dotted: str, value: Any) -> None:
    """Assign value at a dotted key path inside nested dictionaries.

    Raises:
        KeyError: If an intermediate key does not exist
    """
    parts = dotted.split(".")
    node = data
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise KeyError(dotted)
        node = node[part]
    if parts[-1] not in node:
        raise KeyError(dotted)
    node[parts[-1]] = value


class ScenarioOverride(BaseModel):
    """A parameter change taking effect at a given month of a free run.

    Keys: ``tax.<AccountCode>.scale`` (multiplies every coefficient of that tax
    row), ``bank.base_rate``, ``government.subsidy_fraction``,
    ``household.kappa``, ``household.phi``, ``firm.ic_competition``.
    """

    key: str
    value: float
    month: int = Field(default=0, ge=0)

    @field_validator("key")
    @classmethod
    def key_not_empty(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("override key must not be empty")
        return v.strip()
