"""Multi-country world configuration and trade messages."""

import hashlib
import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from deployers.models.config import DeploymentConfig, RunConfig
from deployers.models.tables import PartnerMode

Mode = Literal["aggregated", "disaggregated"]


class MemberConfig(BaseModel):
    """One simulated country.

    Attributes:
        country: Country code as used in the ICIO table
        seed: Seed of the country's random generator
        n_active: Active agents
        active_population: Active population of the real country (for scaling)
        population: Total population recorded in the extracted SAM
        partners: Partners represented explicitly, with their modes
        deployment: Deployment and calibration settings of this country
        deploy: Deploy and calibrate before the free run
    """

    country: str
    seed: int
    n_active: int = Field(default=500, gt=0)
    active_population: float = Field(gt=0.0)
    population: float = 0.0
    partners: list[PartnerMode] = Field(default_factory=list)
    deployment: DeploymentConfig = Field(default_factory=DeploymentConfig)
    deploy: bool = True

    def mode_of(self, partner: str) -> str | None:
        for p in self.partners:
            if p.partner == partner:
                return p.mode
        return None


class WorldConfig(BaseModel):
    """Root configuration of a multi-country run.

    Attributes:
        figaro: Path or URL of the inter-country table
        members: Simulated countries
        residual_name: Label of the rest-of-world account of every member
        months: Free-run months
        workers: Worker threads (results do not depend on it)
        run: Behavioural parameters shared by all members (seed and n_active are
            taken from each member)
    """

    figaro: str = ""
    members: list[MemberConfig]
    residual_name: str = "RoW"
    months: int = Field(default=12, ge=0)
    workers: int = Field(default=1, gt=0)
    run: RunConfig = Field(default_factory=RunConfig)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def partner_matrix_is_consistent(self) -> "WorldConfig":
        names = [m.country for m in self.members]
        if len(set(names)) != len(names):
            raise ValueError("Member countries must be distinct")
        seeds = [m.seed for m in self.members]
        if len(set(seeds)) != len(seeds):
            raise ValueError("Member seeds must be distinct")
        members = {m.country: m for m in self.members}
        for m in self.members:
            for p in m.partners:
                other = members.get(p.partner)
                if other is not None and other.mode_of(m.country) is None:
                    raise ValueError(
                        f"{m.country} lists {p.partner} as a partner but {p.partner} does not list {m.country}"
                    )
        return self

    def member(self, country: str) -> MemberConfig:
        for m in self.members:
            if m.country == country:
                return m
        raise KeyError(country)

    def run_config_for(self, country: str) -> RunConfig:
        """Shared run parameters with the member's seed, agent count and deployment settings."""
        m = self.member(country)
        return self.run.model_copy(update={"seed": m.seed, "n_active": m.n_active, "deployment": m.deployment})

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class TradeMessage(BaseModel):
    """Month-end trade message from one country to a partner.

    Attributes:
        sender: Sending country
        receiver: Receiving country
        month: Month the message was produced in (consumed in month + 1)
        sectors: Sender's product sectors
        order_mode: How the sender holds the receiver; export_orders has one entry
            per receiver product when disaggregated, a single entry otherwise
        delivery_mode: Resolution of import_deliveries (one entry per sender product
            when disaggregated)
        export_orders: Sender's imports from the receiver, to be exported by it
        import_deliveries: Sender's exports to the receiver, per sender product
        transfers: Settlement of the sender's import sales
        shortfall: Receiver orders the sender could not fill, at the resolution of
            import_deliveries (empty when everything was delivered)
    """

    sender: str
    receiver: str
    month: int = Field(ge=0)
    sectors: list[str]
    order_mode: Mode = "aggregated"
    delivery_mode: Mode = "disaggregated"
    export_orders: list[int]
    import_deliveries: list[int]
    transfers: int = Field(default=0, ge=0)
    shortfall: list[int] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def amounts_match_modes(self) -> "TradeMessage":
        if any(v < 0 for v in (*self.export_orders, *self.import_deliveries, *self.shortfall)):
            raise ValueError("Trade amounts must be nonnegative")
        n = len(self.sectors)
        if len(self.import_deliveries) != (n if self.delivery_mode == "disaggregated" else 1):
            raise ValueError(
                f"import_deliveries has {len(self.import_deliveries)} entries for delivery mode {self.delivery_mode}"
            )
        if len(self.export_orders) != (n if self.order_mode == "disaggregated" else 1):
            raise ValueError(
                f"export_orders has {len(self.export_orders)} entries for order mode {self.order_mode}"
            )
        if self.shortfall and len(self.shortfall) != len(self.import_deliveries):
            raise ValueError(
                f"shortfall has {len(self.shortfall)} entries for {len(self.import_deliveries)} deliveries"
            )
        return self

    def aggregated(self) -> "TradeMessage":
        """Copy with import deliveries and shortfall summed to a single entry."""
        if self.delivery_mode == "aggregated":
            return self
        return self.model_copy(
            update={
                "import_deliveries": [sum(self.import_deliveries)],
                "shortfall": [sum(self.shortfall)] if self.shortfall else [],
                "delivery_mode": "aggregated",
            }
        )
