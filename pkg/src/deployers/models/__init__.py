"""Model exports for Deployers package."""

from deployers.models.config import DeploymentConfig, RunConfig, ScenarioOverride
from deployers.models.reports import DeviationReport, StepReport, SurveyReport
from deployers.models.tables import AccountKind, IcioTable, SamTable, ScaledTargets
from deployers.models.world import TradeMessage, WorldConfig

__all__ = [
    "AccountKind",
    "DeploymentConfig",
    "DeviationReport",
    "IcioTable",
    "RunConfig",
    "SamTable",
    "ScaledTargets",
    "ScenarioOverride",
    "StepReport",
    "SurveyReport",
    "TradeMessage",
    "WorldConfig",
]
