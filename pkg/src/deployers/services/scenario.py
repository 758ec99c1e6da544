"""What-if runs from a calibrated state.

A scenario switches the economy to free mode (households follow the
buffer-stock rule, nothing is forced to SAM values), applies parameter overrides
at their effective months and steps the engine.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

from deployers.errors import ScenarioError
from deployers.models.config import ScenarioOverride
from deployers.models.reports import StepReport, SurveyReport
from deployers.services.analysis import survey_report
from deployers.services.economy import CountryState
from deployers.services.engine import step_month

SURVEY_MONTHS = 12

CONFIG_KEYS = {
    "government.subsidy_fraction": ("government", "subsidy_fraction"),
    "household.kappa": ("household", "kappa"),
    "household.phi": ("household", "phi"),
}


@dataclass
class ScenarioResult:
    """Reports of a scenario run.

    Attributes:
        state: State after the last month
        reports: One report per simulated month
        survey: Survey over the last months of history (None without history)
        applied: Overrides in the order they took effect
    """

    state: CountryState
    reports: list[StepReport]
    survey: SurveyReport | None
    applied: list[ScenarioOverride] = field(default_factory=list)


def _tax_account(state: CountryState, key: str) -> int:
    parts = key.split(".")
    if len(parts) != 3 or parts[2] != "scale":
        raise ScenarioError(f"unknown override key {key!r}")
    code = parts[1]
    sam = state.targets.sam
    if code not in sam.codes:
        raise ScenarioError(f"override {key!r}: {code} is not an account of {sam.name}")
    index = sam.codes.index(code)
    if not sam.accounts[index].kind.is_tax:
        raise ScenarioError(f"override {key!r}: {code} is not a tax account")
    return index


def validate_overrides(state: CountryState, overrides: Sequence[ScenarioOverride]) -> None:
    """Check every key before anything runs.

    Raises:
        ScenarioError: Unknown key, non-tax account or negative scale
    """
    for o in overrides:
        if o.key.startswith("tax."):
            _tax_account(state, o.key)
            if o.value < 0:
                raise ScenarioError(f"override {o.key!r}: scale must be nonnegative, got {o.value}")
        elif o.key not in CONFIG_KEYS and o.key not in ("bank.base_rate", "firm.ic_competition"):
            raise ScenarioError(f"unknown override key {o.key!r}")


def apply_override(state: CountryState, override: ScenarioOverride) -> None:
    """Apply one override to a live state.

    Raises:
        ScenarioError: Unknown key or a value the parameter rejects
    """
    key, value = override.key, override.value
    if key.startswith("tax."):
        state.tax_scale[_tax_account(state, key)] = value
        return
    config = state.config
    if key == "bank.base_rate":
        state.central_bank.base_rate = value
        section, name, new = "bank", "base_rate", value
    elif key == "firm.ic_competition":
        section, name, new = "firm", "ic_competition", value != 0
    elif key in CONFIG_KEYS:
        section, name = CONFIG_KEYS[key]
        new = value
    else:
        raise ScenarioError(f"unknown override key {key!r}")
    params = getattr(config, section)
    try:
        updated = type(params).model_validate({**params.model_dump(), name: new})
    except ValueError as e:
        raise ScenarioError(f"override {key!r}={value}: {e}") from e
    state.config = config.model_copy(update={section: updated})


def run_scenario(
    state: CountryState,
    overrides: Sequence[ScenarioOverride],
    months: int,
    logger: logging.Logger | None = None,
) -> ScenarioResult:
    """Free run of `months` months with overrides at their relative months.

    Override months count from the start of the scenario; month 0 applies before
    the first simulated month. With zero months the survey covers the state's
    existing history.

    Raises:
        ScenarioError: Unknown override key or negative month count
    """
    log = logger or logging.getLogger("deployers")
    if months < 0:
        raise ScenarioError(f"months must be nonnegative, got {months}")
    validate_overrides(state, overrides)
    for o in overrides:
        if o.month >= months > 0 or (months == 0 and o.month > 0):
            log.warning(f"Override {o.key} at month {o.month} is beyond the {months}-month horizon")

    state.assisted = False
    pending = sorted(overrides, key=lambda o: o.month)
    applied: list[ScenarioOverride] = []
    reports: list[StepReport] = []
    log.info(f"{state.name}: free run of {months} months from month {state.month}")
    for offset in range(months + 1):
        while pending and pending[0].month == offset:
            override = pending.pop(0)
            apply_override(state, override)
            applied.append(override)
            log.info(f"{state.name}: month {state.month}: {override.key} = {override.value}")
        if offset == months:
            break
        _, report, _ = step_month(state)
        reports.append(report)

    history = len(state.recorder.history)
    survey = survey_report(state, min(SURVEY_MONTHS, history)) if history else None
    return ScenarioResult(state=state, reports=reports, survey=survey, applied=applied)
