"""Survey of simulated activity and input-output analytics.

The survey rebuilds a SAM from the recorder, in the units and account set of the
source table, so it can be compared cell by cell with the table it was deployed
from.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from deployers.errors import AnalysisError
from deployers.models.reports import DeviationReport, PotentialRule, StepReport, SurveyReport
from deployers.models.tables import AccountKind, SamTable
from deployers.services.economy import CountryState
from deployers.services.engine import output_gap
from deployers.services.targets import MONTHS_PER_YEAR

logger = logging.getLogger(__name__)

DEFAULT_WEALTH_BINS = 20


# --- survey -----------------------------------------------------------------------


def survey_sam(state: CountryState, window: int) -> SamTable:
    """Annualised SAM of the last `window` months in source-table units.

    Monthly base-unit aggregates are averaged, multiplied by 12 and divided by the
    agent scale factor, so a deployment that meets its targets reproduces the
    source table.

    Raises:
        AnalysisError: If the window exceeds the recorded history
    """
    try:
        total = state.recorder.window(window)
    except ValueError as e:
        raise AnalysisError(str(e)) from e
    targets = state.targets
    sam = targets.sam
    money_per_unit = sam.unit_scale * targets.base_units_per_currency
    annual = total.astype(float) / window * MONTHS_PER_YEAR / money_per_unit / targets.factor
    return sam.model_copy(
        update={
            "name": f"{sam.name}_SIM",
            "flows": annual,
            "declared_row_sums": None,
            "declared_col_sums": None,
        }
    )


def ratio_report(sim: SamTable, target: SamTable) -> np.ndarray:
    """100 * sim / target per cell; NaN where the target is zero.

    Raises:
        AnalysisError: If the account sets differ
    """
    if sim.codes != target.codes:
        raise AnalysisError("simulated and target SAMs have different accounts")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(target.flows != 0, 100.0 * sim.flows / np.where(target.flows != 0, target.flows, 1.0), np.nan)


def ratio_frame(ratio: np.ndarray, codes: Sequence[str]) -> pd.DataFrame:
    """Ratio matrix with account labels; zero-target cells are blank (NaN)."""
    return pd.DataFrame(np.round(ratio, 1), index=list(codes), columns=list(codes))


# --- input-output analytics -------------------------------------------------------


@dataclass(frozen=True)
class LeontiefResult:
    """Technical coefficients, Leontief inverse and output multipliers.

    Attributes:
        codes: Producer account codes
        a: Technical coefficient matrix
        inverse: (I - A)^-1
        multipliers: Column sums of the inverse
    """

    codes: list[str]
    a: np.ndarray
    inverse: np.ndarray
    multipliers: np.ndarray


def leontief_multipliers(sam: SamTable) -> LeontiefResult:
    """Output multipliers of the producer block.

    A divides the producer-by-producer flows by each column's gross output (the
    full column total).

    Raises:
        AnalysisError: Spectral radius of A at or above 1, or a singular I - A
    """
    producers = sam.indices_of(AccountKind.PRODUCER)
    if not producers:
        raise AnalysisError(f"{sam.name} has no producer accounts")
    block = sam.flows[np.ix_(producers, producers)]
    gross = sam.flows[:, producers].sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(gross != 0, block / np.where(gross != 0, gross, 1.0), 0.0)
    return leontief_inverse(a, [sam.codes[p] for p in producers])


def leontief_inverse(a: np.ndarray, codes: Sequence[str] | None = None) -> LeontiefResult:
    """Leontief inverse of a coefficient matrix by dense solve.

    Raises:
        AnalysisError: Spectral radius of A at or above 1, or a singular I - A
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    radius = float(np.max(np.abs(np.linalg.eigvals(a)))) if n else 0.0
    if radius >= 1.0:
        raise AnalysisError(f"spectral radius of A is {radius:.6f}; the Leontief inverse does not exist")
    try:
        inverse = np.linalg.solve(np.eye(n) - a, np.eye(n))
    except np.linalg.LinAlgError as e:
        raise AnalysisError(f"I - A is singular: {e}") from e
    labels = list(codes) if codes is not None else [str(i) for i in range(n)]
    return LeontiefResult(codes=labels, a=a, inverse=inverse, multipliers=inverse.sum(axis=0))


# --- wealth -----------------------------------------------------------------------


def wealth_histogram(
    values: Sequence[float], bins: int, value_range: tuple[float, float] | None = None
) -> tuple[list[float], list[int]]:
    """Bin edges and counts of a wealth sample."""
    if bins < 1:
        raise AnalysisError(f"bins must be at least 1, got {bins}")
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=value_range)
    return edges.tolist(), counts.astype(int).tolist()


def wealth_distribution(state: CountryState, bins: int = DEFAULT_WEALTH_BINS) -> tuple[list[float], list[int], float]:
    """Histogram and sample skewness of household wealth (cash, deposits and shares)."""
    values = state.share_values()
    wealth = pd.Series([h.wealth(values) for h in state.households], dtype=float)
    edges, counts = wealth_histogram(wealth.tolist(), bins)
    skew = wealth.skew() if len(wealth) > 2 else 0.0
    return edges, counts, float(0.0 if pd.isna(skew) else skew)


def survey_report(state: CountryState, window: int, bins: int = DEFAULT_WEALTH_BINS) -> SurveyReport:
    """Survey SAM, ratio to the source table, series and wealth distribution."""
    sim = survey_sam(state, window)
    edges, counts, skew = wealth_distribution(state, bins)
    logger.info(f"{state.name}: survey over {window} months at month {state.month}")
    return SurveyReport(
        window=window,
        sim_sam=sim,
        ratio=ratio_report(sim, state.targets.sam),
        reports=list(state.reports),
        wealth_bins=edges,
        wealth_counts=counts,
        wealth_skewness=skew,
    )


# --- frames -----------------------------------------------------------------------


def series_frame(reports: Sequence[StepReport], rule: PotentialRule = PotentialRule.EMPLOYMENT) -> pd.DataFrame:
    """One row per month with the scalar report fields and per-sector output."""
    rows = []
    gaps = output_gap(reports, rule)
    for report, gap in zip(reports, gaps, strict=True):
        row = {
            "month": report.month,
            "total_output": report.total_output,
            "real_output": report.real_output,
            "potential_output": report.potential_output,
            "output_gap": gap,
            "gdp_income": report.gdp_income,
            "gdp_expenditure": report.gdp_expenditure,
            "consumption": report.consumption,
            "unemployment_rate": report.unemployment_rate,
            "n_firms": report.n_firms,
            "new_firms": report.new_firms,
            "closed_firms": report.closed_firms,
            "credit_issued": report.credit_issued,
            "share_trades": report.share_trades,
            "recapitalisations": report.recapitalisations,
            "price_index": report.price_index,
            "government_balance": report.government_balance,
            "inventory_value": report.inventory_value,
            "mean_wealth": report.mean_wealth,
            "kappa": report.kappa,
            "exports": sum(report.exports.values()),
            "imports": sum(report.imports.values()),
            "audit_drift": report.audit_drift,
        }
        row.update({f"output_{code}": value for code, value in report.gross_output.items()})
        rows.append(row)
    return pd.DataFrame(rows)


def long_series_frame(reports: Sequence[StepReport]) -> pd.DataFrame:
    """Plot-ready long format: month, series, value."""
    wide = series_frame(reports)
    if wide.empty:
        return pd.DataFrame(columns=["month", "series", "value"])
    return wide.melt(id_vars="month", var_name="series", value_name="value")


def deviation_frame(report: DeviationReport) -> pd.DataFrame:
    return pd.DataFrame(
        [row.model_dump() for row in report.rows], columns=["metric", "account", "target", "actual", "error"]
    )


def sam_frame(sam: SamTable) -> pd.DataFrame:
    return sam.to_frame()  # type: ignore[no-any-return]


def world_summary_frame(series: dict[str, Sequence[StepReport]]) -> pd.DataFrame:
    """Per-country monthly GDP, output, unemployment and trade in long format."""
    rows = [
        {
            "country": country,
            "month": r.month,
            "gdp": r.gdp_income,
            "total_output": r.total_output,
            "unemployment_rate": r.unemployment_rate,
            "exports": sum(r.exports.values()),
            "imports": sum(r.imports.values()),
        }
        for country, reports in series.items()
        for r in reports
    ]
    return pd.DataFrame(rows, columns=["country", "month", "gdp", "total_output", "unemployment_rate", "exports", "imports"])
