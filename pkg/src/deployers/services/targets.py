"""Scaling of a SAM to an agent economy of a given size."""

import logging

import numpy as np
import pandas as pd

from deployers.errors import ScalingError
from deployers.models.tables import AccountKind, SamTable, ScaledTargets

logger = logging.getLogger(__name__)

MONTHS_PER_YEAR = 12


def scale_to_agents(
    sam: SamTable,
    n_active: int,
    min_active: int = 200,
    base_units_per_currency: int = 100,
    reference_price: float = 100.0,
) -> ScaledTargets:
    """Derive monthly agent-economy targets from an annual SAM.

    Args:
        sam: Source table
        n_active: Number of active agents to simulate
        min_active: Minimum viable population
        base_units_per_currency: Integer money units per currency unit
        reference_price: Deployment-time price of every good, in base units

    Returns:
        ScaledTargets

    Raises:
        ScalingError: Population too small, no active population, or a producer
            column whose entries cancel out to a zero total
    """
    if n_active < min_active:
        raise ScalingError(f"n_active={n_active} is below the minimum viable population {min_active}")
    if sam.active_population <= 0:
        raise ScalingError(f"SAM {sam.name} declares no active population")

    flows = sam.flows
    col_sums = flows.sum(axis=0)
    for p in sam.indices_of(AccountKind.PRODUCER):
        if col_sums[p] == 0 and np.any(flows[:, p] != 0):
            raise ScalingError(f"Producer column {sam.accounts[p].code} has a zero sum")

    factor = n_active / sam.active_population
    money_per_unit = sam.unit_scale * base_units_per_currency
    annual = flows * factor
    monthly = annual * money_per_unit / MONTHS_PER_YEAR
    with np.errstate(divide="ignore", invalid="ignore"):
        coefficients = np.where(col_sums != 0, flows / np.where(col_sums != 0, col_sums, 1.0), 0.0)

    labor_rows = sam.indices_of(AccountKind.LABOR)
    labor_by_col = flows[labor_rows, :].sum(axis=0) if labor_rows else np.zeros(sam.size)
    labor_total = float(labor_by_col.sum())
    annual_wage = labor_total * sam.unit_scale / sam.active_population
    monthly_wage = round(annual_wage * base_units_per_currency / MONTHS_PER_YEAR)

    producers = sam.indices_of(AccountKind.PRODUCER)
    if labor_total > 0:
        # labor_s * f * unit_scale / annual_wage
        employment = np.array([labor_by_col[p] * factor / (labor_total / sam.active_population) for p in producers])
    else:
        employment = np.zeros(len(producers))

    logger.debug(f"Scaled {sam.name} to {n_active} agents: f={factor:.3e}, annual wage {annual_wage:.2f} {sam.currency}")
    return ScaledTargets(
        sam=sam,
        n_active=n_active,
        factor=factor,
        base_units_per_currency=base_units_per_currency,
        annual=annual,
        monthly=monthly,
        coefficients=coefficients,
        annual_wage=annual_wage,
        monthly_wage=monthly_wage,
        employment=employment,
        reference_price=reference_price,
    )


def targets_frame(targets: ScaledTargets) -> pd.DataFrame:
    """Per-producer diagnostic table of monthly targets (money in base units)."""
    producers = targets.producers
    codes = [targets.codes[p] for p in producers]
    frame = pd.DataFrame(
        {
            "account": codes,
            "gross_output": targets.gross_output(),
            "employment": targets.employment,
            "labor_coefficient": [targets.labor_coefficient(p) for p in producers],
            "final_households": targets.final_demand(AccountKind.HOUSEHOLDS),
            "final_government": targets.final_demand(AccountKind.GOVERNMENT),
            "final_external": targets.final_demand(AccountKind.EXTERNAL),
            "final_gfcf": targets.final_demand(AccountKind.GFCF),
        }
    )
    frame["factor"] = targets.factor
    frame["monthly_wage"] = targets.monthly_wage
    return frame
