"""Self-deployment and calibration controllers.

Deployment grows an economy from zero firms: final consumers are forced to spend
their monthly SAM values while households open firms where demand goes unmet and
unprofitable firms close. Calibration then keeps demand forced and tunes the
household consumption sensitivity until the economy settles.
"""

import logging
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import dill
import numpy as np

from deployers.errors import ConvergenceWarning
from deployers.models.config import DeploymentConfig
from deployers.models.reports import DeviationReport, DeviationRow
from deployers.models.tables import AccountKind
from deployers.services.economy import CountryState
from deployers.services.engine import free_consumption, step_month
from deployers.services.rules import adjust_kappa

logger = logging.getLogger(__name__)


@dataclass
class DeploymentResult:
    """Outcome of a controller run.

    Attributes:
        state: Final (or best) state
        months: Months simulated by the controller
        converged: Whether the stopping criterion was met
        deviation: Deviation from targets of the returned state
        kappa_path: Kappa after each calibration month
    """

    state: CountryState
    months: int
    converged: bool
    deviation: DeviationReport
    kappa_path: list[float] = field(default_factory=list)


# --- diagnostics ------------------------------------------------------------------


def _relative(actual: float, target: float) -> float:
    return abs(actual - target) / abs(target)


def deviation_report(state: CountryState, window: int) -> DeviationReport:
    """Compare mean monthly activity over the last `window` months with targets.

    Gross output is compared per producer, final demand per cell of the
    households, government, GFCF and external columns, intermediate consumption
    per producer column, and unemployment as an absolute rate difference.
    Zero-target quantities are skipped.
    """
    sam = state.targets.sam
    target = state.targets.monthly
    codes = sam.codes
    window = min(window, len(state.recorder.history))
    rows: list[DeviationRow] = []
    if window > 0:
        mean = state.recorder.window(window) / window
        producers = sam.indices_of(AccountKind.PRODUCER)
        inputs = sam.indices_of(AccountKind.PRODUCER, AccountKind.EXTERNAL)
        finals = sam.indices_of(
            AccountKind.HOUSEHOLDS, AccountKind.GOVERNMENT, AccountKind.GFCF, AccountKind.EXTERNAL
        )
        for p in producers:
            t = float(target[p, :].sum())
            if t != 0:
                a = float(mean[p, :].sum())
                rows.append(DeviationRow(metric="gross_output", account=codes[p], target=t, actual=a, error=_relative(a, t)))
        for p in producers:
            for c in finals:
                t = float(target[p, c])
                if t != 0:
                    a = float(mean[p, c])
                    rows.append(
                        DeviationRow(
                            metric="final_demand", account=f"{codes[p]}/{codes[c]}", target=t, actual=a,
                            error=_relative(a, t),
                        )
                    )
        for p in producers:
            t = float(target[inputs, p].sum())
            if t != 0:
                a = float(mean[inputs, p].sum())
                rows.append(DeviationRow(metric="intermediate", account=codes[p], target=t, actual=a, error=_relative(a, t)))
    if state.reports:
        recent = state.reports[-max(window, 1):]
        actual = float(np.mean([r.unemployment_rate for r in recent]))
        t = target_unemployment(state)
        rows.append(DeviationRow(metric="unemployment", account="", target=t, actual=actual, error=abs(actual - t)))
    rows.sort(key=lambda r: -r.error)
    return DeviationReport(month=state.month, window=window, rows=rows)


def target_unemployment(state: CountryState) -> float:
    employed = float(np.sum(state.targets.employment))
    return max(0.0, 1.0 - employed / state.n_active) if state.n_active else 0.0


def has_activity_targets(state: CountryState) -> bool:
    """Whether any producer has a nonzero row or column in the targets."""
    m = state.targets.monthly
    return any(np.any(m[p, :] != 0) or np.any(m[:, p] != 0) for p in state.targets.producers)


def detect_steady_state(
    series: Mapping[str, Sequence[float]], window: int, tol: float, floor: float = 1.0
) -> bool:
    """True when every series is flat over its last `window` values.

    A series is flat when the least-squares slope times the window length is
    within `tol` of its mean magnitude (never less than `floor`). Series shorter
    than the window are never steady.
    """
    if window < 2:
        raise ValueError(f"window must be at least 2, got {window}")
    x = np.arange(window, dtype=float)
    for name, values in series.items():
        if len(values) < window:
            return False
        y = np.asarray(values[-window:], dtype=float)
        slope = np.polyfit(x, y, 1)[0]
        scale = max(abs(float(np.mean(y))), floor)
        if abs(slope) * window > tol * scale:
            logger.debug(f"{name} not steady: slope {slope:.3g} over {window} months")
            return False
    return True


def steady_series(state: CountryState) -> dict[str, list[float]]:
    return {
        "inventory": [r.inventory_value for r in state.reports],
        "unemployment": [r.unemployment_rate for r in state.reports],
        "gross_output": [float(r.total_output) for r in state.reports],
    }


# --- deployment -------------------------------------------------------------------


def run_deployment(
    state: CountryState,
    config: DeploymentConfig | None = None,
    logger: logging.Logger | None = None,
) -> DeploymentResult:
    """Grow firms under forced final demand until activity matches the targets.

    On non-convergence the best state seen (smallest worst deviation) is returned
    and a ConvergenceWarning is issued.
    """
    cfg = config or state.config.deployment
    log = logger or logging.getLogger("deployers")
    state.assisted = True
    if not has_activity_targets(state):
        log.info(f"{state.name}: no producer activity in the targets, deployment is immediate")
        return DeploymentResult(state, 0, True, deviation_report(state, cfg.match_window))

    log.info(f"{state.name}: deployment started ({cfg.max_deploy_months} months max)")
    best: bytes | None = None
    best_error = math.inf
    report = deviation_report(state, cfg.match_window)
    for month in range(1, cfg.max_deploy_months + 1):
        step_month(state)
        if len(state.recorder.history) < cfg.match_window:
            continue
        report = deviation_report(state, cfg.match_window)
        if report.worst < best_error:
            best_error = report.worst
            best = dill.dumps(state)
        if report.within(cfg.match_tol):
            log.info(f"{state.name}: deployment converged after {month} months ({len(state.firms)} firms)")
            return DeploymentResult(state, month, True, report)

    message = (
        f"{state.name}: deployment did not converge in {cfg.max_deploy_months} months "
        f"(best worst deviation {best_error:.3f})"
    )
    log.warning(message)
    warnings.warn(message, ConvergenceWarning, stacklevel=2)
    if best is not None:
        state = dill.loads(best)
        report = deviation_report(state, cfg.match_window)
    return DeploymentResult(state, cfg.max_deploy_months, False, report)


# --- calibration ------------------------------------------------------------------


def consumption_totals(state: CountryState) -> tuple[float, float]:
    """Buffer-stock consumption of all households and their monthly goods target."""
    h = state.account_of(AccountKind.HOUSEHOLDS)
    if h is None:
        return 0.0, 0.0
    target = float(sum(state.targets.monthly[g, h] for g in state.goods_accounts()))
    values = state.share_values()
    total = sum(free_consumption(state, hh, values) for hh in state.households)
    return total, target


def consumption_error(state: CountryState) -> float:
    """Relative gap between buffer-stock consumption and the households' goods target."""
    total, target = consumption_totals(state)
    return (total - target) / target if target > 0 else 0.0


def calibrate_kappa_step(kappa: float, free_total: float, target_total: float, gain: float) -> tuple[float, float]:
    """One feedback step on kappa.

    Returns:
        The new kappa and the relative consumption error it responded to
    """
    error = (free_total - target_total) / target_total if target_total > 0 else 0.0
    return adjust_kappa(kappa, error, gain), error


def set_kappa(state: CountryState, kappa: float) -> None:
    household = state.config.household.model_copy(update={"kappa": kappa})
    state.config = state.config.model_copy(update={"household": household})


def run_calibration(
    state: CountryState,
    config: DeploymentConfig | None = None,
    logger: logging.Logger | None = None,
) -> DeploymentResult:
    """Hold demand at SAM levels and adjust kappa until the economy is steady.

    Steadiness is tested on inventory value, unemployment and gross output; the
    consumption rule must also match the households' goods target within
    `match_tol`. Targets are never modified.
    """
    cfg = config or state.config.deployment
    log = logger or logging.getLogger("deployers")
    state.assisted = True
    kappa_path: list[float] = []
    if not has_activity_targets(state):
        return DeploymentResult(state, 0, True, deviation_report(state, cfg.match_window), kappa_path)

    def settled() -> bool:
        steady = detect_steady_state(steady_series(state), cfg.steady_window, cfg.steady_tol, cfg.steady_floor)
        return steady and abs(consumption_error(state)) <= cfg.match_tol

    if settled():
        log.info(f"{state.name}: already steady, calibration skipped")
        return DeploymentResult(state, 0, True, deviation_report(state, cfg.match_window), kappa_path)

    log.info(f"{state.name}: calibration started at kappa={state.config.household.kappa:.4f}")
    for month in range(1, cfg.max_calib_months + 1):
        step_month(state)
        kappa, _ = calibrate_kappa_step(state.config.household.kappa, *consumption_totals(state), cfg.kappa_adjust_gain)
        set_kappa(state, kappa)
        kappa_path.append(kappa)
        if settled():
            log.info(f"{state.name}: calibration converged after {month} months at kappa={kappa:.4f}")
            return DeploymentResult(state, month, True, deviation_report(state, cfg.match_window), kappa_path)

    message = f"{state.name}: calibration did not reach a steady state in {cfg.max_calib_months} months"
    log.warning(message)
    warnings.warn(message, ConvergenceWarning, stacklevel=2)
    return DeploymentResult(state, cfg.max_calib_months, False, deviation_report(state, cfg.match_window), kappa_path)


def deploy_and_calibrate(
    state: CountryState,
    config: DeploymentConfig | None = None,
    logger: logging.Logger | None = None,
) -> tuple[DeploymentResult, DeploymentResult]:
    """Run both controller stages back to back."""
    deployed = run_deployment(state, config, logger)
    calibrated = run_calibration(deployed.state, config, logger)
    return deployed, calibrated
