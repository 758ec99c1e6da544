"""Lockstep multi-country runs.

Every member country is a full single-country economy. Months advance in
lockstep: all members simulate month m on their own worker, then the month-end
trade messages are routed and consumed in month m + 1. Each member owns its
random generator, so results do not depend on the number of workers.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

from deployers.errors import DeployersError, WorldError
from deployers.models.reports import StepReport
from deployers.models.tables import AccountKind, CountrySamSpec, IcioTable
from deployers.models.world import TradeMessage, WorldConfig
from deployers.services.deployment import (
    calibrate_kappa_step,
    consumption_error,
    consumption_totals,
    deviation_report,
    detect_steady_state,
    has_activity_targets,
    set_kappa,
    steady_series,
)
from deployers.services.economy import CountryState, build_country_state
from deployers.services.engine import step_month
from deployers.services.extraction import extract_country_sam, external_account_partner
from deployers.services.targets import scale_to_agents

StepResult = tuple[CountryState, StepReport, list[TradeMessage]]


@dataclass
class WorldState:
    """Member states plus the messages waiting for the next month.

    Attributes:
        config: World configuration
        states: Member states in member order
        mailboxes: Messages each member consumes next month
        epoch: Lockstep months simulated so far
        reports: Monthly reports per member
    """

    config: WorldConfig
    states: dict[str, CountryState]
    mailboxes: dict[str, list[TradeMessage]] = field(default_factory=dict)
    epoch: int = 0
    reports: dict[str, list[StepReport]] = field(default_factory=dict)

    @property
    def members(self) -> list[str]:
        return [m.country for m in self.config.members]


def live_partners(state_codes: Sequence[str], kinds: Sequence[AccountKind], members: Sequence[str]) -> dict[int, str]:
    """External accounts whose partner is a simulated member."""
    partners: dict[int, str] = {}
    for i, (code, kind) in enumerate(zip(state_codes, kinds, strict=True)):
        if kind != AccountKind.EXTERNAL:
            continue
        partner, _ = external_account_partner(code)
        if partner in members:
            partners[i] = partner
    return partners


def build_world(icio: IcioTable, config: WorldConfig, logger: logging.Logger | None = None) -> WorldState:
    """Extract, scale and initialise every member country.

    Raises:
        DeployersError: Table errors of the first member whose SAM cannot be built
    """
    log = logger or logging.getLogger("deployers")
    members = [m.country for m in config.members]
    states: dict[str, CountryState] = {}
    for member in config.members:
        run = config.run_config_for(member.country)
        spec = CountrySamSpec(
            home=member.country,
            partners=member.partners,
            residual_name=config.residual_name,
            population=member.population or member.active_population,
            active_population=member.active_population,
        )
        try:
            sam = extract_country_sam(icio, spec, run.labor_share, run.balance_tol)
            targets = scale_to_agents(
                sam,
                run.n_active,
                run.engine.min_active,
                run.engine.base_units_per_currency,
                run.engine.reference_price,
            )
        except DeployersError as e:
            log.error(f"{member.country}: cannot build targets: {e}")
            raise
        others = [c for c in members if c != member.country]
        partners = live_partners(sam.codes, [a.kind for a in sam.accounts], others)
        states[member.country] = build_country_state(targets, run, name=member.country, partners=partners)
        log.info(f"{member.country}: {sam.size} accounts, {len(partners)} live partner accounts")
    return WorldState(config=config, states=states, mailboxes={c: [] for c in members}, reports={c: [] for c in members})


def route_messages(outboxes: dict[str, list[TradeMessage]], world: WorldState) -> dict[str, list[TradeMessage]]:
    """Deliver month-end messages to next month's mailboxes.

    Deliveries are aggregated when the receiver holds the sender aggregated.
    Messages to the residual rest of the world are absorbed.

    Raises:
        WorldError: A message addressed to a country that is not a member
    """
    members = world.members
    mailboxes: dict[str, list[TradeMessage]] = {c: [] for c in members}
    for sender in members:
        for msg in outboxes.get(sender, []):
            if msg.receiver == world.config.residual_name:
                continue
            if msg.receiver not in mailboxes:
                raise WorldError(f"message addressed to non-member {msg.receiver}", sender)
            mode = world.config.member(msg.receiver).mode_of(sender)
            mailboxes[msg.receiver].append(msg.aggregated() if mode == "aggregated" else msg)
    return mailboxes


class WorldRunner:
    """Steps all members in lockstep on a thread pool."""

    def __init__(self, world: WorldState, workers: int | None = None, logger: logging.Logger | None = None) -> None:
        """Initialize runner.

        Args:
            world: World to advance
            workers: Worker threads (default: from the world configuration)
            logger: Logger instance (optional)
        """
        self.world = world
        self.workers = world.config.workers if workers is None else workers
        self.logger = logger or logging.getLogger("deployers")
        if self.workers < 1:
            raise WorldError(f"workers must be at least 1, got {self.workers}")

    def _step_member(self, country: str) -> StepResult:
        state = self.world.states[country]
        return step_month(state, self.world.mailboxes.get(country, []))

    def step(self) -> dict[str, StepReport]:
        """Advance every member by one month and route the messages.

        Raises:
            WorldError: Naming the member whose month failed
        """
        members = self.world.members
        results: dict[str, StepResult] = {}
        if self.workers == 1:
            for country in members:
                try:
                    results[country] = self._step_member(country)
                except Exception as e:
                    raise WorldError(f"month {self.world.epoch} failed: {e}", country) from e
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                future_to_country = {executor.submit(self._step_member, c): c for c in members}
                for future in as_completed(future_to_country):
                    country = future_to_country[future]
                    try:
                        results[country] = future.result()
                    except Exception as e:
                        raise WorldError(f"month {self.world.epoch} failed: {e}", country) from e

        outboxes = {c: results[c][2] for c in members}
        self.world.mailboxes = route_messages(outboxes, self.world)
        reports = {c: results[c][1] for c in members}
        for country, report in reports.items():
            self.world.reports[country].append(report)
        self.world.epoch += 1
        return reports

    def run(self, months: int, on_month: Callable[[dict[str, StepReport]], None] | None = None) -> WorldState:
        """Free run of all members for `months` lockstep months."""
        for state in self.world.states.values():
            state.assisted = False
        self.logger.info(f"World run: {len(self.world.states)} countries, {months} months, {self.workers} workers")
        for _ in range(months):
            reports = self.step()
            if on_month:
                on_month(reports)
        return self.world

    def deploy(self) -> dict[str, bool]:
        """Lockstep deployment and calibration of the members marked for it.

        Members not marked for deployment keep stepping in assisted mode so
        their trade messages keep flowing. Returns convergence per member.
        """
        deploying = [
            m.country for m in self.world.config.members if m.deploy and has_activity_targets(self.world.states[m.country])
        ]
        for state in self.world.states.values():
            state.assisted = True
        converged = {c: True for c in self.world.members}
        if not deploying:
            return converged

        pending = set(deploying)
        max_months = max(self.world.config.member(c).deployment.max_deploy_months for c in deploying)
        for _ in range(max_months):
            self.step()
            for country in sorted(pending):
                cfg = self.world.config.member(country).deployment
                state = self.world.states[country]
                if len(state.recorder.history) >= cfg.match_window and deviation_report(
                    state, cfg.match_window
                ).within(cfg.match_tol):
                    pending.discard(country)
                    self.logger.info(f"{country}: deployment converged at month {state.month}")
            if not pending:
                break
        for country in pending:
            converged[country] = False
            self.logger.warning(f"{country}: deployment did not converge")

        pending = set(deploying)
        max_months = max(self.world.config.member(c).deployment.max_calib_months for c in deploying)
        for _ in range(max_months):
            self.step()
            for country in sorted(pending):
                cfg = self.world.config.member(country).deployment
                state = self.world.states[country]
                kappa, _ = calibrate_kappa_step(
                    state.config.household.kappa, *consumption_totals(state), cfg.kappa_adjust_gain
                )
                set_kappa(state, kappa)
                steady = detect_steady_state(steady_series(state), cfg.steady_window, cfg.steady_tol, cfg.steady_floor)
                if steady and abs(consumption_error(state)) <= cfg.match_tol:
                    pending.discard(country)
                    self.logger.info(f"{country}: calibration settled at kappa={kappa:.4f}")
            if not pending:
                break
        for country in pending:
            converged[country] = False
            self.logger.warning(f"{country}: calibration did not settle")
        return converged


def run_world(
    world: WorldState,
    months: int | None = None,
    workers: int | None = None,
    deploy: bool = False,
    logger: logging.Logger | None = None,
) -> WorldState:
    """Optionally deploy, then free-run the world."""
    runner = WorldRunner(world, workers, logger)
    if deploy:
        runner.deploy()
    return runner.run(world.config.months if months is None else months)
