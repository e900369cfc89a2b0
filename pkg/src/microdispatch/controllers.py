"""Real-time controllers and the rolling day-ahead/hourly simulation loop.

Each controller maps the current plant state and today's data to a dispatch
setpoint; what slice of the day a controller may read encodes its
information set (the clairvoyant MPC sees the whole remaining day, everyone
else only the current hour). `run_simulation` drives the two-stage protocol:
a commitment fixed at each midnight, then one controller decision and one
plant step per hour, with coupling state carried across days.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from microdispatch.dispatch import (
    FORECAST,
    PERFECT,
    STOCHASTIC,
    ExtractionError,
    RealTimeContext,
    build_realtime,
    extract_setpoint,
    solve_day_ahead,
)
from microdispatch.domain import (
    HOURS_PER_DAY,
    Commitment,
    CommittedHour,
    DayProfile,
    DispatchSetpoint,
    MicrogridConfig,
    MicrogridState,
    StepOutcome,
    TariffSchedule,
    advance_state,
    clamp_dg,
    step_plant,
)
from microdispatch.forecasting import LoadPvForecaster
from microdispatch.milp import SolveStatus, solve_milp
from microdispatch.scenarios import ScenarioSet

RULE_BASED = "rule-based"
MPC_PERFECT = "mpc-perfect"
MPC_FORECAST = "mpc-forecast"
MPC_STOCHASTIC = "mpc-stochastic"
DRL = "drl"
CONTROLLER_KINDS = (RULE_BASED, MPC_PERFECT, MPC_FORECAST, MPC_STOCHASTIC, DRL)

#: how the midnight commitment's starting SOC is chosen; "contract-end" uses
#: the contracted end-of-day SOC so every controller shares one commitment,
#: "measured" uses the controller's own battery state
PLANNING_CONTRACT_END = "contract-end"
PLANNING_MEASURED = "measured"


class ControllerError(RuntimeError):
    """Fatal controller failure (solver breakdown, missing artifacts)."""


class SimulationAborted(RuntimeError):
    """Carries the partial report accumulated before a fatal error."""

    def __init__(self, message: str, partial_report):
        super().__init__(message)
        self.partial_report = partial_report


def rule_based_decide(state: MicrogridState, load_kw: float, pv_kw: float,
                      committed: CommittedHour, config: MicrogridConfig) -> DispatchSetpoint:
    """Cycle-charging hysteresis on the battery SOC.

    The generator starts when the SOC falls to the start threshold and runs
    at 75% of nameplate, trimmed down when the battery cannot absorb the
    surplus and pushed up when the hour's requirement exceeds it; it begins
    its stop sequence once the SOC recovers to the stop threshold. The ESS
    picks up whatever residual remains.
    """
    requirement = load_kw - pv_kw - (committed.grid_buy_kw - committed.grid_sell_kw)

    dg_request = 0.0
    stop_flag = False
    if state.dg_on:
        if state.soc_kwh >= config.dg_stop_soc:
            # stop sequence: ramp toward zero, flag the stop once reachable
            if state.dg_prev_kw <= config.dg_shutdown_ramp:
                dg_request, stop_flag = 0.0, True
            else:
                dg_request = state.dg_prev_kw - config.dg_ramp_down
        else:
            dg_request = _cycle_charge_target(state, requirement, committed, config)
    elif state.soc_kwh <= config.dg_start_soc:
        dg_request = _cycle_charge_target(state, requirement, committed, config)

    probe = DispatchSetpoint(dg_kw=max(dg_request, 0.0), dg_stop=stop_flag)
    dg_applied, _, started, stopped = clamp_dg(state, probe, config)

    residual = requirement - dg_applied
    return DispatchSetpoint(
        dg_kw=dg_applied,
        ess_discharge_kw=max(residual, 0.0),
        ess_charge_kw=max(-residual, 0.0),
        dg_start=started,
        dg_stop=stopped,
    )


def _cycle_charge_target(state, requirement, committed, config):
    target = 0.75 * config.dg_power_max
    if requirement > target:
        return requirement
    surplus = target - max(requirement, 0.0)
    absorb = min(config.ess_power_cap - committed.reserve_up_kw,
                 (config.ess_energy_max - state.soc_kwh) / config.eta_charge)
    absorb = max(absorb, 0.0)
    if surplus > absorb:
        target = max(requirement, 0.0) + absorb
    return target


class RuleBasedController:
    kind = RULE_BASED

    def decide(self, state, day: DayProfile, commitment: Commitment,
               tariff: TariffSchedule, config: MicrogridConfig) -> DispatchSetpoint:
        h = state.hour_of_day
        return rule_based_decide(state, float(day.load_kw[h]), float(day.pv_kw[h]),
                                 commitment.hour(h), config)


class MpcController:
    """Rolling-horizon MPC in perfect, forecast, or stochastic mode.

    Perfect mode reads the remaining day clairvoyantly; forecast mode reads
    only the current hour and extends it with the held forecaster (which it
    also feeds); stochastic mode substitutes the current hour into the
    scenario heads. Infeasible windows are re-solved with an elastic balance
    whose first-hour slack will surface as a plant blackout.
    """

    def __init__(self, mode: str, forecaster: LoadPvForecaster | None = None,
                 scenarios: ScenarioSet | None = None):
        if mode not in (PERFECT, FORECAST, STOCHASTIC):
            raise ControllerError(f"unknown MPC mode {mode!r}")
        self.mode = mode
        self.kind = {PERFECT: MPC_PERFECT, FORECAST: MPC_FORECAST,
                     STOCHASTIC: MPC_STOCHASTIC}[mode]
        self.forecaster = forecaster
        self.scenarios = scenarios
        if mode == FORECAST and forecaster is None:
            raise ControllerError("forecast mode needs a warmed-up forecaster")
        if mode == STOCHASTIC and scenarios is None:
            raise ControllerError("stochastic mode needs a real-time scenario set")

    def decide(self, state, day: DayProfile, commitment: Commitment,
               tariff: TariffSchedule, config: MicrogridConfig) -> DispatchSetpoint:
        h = state.hour_of_day
        hours = HOURS_PER_DAY - h
        load_now = float(day.load_kw[h])
        pv_now = float(day.pv_kw[h])

        if self.mode == PERFECT:
            ctx = RealTimeContext(state=state, start_hour=h, hours=hours,
                                  commitment=commitment,
                                  load_kw=day.load_kw[h:], pv_kw=day.pv_kw[h:])
        elif self.mode == FORECAST:
            self.forecaster = self.forecaster.observe(h, load_now, pv_now)
            load_fc, pv_fc = self.forecaster.forecast_profile(h, hours)
            load_fc = load_fc.copy()
            pv_fc = pv_fc.copy()
            load_fc[0] = load_now
            pv_fc[0] = pv_now
            ctx = RealTimeContext(state=state, start_hour=h, hours=hours,
                                  commitment=commitment,
                                  load_kw=load_fc, pv_kw=pv_fc)
        else:
            ctx = RealTimeContext(state=state, start_hour=h, hours=hours,
                                  commitment=commitment, scenarios=self.scenarios,
                                  measured_load_kw=load_now, measured_pv_kw=pv_now)

        solution = solve_milp(build_realtime(ctx, tariff, config, self.mode))
        if solution.status is not SolveStatus.OPTIMAL:
            solution = solve_milp(build_realtime(ctx, tariff, config, self.mode,
                                                 elastic=True))
        if solution.status is not SolveStatus.OPTIMAL:
            raise ControllerError(
                f"{self.kind}: window solve failed even with elastic balance "
                f"({solution.status.value})")
        return extract_setpoint(solution, config)


@dataclass(frozen=True)
class HourRecord:
    day_index: int
    state: MicrogridState
    setpoint: DispatchSetpoint
    outcome: StepOutcome
    decision_seconds: float


@dataclass
class SimulationReport:
    """Full ledger of one controller's run plus the derived aggregates."""

    controller: str
    dg_unit_cost: float = 0.65
    records: list[HourRecord] = field(default_factory=list)
    commitments: list[Commitment] = field(default_factory=list)

    @property
    def hours(self) -> int:
        return len(self.records)

    @property
    def step_costs(self) -> np.ndarray:
        return np.array([r.outcome.step_cost for r in self.records])

    @property
    def daily_costs(self) -> np.ndarray:
        costs = self.step_costs
        days = self.hours // HOURS_PER_DAY
        return costs[:days * HOURS_PER_DAY].reshape(days, HOURS_PER_DAY).sum(axis=1)

    @property
    def total_cost(self) -> float:
        return float(self.step_costs.sum())

    @property
    def average_hourly_cost(self) -> float:
        return self.total_cost / self.hours

    @property
    def average_hourly_dg_cost(self) -> float:
        dg_kwh = sum(r.outcome.ledger.dg_kw for r in self.records)
        return self.dg_unit_cost * dg_kwh / self.hours

    @property
    def blackout_count(self) -> int:
        return sum(1 for r in self.records if r.outcome.blackout)

    @property
    def curtailed_kwh(self) -> float:
        return float(sum(r.outcome.curtailed_kw for r in self.records))

    @property
    def mean_decision_seconds(self) -> float:
        return float(np.mean([r.decision_seconds for r in self.records]))

    def trajectory(self):
        return [(r.state, r.setpoint, r.outcome) for r in self.records]


@dataclass(frozen=True)
class SimulationOptions:
    initial_soc_kwh: float = 12500.0
    reset_soc_kwh: float | None = None
    planning_soc: str | float = PLANNING_CONTRACT_END
    initial_dg_kw: float = 0.0
    seed: int = 0


def _planning_soc_value(policy, state: MicrogridState, config: MicrogridConfig) -> float:
    if policy == PLANNING_MEASURED:
        return state.soc_kwh
    if policy == PLANNING_CONTRACT_END:
        return config.ess_energy_end
    return float(policy)


def run_simulation(controller, days, tariff: TariffSchedule, config: MicrogridConfig,
                   day_ahead_scenarios: ScenarioSet,
                   options: SimulationOptions = SimulationOptions(),
                   commitment_cache: dict | None = None) -> SimulationReport:
    """Drive one controller through consecutive days without algorithm resets.

    At each midnight the day-ahead program is solved from the planning SOC
    (cached per distinct value, so shared-commitment comparisons reuse one
    solve) and fixes the day's commitment; each hour the controller decides
    and the plant realizes. With `reset_soc_kwh` set, the battery state is
    forced to that value at every midnight; the generator state always
    carries over. Fatal controller errors raise SimulationAborted with the
    partial report attached.
    """
    if len(days) == 0:
        raise ValueError("empty dataset")
    report = SimulationReport(controller=getattr(controller, "kind", "unknown"),
                              dg_unit_cost=config.dg_unit_cost)
    cache = commitment_cache if commitment_cache is not None else {}

    state = MicrogridState(
        hour_of_day=0, soc_kwh=options.initial_soc_kwh,
        soc_midnight_kwh=options.initial_soc_kwh,
        dg_prev_kw=options.initial_dg_kw, dg_on=options.initial_dg_kw > 0)
    commitment = None

    for day_index, day in enumerate(days):
        if options.reset_soc_kwh is not None:
            # evaluation mode: pin the whole coupling state at midnight so
            # every controller faces the identical initial-value problem,
            # generator included (otherwise a pre-ramped generator can
            # legitimately undercut the clairvoyant optimum)
            state = MicrogridState(
                hour_of_day=0, soc_kwh=options.reset_soc_kwh,
                soc_midnight_kwh=options.reset_soc_kwh,
                dg_prev_kw=0.0, dg_on=False)
        planning_soc = _planning_soc_value(options.planning_soc, state, config)
        key = round(planning_soc, 6)
        if key not in cache:
            cache[key] = solve_day_ahead(day_ahead_scenarios, tariff,
                                         planning_soc, config)[0]
        commitment = cache[key]
        report.commitments.append(commitment)

        for hour in range(HOURS_PER_DAY):
            began = time.perf_counter()
            try:
                setpoint = controller.decide(state, day, commitment, tariff, config)
            except (ControllerError, ExtractionError) as exc:
                raise SimulationAborted(
                    f"{report.controller} failed at day {day_index} hour {hour}: {exc}",
                    report) from exc
            elapsed = time.perf_counter() - began
            outcome = step_plant(state, setpoint, commitment.hour(hour),
                                 float(day.load_kw[hour]), float(day.pv_kw[hour]),
                                 tariff.price(hour), config)
            report.records.append(HourRecord(day_index=day_index, state=state,
                                             setpoint=setpoint, outcome=outcome,
                                             decision_seconds=elapsed))
            state = advance_state(state, outcome)
    return report


def compare_controllers(controllers: dict, days, tariff: TariffSchedule,
                        config: MicrogridConfig, day_ahead_scenarios: ScenarioSet,
                        options: SimulationOptions = SimulationOptions()) -> dict:
    """Run several controllers over the same days with shared commitments.

    Returns {name: SimulationReport}; raises SimulationAborted on the first
    controller failure (its partial report attached).
    """
    cache: dict = {}
    reports = {}
    for name, controller in controllers.items():
        reports[name] = run_simulation(controller, days, tariff, config,
                                       day_ahead_scenarios, options,
                                       commitment_cache=cache)
    return reports
