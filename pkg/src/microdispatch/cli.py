"""Command-line surface: data generation, training, dispatch, comparison.

Exit codes: 0 success, 1 usage error, 2 runtime/solver failure, 3 validation
failure. All file outputs are written atomically (temp file + rename).
Outputs are a pure function of flags, input files, and seeds, except for the
wall-clock timing columns, which are measurements by nature.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from microdispatch.controllers import (
    CONTROLLER_KINDS,
    DRL,
    MPC_FORECAST,
    MPC_PERFECT,
    MPC_STOCHASTIC,
    RULE_BASED,
    MpcController,
    RuleBasedController,
    SimulationAborted,
    SimulationOptions,
    run_simulation,
)
from microdispatch.dataio import (
    DataFormatError,
    SyntheticParams,
    generate_dataset,
    load_commitment,
    load_config,
    save_commitment,
    split_train_test,
    trailing_train_months,
    write_daywise_csv,
    write_profiles,
    write_report_json,
    write_summary_csv,
    write_trace_csv,
    read_profiles,
)
from microdispatch.dispatch import FORECAST, PERFECT, STOCHASTIC, solve_day_ahead
from microdispatch.domain import MicrogridConfig, TariffSchedule, validate_trajectory
from microdispatch.drl import (
    DqnConfig,
    DqnPolicy,
    DrlController,
    TrainingEnvironment,
    train_agent,
)
from microdispatch.forecasting import LoadPvForecaster
from microdispatch.milp import SolverError
from microdispatch.scenarios import (
    build_dayahead_scenarios,
    build_realtime_scenarios,
    kmeans,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_VALIDATION = 3


class _Parser(argparse.ArgumentParser):
    """argparse with the usage-error exit code pinned to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _atomic_write(path, writer) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _load_setup(args):
    if getattr(args, "config", None):
        config, tariff = load_config(args.config)
    else:
        config, tariff = MicrogridConfig(), TariffSchedule()
    return config, tariff


def _planning_soc(args):
    raw = getattr(args, "planning_soc", "contract-end")
    if raw in ("contract-end", "measured"):
        return raw
    return float(raw)


def _training_slice(days, months):
    if len(days) == 365:
        return trailing_train_months(days, months)
    train, _ = split_train_test(days, train_months=months)
    return train


def _build_controller(kind, train, config, args):
    if kind == RULE_BASED:
        return RuleBasedController()
    if kind == MPC_PERFECT:
        return MpcController(PERFECT)
    if kind == MPC_FORECAST:
        forecaster = LoadPvForecaster.fresh(config.forecast_theta,
                                            config.forecast_kappa).warm_up(train)
        return MpcController(FORECAST, forecaster=forecaster)
    if kind == MPC_STOCHASTIC:
        load_model = kmeans([d.load_kw for d in train], 5, seed=args.seed)
        pv_model = kmeans([d.pv_kw for d in train], 5, seed=args.seed + 1)
        return MpcController(STOCHASTIC,
                             scenarios=build_realtime_scenarios(load_model, pv_model))
    if kind == DRL:
        if not args.weights:
            raise DataFormatError("the drl controller needs --weights")
        return DrlController(DqnPolicy.load(args.weights))
    raise DataFormatError(f"unknown controller {kind!r}; "
                          f"choose from {', '.join(CONTROLLER_KINDS)}")


def cmd_generate(args) -> int:
    params = SyntheticParams(seed=args.seed, days=args.days)
    days = generate_dataset(params)
    _atomic_write(args.out, lambda tmp: write_profiles(days, tmp))
    print(f"wrote {len(days)} days ({len(days) * 24} rows) to {args.out}")
    return EXIT_OK


def cmd_day_ahead(args) -> int:
    config, tariff = _load_setup(args)
    days = read_profiles(args.data)
    train = _training_slice(days, args.train_months)
    scenarios = build_dayahead_scenarios(train)
    soc = config.ess_energy_end if args.soc is None else args.soc
    commitment, solution = solve_day_ahead(scenarios, tariff, soc, config)
    _atomic_write(args.out, lambda tmp: save_commitment(commitment, tmp))
    print(f"commitment written to {args.out}; planned objective "
          f"{solution.objective:.2f} ({solution.node_count} nodes)")
    return EXIT_OK


def cmd_train_drl(args) -> int:
    config, tariff = _load_setup(args)
    days = read_profiles(args.data)
    train = _training_slice(days, args.train_months)
    scenarios = build_dayahead_scenarios(train)
    commitment, _ = solve_day_ahead(scenarios, tariff, config.ess_energy_end, config)
    environment = TrainingEnvironment(train, tariff, config, commitment)
    dqn_config = DqnConfig(action_count=config.drl_action_count,
                           episodes=args.episodes, seed=args.seed,
                           epsilon_decay_steps=args.epsilon_decay_steps)
    policy, curve = train_agent(environment, dqn_config)
    _atomic_write(args.out, lambda tmp: policy.save(tmp))

    def write_curve(tmp):
        with open(tmp, "w") as fh:
            fh.write("episode,total_reward\n")
            for i, value in enumerate(curve):
                fh.write(f"{i},{value!r}\n")

    _atomic_write(args.curve, write_curve)
    print(f"trained {len(curve)} episodes over {len(train)} days; "
          f"weights -> {args.out}, curve -> {args.curve}")
    return EXIT_OK


def _run_controllers(args, kinds):
    config, tariff = _load_setup(args)
    days = read_profiles(args.data)
    train, test = split_train_test(days, train_months=args.train_months)
    if args.days is not None:
        test = test[:args.days]
    scenarios = build_dayahead_scenarios(train)
    options = SimulationOptions(
        initial_soc_kwh=args.initial_soc,
        reset_soc_kwh=args.reset_soc,
        planning_soc=_planning_soc(args),
        seed=args.seed)
    cache: dict = {}
    reports, failures = {}, {}
    for kind in kinds:
        controller = _build_controller(kind, train, config, args)
        try:
            reports[kind] = run_simulation(controller, test, tariff, config,
                                           scenarios, options,
                                           commitment_cache=cache)
        except SimulationAborted as exc:
            failures[kind] = str(exc)
    return config, tariff, test, reports, failures


def cmd_simulate(args) -> int:
    if args.planning_soc is None:
        args.planning_soc = "measured"  # single-controller runs track their own SOC
    config, tariff, test, reports, failures = _run_controllers(args, [args.controller])
    if failures:
        print(failures[args.controller], file=sys.stderr)
        return EXIT_RUNTIME
    report = reports[args.controller]
    if args.out:
        _atomic_write(args.out, lambda tmp: write_report_json(report, tmp))
    if args.trace:
        _atomic_write(args.trace, lambda tmp: write_trace_csv(report, tmp))
    print(f"{args.controller}: {report.hours} h, total cost {report.total_cost:.2f}, "
          f"avg hourly {report.average_hourly_cost:.2f}, "
          f"blackouts {report.blackout_count}")
    return EXIT_OK


def cmd_compare(args) -> int:
    kinds = [k.strip() for k in args.controllers.split(",") if k.strip()]
    if not kinds:
        raise DataFormatError("--controllers must name at least one controller")
    if args.planning_soc is None:
        args.planning_soc = "contract-end"  # one shared commitment for everyone
    config, tariff, test, reports, failures = _run_controllers(args, kinds)
    os.makedirs(args.out, exist_ok=True)
    if reports:
        _atomic_write(os.path.join(args.out, "summary.csv"),
                      lambda tmp: write_summary_csv(reports, tmp))
        _atomic_write(os.path.join(args.out, "daywise.csv"),
                      lambda tmp: write_daywise_csv(reports, tmp))
        for kind, report in reports.items():
            _atomic_write(os.path.join(args.out, f"trace_{kind}.csv"),
                          lambda tmp, r=report: write_trace_csv(r, tmp))
        first = next(iter(reports.values()))
        _atomic_write(os.path.join(args.out, "commitment.json"),
                      lambda tmp: save_commitment(first.commitments[0], tmp))
    header = f"{'controller':16s} {'avg $/h':>10s} {'avg DG $/h':>11s} {'s/decision':>11s}"
    print(header)
    for kind, report in reports.items():
        print(f"{kind:16s} {report.average_hourly_cost:10.2f} "
              f"{report.average_hourly_dg_cost:11.2f} "
              f"{report.mean_decision_seconds:11.4f}")
    for kind, message in failures.items():
        print(f"{kind}: FAILED ({message})", file=sys.stderr)
    return EXIT_RUNTIME if failures else EXIT_OK


def cmd_validate(args) -> int:
    kinds = [k.strip() for k in args.controllers.split(",") if k.strip()]
    if args.planning_soc is None:
        args.planning_soc = "contract-end"
    config, tariff, test, reports, failures = _run_controllers(args, kinds)
    bad = bool(failures)
    for kind, message in failures.items():
        print(f"{kind}: FAILED ({message})", file=sys.stderr)
    for kind, report in reports.items():
        violations = validate_trajectory(report.trajectory(), report.commitments,
                                         config)
        if violations:
            bad = True
            print(f"{kind}: {len(violations)} constraint violations")
            for v in violations[:20]:
                print(f"  step {v.step} hour {v.hour_of_day}: {v.constraint} "
                      f"by {v.magnitude:.6g}")
        else:
            print(f"{kind}: clean ({report.hours} hours)")
    return EXIT_VALIDATION if bad else EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="microdispatch",
                     description="Two-stage microgrid dispatch toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_run_flags(p):
        p.add_argument("--data", required=True, help="profiles CSV")
        p.add_argument("--config", help="config JSON (defaults built in)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--train-months", type=int, default=11)
        p.add_argument("--days", type=int, default=None,
                       help="limit the test window to this many days")
        p.add_argument("--weights", help="trained DQN weight file")
        p.add_argument("--reset-soc", type=float, default=None,
                       help="force the battery to this SOC at each midnight")
        p.add_argument("--initial-soc", type=float, default=12500.0)
        p.add_argument("--planning-soc", default=None,
                       help="day-ahead start SOC: contract-end, measured, or kWh")

    p = sub.add_parser("generate", help="write a synthetic profiles CSV")
    p.add_argument("--days", type=int, default=365)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("day-ahead", help="solve one day-ahead commitment")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--train-months", type=int, default=11)
    p.add_argument("--soc", type=float, default=None,
                   help="starting SOC (defaults to the contracted end SOC)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_day_ahead)

    p = sub.add_parser("train-drl", help="train the DQN policy")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--train-months", type=int, default=11)
    p.add_argument("--episodes", type=int, default=None,
                   help="day-episodes to run (default: one pass over the data)")
    p.add_argument("--epsilon-decay-steps", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="weight file")
    p.add_argument("--curve", required=True, help="learning-curve CSV")
    p.set_defaults(func=cmd_train_drl)

    p = sub.add_parser("simulate", help="run one controller over the test month")
    common_run_flags(p)
    p.add_argument("--controller", required=True, choices=CONTROLLER_KINDS)
    p.add_argument("--out", help="report JSON")
    p.add_argument("--trace", help="hourly trace CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run several controllers, shared commitments")
    common_run_flags(p)
    p.add_argument("--controllers", required=True,
                   help="comma-separated controller kinds")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="run controllers and check every constraint")
    common_run_flags(p)
    p.add_argument("--controllers", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataFormatError, FileNotFoundError, SolverError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
