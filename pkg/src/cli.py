"""
Command-line entry point: `python -m src.cli <command> [flags]`.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from src.config import apply_overrides, load_config
from src.errors import ConfigError
from src.llm.client import read_api_key
from src.logger import configure_logging, get_logger, is_debug
from src.sim.engine import run_simulation
from src.sim.scenarios import build_scenario
from src.stats.equilibrium import scenario_due
from src.stats.run_analysis import analyze_runs
from src.stats.run_fit import fit_runs

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

EXIT_CODES_HELP = """exit codes:
  0  success
  1  runtime failure (corrupt logs, degenerate data, aborted run)
  2  configuration error (bad flags, invalid config, missing API key)
"""

DEFAULT_OUT = "runs"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario YAML path or builtin name (scenario1..scenario5, ow)")
    common.add_argument("--out", default=DEFAULT_OUT, help=f"output root directory (default: {DEFAULT_OUT})")
    common.add_argument("--seed", type=int, help="base random seed; run r uses seed + r")
    common.add_argument("--days", type=int, help="days per run")
    common.add_argument("--runs", type=int, help="number of replications")
    common.add_argument(
        "--decider",
        help="llm, mnl, mnl-<alpha>, prc, random, mock, mock-epsilon or mock-cyclic",
    )
    common.add_argument("--model", help="LLM model code or identifier")
    common.add_argument("--jobs", type=int, help="replications simulated in parallel")
    common.add_argument("--travelers-per-agent", type=int, help="travelers represented by one agent")
    common.add_argument("--quiet", action="store_true", help="warnings only, no progress bars")
    common.add_argument("--debug", action="store_true", help="debug logging and tracebacks")

    parser = argparse.ArgumentParser(
        prog="python -m src.cli",
        description="Day-to-day route choice simulator with LLM travelers.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[common], help="simulate a scenario")
    run.add_argument("--restart", action="store_true", help="discard existing run directories instead of resuming")

    analyze = commands.add_parser("analyze", parents=[common], help="compute switching and travel-time metrics")
    analyze.add_argument("--run-dir", help="scenario or run directory (default: <out>/<config name>)")
    analyze.add_argument("--due", action="store_true", help="compare travel times against the DUE")
    analyze.add_argument("--window", type=int, nargs=2, metavar=("FIRST", "LAST"), help="day range for statistics")

    fit = commands.add_parser("fit", parents=[common], help="fit the switching regression")
    fit.add_argument("--run-dir", help="scenario or run directory (default: <out>/<config name>)")

    due = commands.add_parser("due", parents=[common], help="print the equilibrium of a scenario")
    due.add_argument("--scenario", required=True, help="1..5, scenario1..scenario5, ow, or a config path")

    commands.add_parser("validate-config", parents=[common], help="check a config without running it")
    return parser


def _config(args, source: Optional[str] = None):
    source = source or args.config
    if not source:
        raise ConfigError("--config is required for this command")
    return apply_overrides(
        load_config(source),
        seed=args.seed,
        days=args.days,
        runs=args.runs,
        decider=args.decider,
        jobs=args.jobs,
        travelers_per_agent=args.travelers_per_agent,
        model=args.model,
    )


def _run_dir(args) -> Path:
    if args.run_dir:
        return Path(args.run_dir)
    return Path(args.out) / _config(args).name


def cmd_run(args) -> int:
    config = _config(args)
    if config.decider.kind == "llm" and not read_api_key(config.llm):
        raise ConfigError(
            f"The llm decider needs an API key: set {config.llm.api_key_env} or add it to a .env file"
        )

    results = run_simulation(config, Path(args.out), resume=not args.restart, quiet=args.quiet)
    for result in results:
        final = result.summary["mean_travel_time"].iloc[-1]
        print(f"{result.run_dir}: {len(result.days)} days, final mean travel time {final:.2f}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    analyze_runs(_run_dir(args), due=args.due, window=tuple(args.window) if args.window else None)
    return EXIT_OK


def cmd_fit(args) -> int:
    fit_runs(_run_dir(args))
    return EXIT_OK


def cmd_due(args) -> int:
    name = args.scenario
    if name.isdigit():
        name = f"scenario{name}"
    config = _config(args, name)
    solution = scenario_due(config)

    print(f"=== Equilibrium of {config.name} ===")
    for demand in config.demands:
        flows = ", ".join(f"{flow:.2f}" for flow in solution.od_flows(demand.od))
        costs = ", ".join(f"{cost:.2f}" for cost in solution.od_costs(demand.od))
        print(f"{demand.origin}->{demand.destination}  demand {demand.travelers}  flows ({flows})  costs ({costs})")
    print(f"mean travel time  {solution.mean_travel_time:.2f}")
    if config.due_reference is not None:
        print(f"reference         {config.due_reference:.2f}")
    print(f"relative gap      {solution.relative_gap:.3g}")
    print(f"max cost gap      {solution.max_cost_gap:.3g}")
    print(f"converged         {solution.converged} ({solution.iterations} iterations)")
    return EXIT_OK


def cmd_validate_config(args) -> int:
    config = _config(args)
    scenario = build_scenario(config)
    routes = sum(len(route_set) for route_set in scenario.route_sets.values())
    print(
        f"OK: {config.name}, {len(scenario.agents)} agents, {len(scenario.route_sets)} OD pairs, "
        f"{routes} routes, decider {config.decider.kind}"
    )
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "analyze": cmd_analyze,
    "fit": cmd_fit,
    "due": cmd_due,
    "validate-config": cmd_validate_config,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(quiet=args.quiet, debug=args.debug)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        if is_debug():
            logger.exception("Configuration error")
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        if is_debug():
            logger.exception("Command failed")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
