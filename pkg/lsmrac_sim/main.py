"""
Command line runner: run, compare, validate and list scenarios.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import asyncio
import sys
from dataclasses import replace
from pathlib import Path

from lsmrac.exceptions import ConfigValidationError, LsmracError
from lsmrac.sim_engine import RobotScenario, compare_traces, run_scenario
from lsmrac.utils import logger, set_verbose_debug, setup_logger
from lsmrac_sim.config import LOG_LEVELS, RuntimeSettings
from lsmrac_sim.emit import emit_comparison, emit_metrics, emit_trace
from lsmrac_sim.loader import load_config
from lsmrac_sim.presets import PRESETS, get_preset

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

ALGORITHMS = ("ls", "gradient")
CA_MODES = ("on", "off")


class UsageError(Exception):
    """Bad flag combination discovered after argument parsing."""


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    settings = RuntimeSettings.from_env()
    parser = argparse.ArgumentParser(
        prog="lsmrac-sim",
        description="Least-squares adaptive tracking simulator for planar robot teams",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--config", help="Scenario JSON file")
    source.add_argument("--preset", help="Built-in scenario name (see the presets command)")
    common.add_argument(
        "--steps",
        type=int,
        default=settings.steps_override,
        help="Override the horizon (default: from env LSMRAC_STEPS or the scenario)",
    )
    common.add_argument(
        "--algorithm",
        default=None,
        help="Adaptive law: ls or gradient; compare takes a pair such as ls,gradient",
    )
    common.add_argument(
        "--ca",
        default=None,
        help="Collision avoidance: on or off; compare takes a pair such as on,off",
    )
    common.add_argument(
        "--out",
        default=settings.out_dir,
        help="Output directory (default: from env LSMRAC_OUT_DIR or ./out)",
    )
    common.add_argument(
        "--theta-star-known",
        action="store_true",
        help="Record the Lyapunov function V(t) along the run (least squares only)",
    )
    common.add_argument(
        "--log-level",
        default=settings.log_level,
        choices=LOG_LEVELS,
        help="Logging level (default: from env LOG_LEVEL or INFO)",
    )
    common.add_argument(
        "--no-theta",
        action="store_true",
        help="Leave parameter estimates out of the trace file",
    )

    sub.add_parser("run", parents=[common], help="Simulate one scenario")
    sub.add_parser("compare", parents=[common], help="Simulate two arms and compare them")
    sub.add_parser("validate", parents=[common], help="Check a scenario without running it")
    sub.add_parser("presets", help="List built-in scenarios")

    args = parser.parse_args(argv)
    args.settings = settings
    return args


def _choice(value: str, valid: tuple[str, ...], flag: str) -> str:
    if value not in valid:
        raise UsageError(f"{flag} must be one of {', '.join(valid)}, got {value!r}")
    return value


def base_scenario(args: argparse.Namespace) -> RobotScenario:
    if args.config:
        scenario = load_config(args.config)
    elif args.preset:
        scenario = get_preset(args.preset)
    else:
        raise UsageError("give --config PATH or --preset NAME")
    if args.steps is not None:
        if args.steps < 1:
            raise UsageError(f"--steps must be positive, got {args.steps}")
        scenario = replace(scenario, steps=args.steps)
    if args.theta_star_known:
        scenario = replace(scenario, theta_star_known=True)
    return scenario


def with_algorithm(scenario: RobotScenario, algorithm: str) -> RobotScenario:
    adaptation = replace(scenario.adaptation, algorithm=algorithm)
    return replace(scenario, adaptation=adaptation)


def build_scenario(args: argparse.Namespace) -> RobotScenario:
    """The single scenario described by ``run``/``validate`` flags."""
    scenario = base_scenario(args)
    if args.algorithm is not None:
        scenario = with_algorithm(scenario, _choice(args.algorithm, ALGORITHMS, "--algorithm"))
    if args.ca is not None:
        scenario = replace(scenario, ca_enabled=_choice(args.ca, CA_MODES, "--ca") == "on")
    return scenario


def build_arms(args: argparse.Namespace) -> list[tuple[str, RobotScenario]]:
    """Two labelled scenarios that differ only in the knob given as a pair."""
    scenario = base_scenario(args)
    algorithms = args.algorithm.split(",") if args.algorithm else []
    ca_modes = args.ca.split(",") if args.ca else []
    if len(algorithms) == 2 and len(ca_modes) < 2:
        if ca_modes:
            scenario = replace(scenario, ca_enabled=_choice(ca_modes[0], CA_MODES, "--ca") == "on")
        return [
            (name, replace(with_algorithm(scenario, name), name=f"{scenario.name}:{name}"))
            for name in (_choice(a, ALGORITHMS, "--algorithm") for a in algorithms)
        ]
    if len(ca_modes) == 2 and len(algorithms) < 2:
        if algorithms:
            scenario = with_algorithm(scenario, _choice(algorithms[0], ALGORITHMS, "--algorithm"))
        return [
            (f"ca-{mode}", replace(scenario, ca_enabled=mode == "on", name=f"{scenario.name}:ca-{mode}"))
            for mode in (_choice(c, CA_MODES, "--ca") for c in ca_modes)
        ]
    raise UsageError("compare needs exactly one pair: --algorithm A,B or --ca on,off")


async def run_arms(scenarios: list[RobotScenario]):
    loop = asyncio.get_running_loop()
    return await asyncio.gather(
        *(loop.run_in_executor(None, run_scenario, scenario) for scenario in scenarios)
    )


def _emit_run(out_dir: Path, trace, metrics, include_theta: bool) -> None:
    emit_trace(trace, out_dir / "trace.csv", include_theta=include_theta)
    emit_metrics(metrics, out_dir / "metrics.json")
    for robot in metrics.robots:
        print(
            f"robot {robot.robot}: tail max |e| = {robot.tail_max_error:.4g}, "
            f"converged at step {robot.convergence_step}, "
            f"inputs in [{robot.input_min:.3f}, {robot.input_max:.3f}] N"
        )
    print(f"min surface distance = {metrics.min_surface_distance:.4f} m, collision = {metrics.collision}")
    print(f"outputs written to {out_dir}")


def cmd_run(args: argparse.Namespace) -> int:
    scenario = build_scenario(args)
    trace, metrics = run_scenario(scenario)
    _emit_run(Path(args.out), trace, metrics, not args.no_theta)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    arms = build_arms(args)
    results = asyncio.run(run_arms([scenario for _, scenario in arms]))
    labels = [label for label, _ in arms]
    out = Path(args.out)
    for label, (trace, metrics) in zip(labels, results):
        print(f"[{label}]")
        _emit_run(out / label, trace, metrics, not args.no_theta)
    report = compare_traces(results[0], results[1], labels=labels)
    paths = emit_comparison(report, out)
    final = report.deltas["final_tracking_error_norm_delta"]
    print(f"final tracking error norm delta ({labels[0]} - {labels[1]}): {final}")
    print(f"comparison written to {paths['report']}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = build_scenario(args)
    print(
        f"OK: {scenario.name} with {len(scenario.robots)} robot(s), {scenario.steps} steps, "
        f"algorithm {scenario.adaptation.algorithm}, CA {'on' if scenario.ca_enabled else 'off'}"
    )
    return EXIT_OK


def cmd_presets(args: argparse.Namespace) -> int:
    width = max(len(name) for name in PRESETS)
    for name, (description, _) in PRESETS.items():
        print(f"{name:<{width}}  {description}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "validate": cmd_validate,
    "presets": cmd_presets,
}


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    level = getattr(args, "log_level", args.settings.log_level)
    setup_logger(level, log_dir=args.settings.log_dir)
    set_verbose_debug(args.settings.verbose)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (LsmracError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def run():
    """Console script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    run()
