"""
CLI Interface
=============

Argument parsing and subcommand dispatch for the cat-code simulator.
Run with: cat-aqec <command> [options]

Exit codes: 0 success, 2 configuration error, 3 failed convergence check,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import shutil
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as get_version
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from cat_aqec.analysis import (
    MIN_FIT_POINTS,
    CorrectionBudget,
    FitDiverged,
    GridSpec,
    effective_decay,
    fit_lifetime,
    phase_space_grid,
    predicted_fidelity,
    uncorrected_fidelity,
)
from cat_aqec.circuits import (
    ProtocolParams,
    build_correct,
    build_encode,
    measure_correction,
    measure_encode_decode,
    qubit_input_state,
    run_aqec,
    run_mbqec,
)
from cat_aqec.config import DEFAULT_CONFIG_NAME, ConfigError, ExperimentConfig, load_config
from cat_aqec.dynamics import dispersive_hamiltonian, evolve_master
from cat_aqec.gates import execute_sequence
from cat_aqec.hilbert import SimulationError, partial_trace
from cat_aqec.presets import preset_names
from cat_aqec.records import (
    RunSummary,
    atomic_write_text,
    write_cycle_csv,
    write_grid_csv,
    write_mbqec_csv,
    write_summary,
    write_sweep_csv,
)
from cat_aqec.schema import format_schema, generate_schema
from cat_aqec.verify import Status, run_verify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_NUMERICAL = 4

CONVERGENCE_STEP = 10
CONVERGENCE_TOL = 1e-6
DEFAULT_TW_LIST = (40.0, 55.0, 65.0, 80.0, 100.0)
DEFAULT_CHECKPOINTS = ("input", "encode:1", "encoded", "waited", "correct:9", "corrected")

Scenario = Callable[[ExperimentConfig, Optional[Path]], RunSummary]


def _package_version() -> str:
    try:
        return get_version("cat-aqec")
    except PackageNotFoundError:
        return "unknown"


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    """Add the flags shared by every scenario command."""
    parser.add_argument("--config", type=Path, default=None, help="Flat TOML experiment file")
    parser.add_argument("--preset", default=None, help=f"Preset applied below the config file ({', '.join(preset_names())})")
    parser.add_argument("--seed", type=int, default=None, help="Override the master seed")
    parser.add_argument("--out", type=Path, default=Path("results"), help="Output directory (default: results)")
    parser.add_argument("--fock-dim", type=int, default=None, help="Override the Fock truncation")
    parser.add_argument(
        "--gate-model",
        choices=["suspended", "active"],
        default=None,
        help="Dispersive Hamiltonian during selective rotations",
    )
    parser.add_argument(
        "--check-convergence",
        action="store_true",
        help=f"Re-run at fock_dim + {CONVERGENCE_STEP} and require agreement within {CONVERGENCE_TOL:g}",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Log progress (-vv for debug)")


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser."""
    parser = argparse.ArgumentParser(
        prog="cat-aqec",
        description="Autonomous error correction of cat-encoded cavity qubits: simulation and analysis",
    )
    parser.add_argument(
        "--version", "-V",
        action="version",
        version=f"%(prog)s {_package_version()}",
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    encode_parser = subparsers.add_parser("encode", help="Encoding and decoding infidelity")
    _add_run_args(encode_parser)

    correct_parser = subparsers.add_parser("correct", help="Correction infidelity on both loss branches")
    _add_run_args(correct_parser)

    aqec_parser = subparsers.add_parser("aqec", help="Autonomous correction cycles and lifetime fit")
    _add_run_args(aqec_parser)
    aqec_parser.add_argument("--no-correct", action="store_true", help="Skip corrections (uncorrected decay)")

    mbqec_parser = subparsers.add_parser("mbqec", help="Measurement-based correction over trajectories")
    _add_run_args(mbqec_parser)
    mbqec_parser.add_argument("--n-traj", type=int, default=200, help="Number of trajectories (default: 200)")

    sweep_parser = subparsers.add_parser("sweep-tw", help="Sweep the waiting time and locate the optimum")
    _add_run_args(sweep_parser)
    sweep_parser.add_argument(
        "--tw-list",
        type=lambda s: [float(v) for v in s.split(",")],
        default=list(DEFAULT_TW_LIST),
        help="Comma-separated waiting times in us (default: 40,55,65,80,100)",
    )

    portrait_parser = subparsers.add_parser("phase-portrait", help="Export Husimi-Q grids at checkpoints")
    _add_run_args(portrait_parser)
    portrait_parser.add_argument(
        "--checkpoints",
        type=lambda s: [v.strip() for v in s.split(",") if v.strip()],
        default=list(DEFAULT_CHECKPOINTS),
        help="input, encode:K, encoded, waited, correct:K, corrected (comma-separated)",
    )

    init_parser = subparsers.add_parser("init", help="Write a starter experiment config")
    init_parser.add_argument("--path", type=Path, default=Path(DEFAULT_CONFIG_NAME), help="Destination file")

    verify_parser = subparsers.add_parser("verify", help="Check setup and configuration")
    verify_parser.add_argument("--config", type=Path, default=None, help="Flat TOML experiment file")
    verify_parser.add_argument("--preset", default=None, help="Preset applied below the config file")
    verify_parser.add_argument("--out", type=Path, default=Path("results"), help="Output directory to check")

    schema_parser = subparsers.add_parser("schema", help="Print the configuration schema")
    schema_parser.add_argument("--json", action="store_true", help="Output as JSON")

    return parser


def cmd_encode_fidelity(config: ExperimentConfig, out_dir: Optional[Path] = None) -> RunSummary:
    """Encode and decode with noise; worst-case infidelities over the cardinal states, plus their means."""
    measured = measure_encode_decode(config)
    if out_dir is not None:
        atomic_write_text(out_dir / "encode_sequence.txt", build_encode(ProtocolParams.from_config(config)).to_text())
    return RunSummary(
        scenario="encode",
        config=config.to_dict(),
        metrics={
            "eps_encode": measured.eps_encode,
            "eps_decode": measured.eps_decode,
            "eps_encode_mean": measured.eps_encode_mean,
            "eps_decode_mean": measured.eps_decode_mean,
            "encode_duration_ns": measured.encode_duration_us * 1e3,
            "decode_duration_ns": measured.decode_duration_us * 1e3,
        },
    )


def _budget_metrics(eps_correct: float, tc_us: float, config: ExperimentConfig) -> dict[str, float]:
    if config.kappa == 0 or not 0 < eps_correct < 1:
        return {}
    eps_jump = config.kappa * config.tw_us * config.nbar
    budget = CorrectionBudget(eps_correct, min(eps_jump, 1.0), tc_us, config.tw_us)
    decay = effective_decay(budget, config.kappa, config.nbar)
    return {
        "kappa_eff_formula": decay.kappa_eff,
        "optimal_tw_us": decay.optimal_tw,
        "kappa_eff_at_optimum": decay.kappa_eff_at_optimum,
        "t_eff_at_optimum_us": decay.lifetime_at_optimum,
        "predicted_fidelity_10": predicted_fidelity(10, budget).fidelity,
    }


def cmd_correct_fidelity(config: ExperimentConfig, out_dir: Optional[Path] = None) -> RunSummary:
    """Worst-case correction infidelity over psi^(0), psi^(1) inputs damped over tw_us and the cardinal states."""
    measured = measure_correction(config)
    branch, state = measured.worst_input
    if out_dir is not None:
        atomic_write_text(out_dir / "correct_sequence.txt", build_correct(ProtocolParams.from_config(config)).to_text())
    metrics = {
        "eps_correct": measured.eps_correct,
        "eps_correct_branch0": measured.eps_by_branch[0],
        "eps_correct_branch1": measured.eps_by_branch[1],
        "eps_correct_mean_branch0": measured.mean_by_branch[0],
        "eps_correct_mean_branch1": measured.mean_by_branch[1],
        "worst_input": f"psi^({branch}) {state}",
        "correct_duration_ns": measured.duration_us * 1e3,
    }
    metrics.update(_budget_metrics(measured.eps_correct, measured.duration_us, config))
    return RunSummary(scenario="correct", config=config.to_dict(), metrics=metrics)


def cmd_aqec(config: ExperimentConfig, out_dir: Optional[Path] = None, correct: bool = True) -> RunSummary:
    """Autonomous cycles, lifetime fit, and comparison with the channel model and baselines."""
    reports = run_aqec(config, correct=correct)
    cycles = [r for r in reports if r.stage != "decoded"]
    if out_dir is not None:
        write_cycle_csv(out_dir / "aqec_cycles.csv", reports)

    metrics: dict = {"final_fidelity": cycles[-1].fidelity}
    notes = ["lifetime fit excludes the initial row"]
    if len(cycles) - 1 < MIN_FIT_POINTS:
        notes.append(f"lifetime fit skipped: fewer than {MIN_FIT_POINTS} cycles")
    else:
        try:
            fit = fit_lifetime([(r.time_us, r.fidelity) for r in cycles], burn_in=1)
        except FitDiverged as e:
            # Without corrections the decay plateaus at the jump-mixture weight.
            if correct:
                raise
            notes.append(f"lifetime fit skipped: {e}")
        else:
            metrics["t_eff_us"] = fit.t_eff
            metrics["fit_residual"] = fit.residual
            metrics["kappa_eff_sim"] = 1.0 / fit.t_eff
    decoded = [r for r in reports if r.stage == "decoded"]
    if decoded:
        metrics["decoded_fidelity"] = decoded[0].fidelity

    if config.kappa > 0:
        metrics["uncorrected_t_eff_us"] = 1.0 / (config.kappa * config.nbar)
        times = [r.time_us for r in cycles]
        metrics["uncorrected_final_fidelity"] = float(
            uncorrected_fidelity(config.code_params(), config.logical_qubit(), config.kappa, times)[-1]
        )
    metrics["bare_qubit_t1_us"] = config.t1_us

    if correct and config.kappa > 0:
        measured = measure_correction(config)
        metrics["eps_correct"] = measured.eps_correct
        metrics.update(_budget_metrics(measured.eps_correct, measured.duration_us, config))
        if "kappa_eff_formula" in metrics and "kappa_eff_sim" in metrics:
            metrics["formula_deviation"] = (
                abs(metrics["kappa_eff_sim"] - metrics["kappa_eff_formula"]) / metrics["kappa_eff_formula"]
            )
    return RunSummary(scenario="aqec" if correct else "aqec-uncorrected", config=config.to_dict(), metrics=metrics, notes=notes)


def _sweep_point(config: ExperimentConfig) -> tuple[float, float, float, float]:
    reports = run_aqec(config)
    fit = fit_lifetime([(r.time_us, r.fidelity) for r in reports if r.stage != "decoded"], burn_in=1)
    kappa_eff = 1.0 / fit.t_eff if fit.t_eff > 0 else math.inf
    return config.tw_us, fit.t_eff, kappa_eff, fit.residual


class SweepOptimum(NamedTuple):
    row: tuple[float, float, float, float]
    bracketed: bool
    unimodal: bool


def locate_optimum(rows: Sequence[tuple[float, float, float, float]]) -> SweepOptimum:
    """Argmin of kappa_eff over (tw, t_eff, kappa_eff, residual) rows.

    ``bracketed`` is False when the minimum sits at either end of the swept
    range; ``unimodal`` requires kappa_eff to be non-increasing up to the
    minimum and non-decreasing after it.
    """
    ordered = sorted(rows, key=lambda row: row[0])
    kappas = [row[2] for row in ordered]
    i = int(np.argmin(kappas))
    unimodal = all(a >= b for a, b in zip(kappas[:i], kappas[1 : i + 1])) and all(
        a <= b for a, b in zip(kappas[i:], kappas[i + 1 :])
    )
    return SweepOptimum(ordered[i], 0 < i < len(ordered) - 1, unimodal)


def cmd_sweep_tw(config: ExperimentConfig, tw_list: Sequence[float], out_dir: Optional[Path] = None) -> RunSummary:
    """Fitted decay rate per waiting time; the optimum is the argmin."""
    if not tw_list:
        raise ConfigError("tw list is empty")
    if config.n_cycles < MIN_FIT_POINTS:
        raise ConfigError(f"n_cycles must be at least {MIN_FIT_POINTS} for the lifetime fit")
    configs = [config.replace(tw_us=float(tw)) for tw in tw_list]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_sweep_point, configs))
    else:
        rows = [_sweep_point(c) for c in configs]
    if out_dir is not None:
        write_sweep_csv(out_dir / "sweep_tw.csv", rows)
    optimum = locate_optimum(rows)
    best = optimum.row
    metrics = {
        "optimal_tw_us": best[0],
        "kappa_eff_at_optimum": best[2],
        "t_eff_at_optimum_us": best[1],
        "optimum_bracketed": optimum.bracketed,
        "kappa_eff_unimodal": optimum.unimodal,
        "kappa_eff_by_tw": {f"{row[0]:g}": row[2] for row in rows},
    }
    if config.kappa > 0:
        measured = measure_correction(config)
        budget = _budget_metrics(measured.eps_correct, measured.duration_us, config)
        if budget:
            metrics["analytic_optimal_tw_us"] = budget["optimal_tw_us"]
    notes = []
    if not optimum.bracketed:
        logger.warning("sweep minimum at the edge of the range: tw = %g us", best[0])
        notes.append(f"minimum at the edge of the swept range (tw = {best[0]:g} us); the optimum is not bracketed")
    if not optimum.unimodal:
        notes.append("kappa_eff is not unimodal over the swept range")
    return RunSummary(scenario="sweep-tw", config=config.to_dict(), metrics=metrics, notes=notes)


def cmd_mbqec(config: ExperimentConfig, n_traj: int, out_dir: Optional[Path] = None) -> RunSummary:
    """Trajectory ensemble with parity measurements every tw_us."""
    result = run_mbqec(config, n_traj)
    if out_dir is not None:
        write_mbqec_csv(out_dir / "mbqec_epochs.csv", result)
    return RunSummary(
        scenario="mbqec",
        config=config.to_dict(),
        metrics={
            "n_trajectories": n_traj,
            "final_mean_fidelity": float(result.mean_fidelity[-1]),
            "final_stderr": float(result.stderr[-1]),
            "mean_jumps_per_epoch": float(result.jump_counts.mean()),
            "expected_jumps_per_epoch": config.kappa * config.nbar * config.tw_us,
            "jump_histogram": result.jump_histogram().tolist(),
        },
    )


def _checkpoint_slug(name: str) -> str:
    return name.replace(":", "_")


def cmd_phase_portrait(
    config: ExperimentConfig,
    checkpoints: Sequence[str],
    out_dir: Optional[Path] = None,
    grid: Optional[GridSpec] = None,
) -> RunSummary:
    """Husimi-Q grids of the cavity along encode, one wait, and one correction.

    Checkpoints: ``input``, ``encode:K`` (after step K), ``encoded``,
    ``waited``, ``correct:K``, ``corrected``.
    """
    grid = grid or GridSpec()
    cfg = config.hilbert()
    p = ProtocolParams.from_config(config)
    noise, model, settings = config.noise_model(), config.gate_model_spec(), config.integrator_settings()
    encode, correct = build_encode(p), build_correct(p)
    lengths = {"encode": len(encode), "correct": len(correct)}
    wanted = set(checkpoints)
    for name in wanted:
        stage, _, index = name.partition(":")
        if stage not in ("input", "encoded", "waited", "corrected", "encode", "correct") or (
            stage in lengths and not (index.isdigit() and str(int(index)) == index)
        ):
            raise ConfigError(f"unknown checkpoint: {name!r}")
        if stage in lengths and not 1 <= int(index) <= lengths[stage]:
            raise ConfigError(f"checkpoint {name!r} is outside its sequence (steps 1..{lengths[stage]})")
    captured = {}

    def capture(prefix: str) -> Callable:
        def observer(i, _step, state) -> None:
            name = f"{prefix}:{i + 1}"
            if name in wanted:
                captured[name] = partial_trace(state, "cavity")

        return observer

    state = qubit_input_state(config.logical_qubit(), cfg)
    captured["input"] = partial_trace(state, "cavity")
    state = execute_sequence(state, encode, noise, config.chi, model, settings, observer=capture("encode"))
    captured["encoded"] = partial_trace(state, "cavity")
    state = evolve_master(state, dispersive_hamiltonian(config.chi, cfg), noise, config.tw_us, settings)
    captured["waited"] = partial_trace(state, "cavity")
    state = execute_sequence(state, correct, noise, config.chi, model, settings, observer=capture("correct"))
    captured["corrected"] = partial_trace(state, "cavity")

    peaks = {}
    for name in checkpoints:
        q = phase_space_grid(captured[name], grid)
        j, i = np.unravel_index(int(np.argmax(q)), q.shape)
        peaks[name] = [float(grid.xs[i]), float(grid.ys[j]), float(q[j, i])]
        if out_dir is not None:
            write_grid_csv(out_dir / f"portrait_{_checkpoint_slug(name)}.csv", grid.header(), q)
    return RunSummary(
        scenario="phase-portrait",
        config=config.to_dict(),
        metrics={"checkpoints": list(checkpoints), "peak": peaks},
    )


def _comparable(metrics: dict) -> dict[str, float]:
    return {
        k: float(v)
        for k, v in metrics.items()
        if isinstance(v, (int, float)) and not isinstance(v, bool) and k != "n_trajectories"
    }


def check_convergence(config: ExperimentConfig, scenario: Scenario, summary: RunSummary) -> RunSummary:
    """Re-run at fock_dim + 10 and compare every scalar metric (relative to max(1, |x|))."""
    reference = scenario(config.replace(fock_dim=config.fock_dim + CONVERGENCE_STEP), None)
    ours, theirs = _comparable(summary.metrics), _comparable(reference.metrics)
    deviations = {}
    for key in ours.keys() & theirs.keys():
        a, b = ours[key], theirs[key]
        if a == b:
            deviations[key] = 0.0
        elif math.isfinite(a) and math.isfinite(b):
            deviations[key] = abs(a - b) / max(1.0, abs(a))
        else:
            deviations[key] = math.inf
    worst = max(deviations.values(), default=0.0)
    summary.converged = worst <= CONVERGENCE_TOL
    summary.convergence = {
        "fock_dim": config.fock_dim,
        "reference_fock_dim": config.fock_dim + CONVERGENCE_STEP,
        "tolerance": CONVERGENCE_TOL,
        "max_deviation": worst,
        "deviations": deviations,
    }
    logger.info("convergence: max deviation %.3g (%s)", worst, "ok" if summary.converged else "FAILED")
    return summary


def _configure_logging(verbosity: int) -> None:
    if verbosity <= 0:
        return
    logging.basicConfig(
        level=logging.DEBUG if verbosity > 1 else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _print_summary(summary: RunSummary, out_dir: Path) -> None:
    print(f"\n{summary.scenario} ({summary.wall_seconds:.1f} s)")
    print("-" * 50)
    for key, value in summary.metrics.items():
        if isinstance(value, float):
            print(f"  {key:28s} {value:.6g}")
        elif not isinstance(value, (dict, list)):
            print(f"  {key:28s} {value}")
    if summary.converged is not None:
        print(f"  {'converged':28s} {summary.converged}")
    print("-" * 50)
    print(f"  results in {out_dir}/")


def _scenario_for(args: argparse.Namespace) -> Scenario:
    if args.command == "encode":
        return cmd_encode_fidelity
    if args.command == "correct":
        return cmd_correct_fidelity
    if args.command == "aqec":
        return lambda config, out: cmd_aqec(config, out, correct=not args.no_correct)
    if args.command == "mbqec":
        return lambda config, out: cmd_mbqec(config, args.n_traj, out)
    if args.command == "sweep-tw":
        return lambda config, out: cmd_sweep_tw(config, args.tw_list, out)
    return lambda config, out: cmd_phase_portrait(config, args.checkpoints, out)


def run_scenario(args: argparse.Namespace) -> int:
    """Load the config, run one scenario, write its summary; returns the exit code."""
    _configure_logging(args.verbose)
    try:
        config = load_config(
            args.config,
            preset=args.preset,
            cli_overrides={"seed": args.seed, "fock_dim": args.fock_dim, "gate_model": args.gate_model},
        )
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    scenario = _scenario_for(args)
    out_dir: Path = args.out
    logger.info("starting %s", args.command)
    started = time.perf_counter()
    try:
        summary = scenario(config, out_dir)
        if args.check_convergence:
            summary = check_convergence(config, scenario, summary)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as e:
        print(f"Numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    summary.wall_seconds = time.perf_counter() - started

    write_summary(out_dir / f"{args.command}_summary.json", summary)
    _print_summary(summary, out_dir)
    if not summary.publishable:
        print("Convergence check failed: results are not publishable", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_init(args: argparse.Namespace) -> int:
    """Execute the init subcommand."""
    target: Path = args.path
    if target.exists():
        print(f"Config already exists: {target}")
        print("Remove it first if you want to reinitialize.")
        return 1

    target.parent.mkdir(parents=True, exist_ok=True)
    shutil.copy(Path(__file__).parent / "templates" / "config.toml", target)

    print(f"Created {target}")
    print()
    print("Next steps:")
    print(f"  1. Edit {target} (keys and defaults: cat-aqec schema)")
    print(f"  2. Run: cat-aqec verify --config {target}")
    print(f"  3. Run: cat-aqec encode --config {target}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    """Execute the verify subcommand."""
    results = run_verify(args.config, args.out, preset=args.preset)

    print("\nVerification Results:")
    print("-" * 50)

    for result in results:
        print(result)

    print("-" * 50)

    tally = Counter(r.status for r in results)
    print(f"\n  {tally[Status.PASS]} passed, {tally[Status.WARN]} warnings, {tally[Status.FAIL]} failed")

    if any(r.blocking for r in results):
        print("\n  Fix the FAIL items above before running a scenario.")
        return 1

    if tally[Status.WARN]:
        print("\n  Warnings are non-blocking but may bias the results.")
    return 0


def cmd_schema(args: argparse.Namespace) -> int:
    schema = generate_schema()
    if args.json:
        print(json.dumps(schema, indent=2))
    else:
        print(format_schema(schema))
    return 0


SCENARIO_COMMANDS = ("encode", "correct", "aqec", "mbqec", "sweep-tw", "phase-portrait")


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        sys.exit(0)

    if args.command in SCENARIO_COMMANDS:
        sys.exit(run_scenario(args))

    sys.exit({"init": cmd_init, "verify": cmd_verify, "schema": cmd_schema}[args.command](args))
