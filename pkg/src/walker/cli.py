"""Command-line front end: ``walker run``, ``walker metrics`` and ``walker sweep``.

Exit codes: 0 on success, 1 for a bad configuration or an unreadable log,
2 when the simulation falls or meets an infeasible step.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import config as cfg
from . import logs
from .simulator import run_scenario
from .terrain import TerrainMode

EXIT_OK, EXIT_CONFIG, EXIT_SIM = 0, 1, 2

log = logging.getLogger("walker")


def _load(args) -> cfg.ScenarioConfig:
    base = cfg.load(args.config) if args.config else cfg.ScenarioConfig()
    return base.with_overrides(n_steps=args.steps, seed=args.seed, terrain=args.terrain)


def _simulate(scenario: cfg.ScenarioConfig):
    return run_scenario(scenario.build_terrain(), scenario.model, scenario.gait,
                        scenario.gains, scenario.n_steps, scenario.sim)


def cmd_run(args) -> int:
    try:
        scenario = _load(args)
    except cfg.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or scenario.output.dir)
    simlog = _simulate(scenario)
    traj, steps = logs.write_logs(
        simlog, out, e_star=scenario.gait.e_star, z_tilde_star=scenario.gait.z_tilde_star,
        g=scenario.gait.g, trajectory=scenario.output.trajectory, steps=scenario.output.steps)
    print(f"wrote {traj} and {steps}")
    print(logs.metrics_from_simlog(simlog, scenario.gait.e_star).report())
    print(f"wall time {simlog.wall_time:.1f} s, max QP solve {1e3 * simlog.max_solve_time:.2f} ms, "
          f"QP failures {simlog.qp_failures}, MPC fallbacks {simlog.mpc_fallbacks}")
    if simlog.fell:
        print(f"simulation failed after {simlog.n_steps} steps: {simlog.failure}",
              file=sys.stderr)
        return EXIT_SIM
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        steps_path = logs.resolve_log(args.log)
        table = logs.read_steps(steps_path)
        print(logs.compute_metrics(table).report())
        if not args.no_phase:
            traj = logs.trajectory_path(steps_path, table)
            phase_out = Path(args.phase_out) if args.phase_out else steps_path.parent / "phase_portrait.csv"
            logs.write_phase_portrait(traj, table, phase_out)
            print(f"wrote {phase_out}")
    except logs.LogError as e:
        print(f"log error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


@dataclasses.dataclass(frozen=True)
class SweepResult:
    index: int
    epsilon: float
    e_star: float
    seed: int
    steps: int
    success: bool


def _sweep_job(job: tuple[int, cfg.ScenarioConfig]) -> SweepResult:
    index, scenario = job
    logging.disable(logging.WARNING)
    simlog = _simulate(scenario)
    return SweepResult(index, scenario.gait.epsilon, scenario.gait.e_star, scenario.seed,
                       simlog.n_steps, not simlog.fell)


def sweep_jobs(base: cfg.ScenarioConfig, epsilons, e_stars, n_seeds: int):
    jobs = []
    for eps in epsilons:
        for e in e_stars:
            gait = dataclasses.replace(base.gait, epsilon=eps, e_star=e)
            for s in range(n_seeds):
                scenario = dataclasses.replace(base, gait=gait, seed=base.seed + s)
                jobs.append((len(jobs), scenario))
    return jobs


def run_sweep(base: cfg.ScenarioConfig, epsilons, e_stars, n_seeds: int = 1,
              workers: int | None = None) -> list[SweepResult]:
    """Run the (epsilon, E*) grid; results are ordered by grid index."""
    jobs = sweep_jobs(base, epsilons, e_stars, n_seeds)
    if workers == 1:
        results = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    return sorted(results, key=lambda r: r.index)


def success_table(results: list[SweepResult]) -> list[tuple[float, float, int, int, float]]:
    """(epsilon, E*, successes, runs, mean steps) per grid cell, in grid order."""
    cells: dict[tuple[float, float], list[SweepResult]] = {}
    for r in results:
        cells.setdefault((r.epsilon, r.e_star), []).append(r)
    return [(eps, e, sum(r.success for r in rs), len(rs), sum(r.steps for r in rs) / len(rs))
            for (eps, e), rs in cells.items()]


def cmd_sweep(args) -> int:
    try:
        base = _load(args)
        # validate every grid point before spending time on simulations
        for eps in args.epsilon:
            for e in args.e_star:
                dataclasses.replace(base.gait, epsilon=eps, e_star=e)
        if args.seeds < 1:
            raise ValueError("--seeds must be at least 1")
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    results = run_sweep(base, args.epsilon, args.e_star, args.seeds, args.workers)
    table = success_table(results)
    print(f"{'epsilon':>8} {'E*':>8} {'success':>9} {'mean steps':>11}")
    for eps, e, ok, n, mean_steps in table:
        print(f"{eps:8.3f} {e:8.3f} {ok:4d}/{n:<4d} {mean_steps:11.1f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("epsilon", "e_star", "successes", "runs", "success_rate", "mean_steps"))
            for eps, e, ok, n, mean_steps in table:
                w.writerow((repr(eps), repr(e), ok, n, repr(ok / n), repr(mean_steps)))
        print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="scenario TOML file (defaults if omitted)")
    p.add_argument("--steps", type=int, metavar="N", help="number of steps to walk")
    p.add_argument("--seed", type=int, metavar="S", help="random-stone seed")
    p.add_argument("--terrain", choices=[m.value for m in TerrainMode],
                   help="override the terrain mode from the config")
    p.add_argument("--out", metavar="DIR", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="walker",
        description="Online walking synthesis for a planar five-link biped.")
    parser.add_argument("-v", "--verbose", action="store_true", help="show warnings and info")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario and write CSV logs")
    _add_scenario_flags(run)
    run.set_defaults(func=cmd_run)

    met = sub.add_parser("metrics", help="summarize a log and export the phase portrait")
    met.add_argument("log", help="log directory or steps CSV")
    met.add_argument("--phase-out", metavar="PATH", help="phase-portrait CSV path")
    met.add_argument("--no-phase", action="store_true", help="skip the phase-portrait export")
    met.set_defaults(func=cmd_metrics)

    sw = sub.add_parser("sweep", help="success rate over an (epsilon, E*) grid")
    _add_scenario_flags(sw)
    sw.add_argument("--epsilon", type=float, nargs="+", default=[0.5, 0.6, 0.7])
    sw.add_argument("--e-star", type=float, nargs="+", default=[0.3, 0.5, 0.7])
    sw.add_argument("--seeds", type=int, default=1, help="seeds per grid point")
    sw.add_argument("--workers", type=int, default=None, help="worker processes")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
