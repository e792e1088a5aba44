"""Cross random stepping stones for several seeds and tabulate the outcome.

    python demos/random_stones.py --seeds 0 1 2 --steps 100

Each row lists the steps walked, the worst post-impact energy error and the
worst miss of the pre-impact vertical velocity target.
"""

import argparse
import logging

from walker import logs
from walker import terrain as tr
from walker.gait_synthesis import GaitParams
from walker.rigid_body import RobotModel
from walker.simulator import run_scenario
from walker.task_space_controller import ControllerGains


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--steps", type=int, default=100)
    parser.add_argument("--epsilon", type=float, default=0.6)
    args = parser.parse_args()
    logging.basicConfig(level=logging.ERROR)

    params = GaitParams(epsilon=args.epsilon)
    print(f"{'seed':>4} {'steps':>6} {'max dE/E*':>10} {'max dz err':>11} {'fallbacks':>10}")
    for seed in args.seeds:
        terrain = tr.random_stones(args.steps + 2, seed)
        simlog = run_scenario(terrain, RobotModel(), params, ControllerGains(), args.steps)
        m = logs.metrics_from_simlog(simlog, params.e_star)
        print(f"{seed:4d} {m.completed_steps:6d} {m.max_energy_error:10.3f} "
              f"{m.max_dz_error:11.3f} {simlog.mpc_fallbacks:10d}")
        if simlog.fell:
            print(f"     failed: {simlog.failure}")


if __name__ == "__main__":
    main()
