"""Walk 50 steps on flat ground and export the (x_com, L_y) phase portrait.

Run from the repository root:

    python demos/flat_walk.py --out demo_logs/flat

The phase-portrait CSV holds the robot samples (one orbit per step) and the
nominal LIP orbit of energy E* for overlay in any plotting tool.
"""

import argparse
import logging
from pathlib import Path

from walker import logs
from walker import terrain as tr
from walker.gait_synthesis import GaitParams
from walker.rigid_body import RobotModel
from walker.simulator import run_scenario
from walker.task_space_controller import ControllerGains


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=50)
    parser.add_argument("--step-length", type=float, default=0.7)
    parser.add_argument("--out", default="demo_logs/flat")
    args = parser.parse_args()
    logging.basicConfig(level=logging.ERROR)

    params = GaitParams()
    simlog = run_scenario(tr.flat(args.step_length, args.steps + 2), RobotModel(), params,
                          ControllerGains(), args.steps)
    traj, steps = logs.write_logs(simlog, args.out, e_star=params.e_star,
                                  z_tilde_star=params.z_tilde_star, g=params.g)
    table = logs.read_steps(steps)
    phase = logs.write_phase_portrait(traj, table, Path(args.out) / "phase_portrait.csv")
    print(logs.compute_metrics(table).report())
    print(f"logs in {args.out}; phase portrait in {phase}")

    # pre-impact states should settle onto a fixed point
    print("last pre-impact states (x_com-, L_y-):")
    for s in simlog.steps[-3:]:
        print(f"  step {s.step:3d}: {s.x_minus:+.5f} {s.L_minus:+.5f}")


if __name__ == "__main__":
    main()
