"""One control cycle of the walking pipeline.

Per cycle: estimate the pre-impact COM state, recompute ``u_des``, solve the
vertical MPC for the next COM acceleration, evaluate the Bezier outputs and
hand everything to the task-space QP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rigid_body as rb
from .gait_synthesis import (
    GaitParams,
    OutputSet,
    PhaseState,
    StepPlan,
    compute_u_des,
    desired_outputs,
    estimate_preimpact,
    plan_step,
    retime,
)
from .reduced_models import ReducedState, StoneConfig
from .task_space_controller import ControlCommand, ControllerGains, TaskSpaceController
from .vertical_mpc import DEFAULT_N, VerticalMpc


@dataclass
class CycleInfo:
    y_act: np.ndarray
    dy_act: np.ndarray
    y_des: OutputSet
    u_des: float
    L_des: float
    u_z0: float
    reduced: object
    com: object
    kin: rb.Kinematics | None = None


def phase_state(model: rb.RobotModel, kin: rb.Kinematics) -> PhaseState:
    com = rb.com_kinematics(model, None, None, kin)
    L = com.z_com * com.dx_com - com.x_com * com.dz_com + com.L_com_y
    x_sw, z_sw = rb.swing_foot_relative(kin)
    return PhaseState(ReducedState(com.x_com, L), com, x_sw, z_sw,
                      float(kin.angles[rb.TORSO]))


class WalkingController:
    def __init__(self, model: rb.RobotModel, params: GaitParams, gains: ControllerGains,
                 mpc_horizon: int = DEFAULT_N):
        self.model = model
        self.params = params
        self.gains = gains
        self.tsc = TaskSpaceController(model, gains)
        self.mpc = VerticalMpc(mpc_horizon, params.g)
        self.plan: StepPlan | None = None
        self.last_u_des = 0.0

    def start_step(self, q, dq, stone: StoneConfig, stone_next: StoneConfig | None) -> StepPlan:
        kin = rb.kinematics(self.model, q, dq)
        self.plan = plan_step(phase_state(self.model, kin), stone, stone_next, self.params)
        self.mpc.reset()
        return self.plan

    def __call__(self, q, dq, t: float) -> tuple[ControlCommand, CycleInfo]:
        plan, p = self.plan, self.params
        kin = rb.kinematics(self.model, q, dq)
        cur = phase_state(self.model, kin)
        if t < p.retime_until * plan.T_s:
            plan = self.plan = retime(plan, cur, t, p)
        est = estimate_preimpact(cur, t, plan, p)
        u_des, L_des = compute_u_des(est, plan, p)
        self.last_u_des = u_des
        u_z0 = self.mpc.command(cur.com.z_com, cur.com.dz_com, plan.z_com_f, u_des,
                                plan.t_touchdown - t)
        y_des = desired_outputs(t, plan, p)
        y_des.y[1], y_des.dy[1], y_des.ddy[1] = cur.com.z_com, cur.com.dz_com, u_z0
        cmd = self.tsc.compute(q, dq, y_des, u_z0, kin)
        info = CycleInfo(cmd.y_act, cmd.dy_act, y_des, u_des, L_des, u_z0, cur.reduced,
                         cur.com, kin)
        return cmd, info
