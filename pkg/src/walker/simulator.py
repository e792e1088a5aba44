"""Hybrid simulation of the five-link walker on a foothold sequence.

Continuous phases are integrated with zero-order-hold torques over each
control period; touchdown is a terminal event on the swing-foot height. At
touchdown the plastic impact map is applied, the legs are relabeled and the
next step is planned.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import rigid_body as rb
from ._kernels import constrained_accel, point_position
from .controller import WalkingController, phase_state
from .gait_synthesis import GaitParams, InfeasibleStep, StepPlan, chord_height
from .integrate import Dopri5, IntegrationFailure
from .reduced_models import (
    LipParams,
    StoneConfig,
    momentum_from_energy,
    orbital_energy,
    virtual_slope_height,
)
from .terrain import Terrain
from .task_space_controller import ControllerGains, output_map

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimOptions:
    dt_control: float = 1e-3
    rtol: float = 1e-9
    atol: float = 1e-9
    guard_arm_phase: float = 0.5
    fall_height_ratio: float = 0.3
    step_timeout: float = 10.0
    # Baumgarte gains on the stance contact (drift correction only)
    contact_kp: float = 100.0
    contact_kd: float = 20.0

    def __post_init__(self):
        if not self.dt_control > 0:
            raise ValueError("dt_control must be positive")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not 0 <= self.guard_arm_phase < 1:
            raise ValueError("guard_arm_phase must lie in [0, 1)")
        if not 0 < self.fall_height_ratio < 1:
            raise ValueError("fall_height_ratio must lie in (0, 1)")
        if not self.step_timeout > 0:
            raise ValueError("step_timeout must be positive")


@dataclass
class StepRecord:
    step: int
    t_impact: float
    duration: float
    T_s: float
    u_des: float
    dz_minus: float
    dx_minus: float
    x_minus: float
    L_minus: float
    x_plus: float
    dz_plus: float
    L_plus: float
    E_plus: float
    E_plus_slope: float
    l_des: float
    h_des: float
    l_actual: float
    h_actual: float
    viable: bool
    speed: float


@dataclass
class SimLog:
    t: list = field(default_factory=list)
    step_index: list = field(default_factory=list)
    q: list = field(default_factory=list)
    dq: list = field(default_factory=list)
    y_act: list = field(default_factory=list)
    y_des: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    F: list = field(default_factory=list)
    x_com: list = field(default_factory=list)
    L_y: list = field(default_factory=list)
    E: list = field(default_factory=list)
    u_des: list = field(default_factory=list)
    u_z0: list = field(default_factory=list)
    stance_drift: list = field(default_factory=list)
    swing_clearance: list = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    requested_steps: int = 0
    failure: str | None = None
    qp_failures: int = 0
    mpc_fallbacks: int = 0
    wall_time: float = 0.0
    max_solve_time: float = 0.0

    @property
    def fell(self) -> bool:
        return self.failure is not None

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def arrays(self) -> dict[str, np.ndarray]:
        keys = ("t", "step_index", "q", "dq", "y_act", "y_des", "tau", "F", "x_com",
                "L_y", "E", "u_des", "u_z0")
        return {k: np.asarray(getattr(self, k)) for k in keys}


def initial_state(model: rb.RobotModel, params: GaitParams, stone: StoneConfig,
                  back_step: float | None = None):
    """A post-impact-like state on the orbit of energy E* for the first stone.

    Stance foot at the origin, swing foot just behind, COM at
    ``-(1 - epsilon) * l_des`` moving along the virtual slope.
    """
    x0 = -(1.0 - params.epsilon) * stone.l_des
    zt = params.z_tilde_star
    z0 = zt + stone.slope * x0
    L0 = momentum_from_energy(params.e_star, x0, zt, params.g)
    dx0 = L0 / zt
    dz0 = stone.slope * dx0
    lb = stone.l_des if back_step is None else back_step
    swing = np.array([-lb, -stone.slope * lb])
    theta = params.phi_other_f

    def posture(hip):
        q = np.zeros(rb.N_DOF)
        q[0:2], q[2] = hip, theta
        q[3:5] = rb.leg_ik(model, hip, (0.0, 0.0), theta)
        q[5:7] = rb.leg_ik(model, hip, swing, theta)
        return q

    target = np.array([x0, z0])
    hip = target - np.array([0.0, 0.1])
    for _ in range(200):
        q = posture(hip)
        com = rb.com_state(model, rb.kinematics(model, q, np.zeros(rb.N_DOF)))[0]
        err = target - com
        if np.abs(err).max() < 1e-13:
            break
        hip = hip + 0.5 * err
    else:
        raise ValueError("initial posture did not converge")
    q = posture(hip)

    kin = rb.kinematics(model, q, np.zeros(rb.N_DOF))
    _, _, Jc, _ = rb.com_state(model, kin)
    A = np.vstack((kin.jac[rb.STANCE_FOOT], np.eye(rb.N_DOF)[2], Jc,
                   kin.jac[rb.SWING_FOOT] - kin.jac[rb.STANCE_FOOT]))
    b = np.array([0.0, 0.0, 0.0, dx0, dz0, 0.0, 0.0])
    dq = np.linalg.solve(A, b)
    return q, dq


class Simulator:
    def __init__(self, model: rb.RobotModel, params: GaitParams, gains: ControllerGains,
                 terrain: Terrain, options: SimOptions | None = None):
        self.model = model
        self.params = params
        self.gains = gains
        self.terrain = terrain
        self.opt = options or SimOptions()
        self.controller = WalkingController(model, params, gains)
        self._C = model.point_coeffs
        self._S = model.angle_map
        self._m = model.masses
        self._I = model.inertias
        self.tau = np.zeros(rb.N_ACT)
        self.anchor = np.zeros(2)
        self.integrator = Dopri5(self._rhs, self.opt.rtol, self.opt.atol,
                                 h0=self.opt.dt_control)
        self.k = 0  # index of the current stance foothold

    def _rhs(self, t, y):
        ddq, _ = constrained_accel(y[:7], y[7:], self.tau, self._C, self._S, self._m,
                                   self._I, self.model.g, self.opt.contact_kp,
                                   self.opt.contact_kd, self.anchor)
        out = np.empty(14)
        out[:7] = y[7:]
        out[7:] = ddq
        return out

    def swing_height(self, q) -> float:
        return point_position(q, self._C, self._S, rb.SWING_FOOT)[1]

    def stone_from_foot(self, k: int, foot) -> StoneConfig | None:
        """Stone k (foothold k -> k+1) measured from the actual foot position."""
        if k >= len(self.terrain):
            return None
        d = self.terrain.foothold(k + 1) - np.asarray(foot)
        return StoneConfig(float(d[0]), float(d[1]))

    def _plan(self, q, dq) -> StepPlan:
        try:
            stone = self.stone_from_foot(self.k, self.anchor)
        except ValueError as e:
            # the foot landed where the next stone cannot be reached
            raise InfeasibleStep(str(e)) from e
        nxt = self.terrain.stone(self.k + 1)
        return self.controller.start_step(q, dq, stone, nxt)

    def integrate_to_event(self, q, dq, t, dt, armed: bool):
        """Advance one control period; returns (t, q, dq, hit)."""
        z_ground = self.terrain.foothold(self.k + 1)[1]
        guard = None
        if armed:
            guard = lambda y: self.swing_height(y[:7]) - z_ground
        t_end, y, hit = self.integrator.integrate(t, np.concatenate((q, dq)), t + dt, guard)
        return t_end, y[:7], y[7:], hit

    def handle_impact(self, q, dq):
        dq_plus = rb.plastic_impact(self.model, q, dq, "swing")
        q, dq = rb.relabel_legs(q, dq_plus)
        self.k += 1
        self.anchor = rb.kinematics(self.model, q, dq).pos[rb.STANCE_FOOT].copy()
        return q, dq

    def run(self, n_steps: int, q0=None, dq0=None) -> SimLog:
        opt, model, params = self.opt, self.model, self.params
        simlog = SimLog(requested_steps=n_steps)
        wall0 = time.perf_counter()
        if q0 is None:
            q, dq = initial_state(model, params, self.terrain.stone(0))
        else:
            q, dq = np.array(q0, float), np.array(dq0, float)
        self.k = 0
        self.anchor = rb.kinematics(model, q, dq).pos[rb.STANCE_FOOT].copy()
        t_global, t_step, t_last_impact = 0.0, 0.0, 0.0
        x_world_last = None
        try:
            if n_steps > 0:
                self._plan(q, dq)
        except InfeasibleStep as e:
            simlog.failure = f"infeasible first step: {e}"

        zt_floor = opt.fall_height_ratio * params.z_tilde_star
        while simlog.failure is None and len(simlog.steps) < n_steps:
            cmd, info = self.controller(q, dq, t_step)
            self.tau = cmd.tau
            simlog.max_solve_time = max(simlog.max_solve_time, cmd.solve_time)
            self._record(simlog, t_global, q, dq, cmd, info)
            if not np.all(np.isfinite(q)) or info.com.z_com < zt_floor:
                simlog.failure = f"fall: COM height {info.com.z_com:.3f} m at t={t_global:.3f}"
                break
            if t_step > opt.step_timeout:
                simlog.failure = f"no touchdown within {opt.step_timeout} s"
                break

            plan = self.controller.plan
            armed = t_step >= opt.guard_arm_phase * plan.T_s
            try:
                t_new, q_new, dq_new, hit = self.integrate_to_event(
                    q, dq, t_step, opt.dt_control, armed)
                if hit:
                    kin = rb.kinematics(model, q_new, dq_new)
                    if kin.vel[rb.SWING_FOOT, 1] >= 0:
                        # grazing touch: finish the period without the guard
                        t_new, q_new, dq_new, _ = self.integrate_to_event(
                            q_new, dq_new, t_new, t_step + opt.dt_control - t_new, False)
                        hit = False
            except IntegrationFailure as e:
                simlog.failure = f"integration failure: {e}"
                break
            t_global += t_new - t_step
            t_step = t_new
            q, dq = q_new, dq_new
            if not hit:
                continue

            pre = phase_state(model, kin)
            foot_before = self.anchor.copy()
            q, dq = self.handle_impact(q, dq)
            kin_post = rb.kinematics(model, q, dq)
            post = phase_state(model, kin_post)
            plan_new = None
            if self.k < len(self.terrain):
                try:
                    plan_new = self._plan(q, dq)
                except InfeasibleStep as e:
                    simlog.failure = f"infeasible step {self.k}: {e}"
            zt_plus = plan_new.z_tilde if plan_new is not None else post.com.z_com
            E_plus = orbital_energy(post.reduced, LipParams(max(zt_plus, 1e-6), model.g))
            E_plus_slope = np.nan
            if plan_new is not None:
                zt_slope = virtual_slope_height(post.com.x_com, post.com.z_com, plan_new.stone)
                if zt_slope > 0:
                    E_plus_slope = orbital_energy(post.reduced, LipParams(zt_slope, model.g))
            com_world = rb.com_state(model, kin_post)[0][0]
            duration = t_global - t_last_impact
            speed = np.nan if x_world_last is None else (com_world - x_world_last) / duration
            l_act, h_act = self.anchor - foot_before
            simlog.steps.append(StepRecord(
                step=len(simlog.steps), t_impact=t_global, duration=duration, T_s=plan.T_s,
                u_des=info.u_des, dz_minus=pre.com.dz_com,
                dx_minus=pre.com.dx_com, x_minus=pre.reduced.x_com, L_minus=pre.reduced.L_y,
                x_plus=post.reduced.x_com, dz_plus=post.com.dz_com, L_plus=post.reduced.L_y,
                E_plus=E_plus, E_plus_slope=float(E_plus_slope), l_des=plan.stone.l_des, h_des=plan.stone.h_des,
                l_actual=float(l_act), h_actual=float(h_act), viable=plan.viable,
                speed=float(speed)))
            x_world_last = com_world
            t_last_impact = t_global
            t_step = 0.0
            if plan_new is None and simlog.failure is None and len(simlog.steps) < n_steps:
                simlog.failure = "ran out of terrain"

        self._record(simlog, t_global, q, dq, None, None)
        simlog.qp_failures = self.controller.tsc.failures
        simlog.mpc_fallbacks = self.controller.mpc.infeasible_count
        simlog.wall_time = time.perf_counter() - wall0
        return simlog

    def _record(self, simlog: SimLog, t, q, dq, cmd, info):
        """Append one sample; ``info`` is None for the final state."""
        if info is None:
            kin = rb.kinematics(self.model, q, dq)
            cur = phase_state(self.model, kin)
            reduced, com = cur.reduced, cur.com
            y = output_map(self.model, kin)[0]
        else:
            kin, reduced, com, y = info.kin, info.reduced, info.com, info.y_act
        plan = self.controller.plan
        zt = com.z_com
        if plan is not None:
            zt = chord_height(com.x_com, com.z_com, plan.stone, self.params)
        nan4 = np.full(4, np.nan)
        simlog.t.append(t)
        simlog.step_index.append(len(simlog.steps))
        simlog.q.append(q.copy())
        simlog.dq.append(dq.copy())
        simlog.y_act.append(np.array(y))
        simlog.y_des.append(info.y_des.y.copy() if info is not None else nan4)
        simlog.tau.append(cmd.tau.copy() if cmd is not None else nan4)
        simlog.F.append(np.array(cmd.F) if cmd is not None else np.full(2, np.nan))
        simlog.x_com.append(reduced.x_com)
        simlog.L_y.append(reduced.L_y)
        simlog.E.append(orbital_energy(reduced, LipParams(max(zt, 1e-6), self.model.g)))
        simlog.u_des.append(info.u_des if info is not None else np.nan)
        simlog.u_z0.append(info.u_z0 if info is not None else np.nan)
        simlog.stance_drift.append(float(np.abs(kin.pos[rb.STANCE_FOOT] - self.anchor).max()))
        target = self.terrain.foothold(min(self.k + 1, len(self.terrain)))
        simlog.swing_clearance.append(float(kin.pos[rb.SWING_FOOT, 1] - target[1]))


def run_scenario(terrain: Terrain, model: rb.RobotModel, params: GaitParams,
                 gains: ControllerGains, n_steps: int,
                 options: SimOptions | None = None) -> SimLog:
    return Simulator(model, params, gains, terrain, options).run(n_steps)
