"""Task-space QP controller.

Decision variables are ``[ddq (7), tau (4), F (2)]``. The cost is the
Q-weighted error between achieved and target output accelerations, subject
to the stance-constrained equations of motion, a linearized friction cone
and torque limits.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import rigid_body as rb
from .gait_synthesis import OutputSet
from .qp_solver import ActiveSetSolver, QpProblem, Status

log = logging.getLogger(__name__)

N_OUT = 4
N_VAR = rb.N_DOF + rb.N_ACT + 2
Z_COM = 1


def _vec4(v):
    a = np.asarray(v, float)
    return np.full(N_OUT, float(a)) if a.ndim == 0 else a.copy()


@dataclass(frozen=True)
class ControllerGains:
    kp: np.ndarray = field(default_factory=lambda: np.full(N_OUT, 400.0))
    kd: np.ndarray = field(default_factory=lambda: np.full(N_OUT, 40.0))
    q_weight: np.ndarray = field(default_factory=lambda: np.ones(N_OUT))
    tau_lb: np.ndarray = field(default_factory=lambda: np.full(rb.N_ACT, -150.0))
    tau_ub: np.ndarray = field(default_factory=lambda: np.full(rb.N_ACT, 150.0))
    mu: float = 1.0

    def __post_init__(self):
        for name in ("kp", "kd", "q_weight", "tau_lb", "tau_ub"):
            object.__setattr__(self, name, _vec4(getattr(self, name)))
        if np.any(self.kp <= 0) or np.any(self.kd <= 0) or np.any(self.q_weight <= 0):
            raise ValueError("gains and output weights must be positive")
        if np.any(self.tau_lb > self.tau_ub):
            raise ValueError("tau_lb must not exceed tau_ub")
        if not self.mu > 0:
            raise ValueError("friction coefficient must be positive")

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in self.__dict__.items()}


@dataclass
class ControlCommand:
    tau: np.ndarray
    ddq: np.ndarray
    F: np.ndarray
    status: Status = Status.OPTIMAL
    solve_time: float = 0.0
    y_target: np.ndarray | None = None
    y_act: np.ndarray | None = None
    dy_act: np.ndarray | None = None


def friction_pyramid(mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Rows for F_z >= 0 and |F_x| <= mu F_z, as A F <= b."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    A = np.array([[0.0, -1.0], [1.0, -mu], [-1.0, -mu]])
    return A, np.zeros(3)


def output_map(model: rb.RobotModel, kin: rb.Kinematics):
    """Actual outputs, their velocities, Jacobian (4x7) and Jdot*dq."""
    pc, vc, Jc, jdc = rb.com_state(model, kin)
    st, sw = rb.STANCE_FOOT, rb.SWING_FOOT
    J = np.empty((N_OUT, rb.N_DOF))
    jd = np.empty(N_OUT)
    y = np.empty(N_OUT)
    J[0] = 0.0
    J[0, 2] = 1.0
    jd[0] = 0.0
    y[0] = kin.angles[rb.TORSO]
    J[1] = Jc[1] - kin.jac[st, 1]
    jd[1] = jdc[1] - kin.jdqd[st, 1]
    y[1] = pc[1] - kin.pos[st, 1]
    J[2] = kin.jac[sw, 0] - kin.jac[st, 0]
    jd[2] = kin.jdqd[sw, 0] - kin.jdqd[st, 0]
    y[2] = kin.pos[sw, 0] - kin.pos[st, 0]
    J[3] = kin.jac[sw, 1] - kin.jac[st, 1]
    jd[3] = kin.jdqd[sw, 1] - kin.jdqd[st, 1]
    y[3] = kin.pos[sw, 1] - kin.pos[st, 1]
    return y, J, jd


def target_accelerations(y, dy, y_des: OutputSet, u_z0: float, gains: ControllerGains):
    err = y - y_des.y
    derr = dy - y_des.dy
    ddy = y_des.ddy - gains.kp * err - gains.kd * derr
    # vertical COM is replanned from the measured state every cycle
    ddy[Z_COM] = u_z0
    return ddy


def build_qp(model: rb.RobotModel, q, dq, ddy_target, gains: ControllerGains,
             kin: rb.Kinematics | None = None, outputs=None) -> QpProblem:
    if kin is None:
        kin = rb.kinematics(model, q, dq)
    n, m = rb.N_DOF, rb.N_ACT
    _, Jy, jdy = outputs if outputs is not None else output_map(model, kin)
    D = rb.mass_matrix(model, q, kin)
    H = rb.bias_forces(model, q, dq, kin)
    Jc = kin.jac[rb.STANCE_FOOT]
    jdc = kin.jdqd[rb.STANCE_FOOT]

    Qy = gains.q_weight[:, None] * Jy
    Hq = np.zeros((N_VAR, N_VAR))
    Hq[:n, :n] = 2.0 * Jy.T @ Qy
    gq = np.zeros(N_VAR)
    gq[:n] = 2.0 * Qy.T @ (jdy - ddy_target)

    A_eq = np.zeros((n + 2, N_VAR))
    A_eq[:n, :n] = D
    A_eq[:n, n:n + m] = -model.actuation
    A_eq[:n, n + m:] = -Jc.T
    A_eq[n:, :n] = Jc
    b_eq = np.concatenate((-H, -jdc))

    A_grf, b_grf = friction_pyramid(gains.mu)
    A_in = np.zeros((3, N_VAR))
    A_in[:, n + m:] = A_grf

    lb = np.full(N_VAR, -np.inf)
    ub = np.full(N_VAR, np.inf)
    lb[n:n + m] = gains.tau_lb
    ub[n:n + m] = gains.tau_ub
    return QpProblem(Hq, gq, A_eq, b_eq, A_in, b_grf, lb, ub)


class TaskSpaceController:
    """Holds the warm-started solver and the last good torque."""

    def __init__(self, model: rb.RobotModel, gains: ControllerGains):
        self.model = model
        self.gains = gains
        self.solver = ActiveSetSolver()
        self.last_tau = np.zeros(rb.N_ACT)
        self.failures = 0

    def compute(self, q, dq, y_des: OutputSet, u_z0: float,
                kin: rb.Kinematics | None = None) -> ControlCommand:
        return compute_control(q, dq, self.model, y_des, u_z0, self.gains, self, kin)


def compute_control(q, dq, model: rb.RobotModel, y_des: OutputSet, u_z0: float,
                    gains: ControllerGains, controller: TaskSpaceController | None = None,
                    kin: rb.Kinematics | None = None) -> ControlCommand:
    if kin is None:
        kin = rb.kinematics(model, q, dq)
    outputs = output_map(model, kin)
    y, Jy, _ = outputs
    dy = Jy @ dq
    ddy = target_accelerations(y, dy, y_des, u_z0, gains)
    prob = build_qp(model, q, dq, ddy, gains, kin, outputs)
    t0 = time.perf_counter()
    if controller is None:
        sol = ActiveSetSolver().solve(prob)
    else:
        sol = controller.solver.solve_warm(prob)
    elapsed = time.perf_counter() - t0
    n, m = rb.N_DOF, rb.N_ACT
    if sol.status is not Status.OPTIMAL:
        last = controller.last_tau if controller is not None else np.zeros(m)
        tau = np.clip(last, gains.tau_lb, gains.tau_ub)
        if controller is not None:
            controller.failures += 1
            controller.solver.active_set = ()
        log.warning("task-space QP %s; holding previous torque", sol.status.value)
        ddq, F = rb.constrained_dynamics(model, q, dq, tau, kin=kin)
        return ControlCommand(tau, ddq, F, sol.status, elapsed, ddy, y, dy)
    tau = np.clip(sol.x[n:n + m], gains.tau_lb, gains.tau_ub)
    if controller is not None:
        controller.last_tau = tau
    return ControlCommand(tau, sol.x[:n], sol.x[n + m:], sol.status, elapsed, ddy, y, dy)
