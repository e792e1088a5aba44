"""Per-step gait planning and the desired output trajectories.

At every touchdown a ``StepPlan`` is built from the post-impact state: the
step duration comes from the LIP time-to-impact, swing-foot and torso
trajectories are degree-5 Bezier curves in the phase ``s = t / T_s``, and
the vertical COM target is the pre-impact velocity ``u_des`` that makes the
next post-impact orbital energy equal ``E*``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import comb

from .reduced_models import (
    GRAVITY,
    MAX_STEP_DURATION,
    ComKinematics,
    EnergyTarget,
    LipParams,
    NegativeRadicand,
    NonPositiveMomentum,
    ReducedState,
    StoneConfig,
    Unreachable,
    lip_flow,
    momentum_from_energy,
    orbital_energy,
    time_to_impact,
    viable_post_impact,
)

log = logging.getLogger(__name__)

_BINOM5 = comb(5, np.arange(6))
_BINOM4 = comb(4, np.arange(5))
_BINOM3 = comb(3, np.arange(4))


class InfeasibleStep(RuntimeError):
    pass


@dataclass(frozen=True)
class GaitParams:
    epsilon: float = 0.6
    e_star: float = 0.5
    z_tilde_star: float = 0.5
    z_sw_max: float = 0.08
    z_sw_neg: float = -0.005
    phi_other_f: float = 0.0
    blend_weight: float = 0.5
    # relative band used only for the viability flag
    energy_band: tuple[float, float] = (0.5, 1.5)
    use_preview: bool = True
    # swing timing is re-solved from the current state until this phase
    retime_until: float = 0.6
    g: float = GRAVITY

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.e_star > 0:
            raise ValueError("e_star must be positive")
        if not self.z_tilde_star > 0:
            raise ValueError("z_tilde_star must be positive")
        if not self.z_sw_max > 0:
            raise ValueError("z_sw_max must be positive")
        if not self.z_sw_neg < 0:
            raise ValueError("z_sw_neg must be negative")
        if not 0 <= self.blend_weight <= 1:
            raise ValueError("blend_weight must lie in [0, 1]")
        if not 0 <= self.retime_until <= 1:
            raise ValueError("retime_until must lie in [0, 1]")
        object.__setattr__(self, "energy_band", tuple(self.energy_band))

    @property
    def energy_target(self) -> EnergyTarget:
        lo, hi = self.energy_band
        return EnergyTarget(self.e_star, lo * self.e_star, hi * self.e_star)


@dataclass(frozen=True)
class PhaseState:
    """The robot quantities the planner reads, all relative to the stance foot."""

    reduced: ReducedState
    com: ComKinematics
    x_sw: float
    z_sw: float
    phi: float


@dataclass(frozen=True)
class StepPlan:
    T_s: float
    stone: StoneConfig
    stone_next: StoneConfig | None
    L_des: float
    phi_f: float
    z_com_f: float
    b_h: np.ndarray
    b_v: np.ndarray
    b_phi: np.ndarray
    post: PhaseState
    z_tilde: float
    t_touchdown: float
    viable: bool = True

    @property
    def alpha_f(self) -> tuple[float, float, float, float]:
        return (self.phi_f, self.z_com_f, self.stone.l_des, self.stone.h_des)

    @property
    def x_sw_plus(self) -> float:
        return self.post.x_sw


@dataclass
class OutputSet:
    """Output vector [torso pitch, z_com, x_sw, z_sw] and its time derivatives."""

    y: np.ndarray
    dy: np.ndarray = field(default_factory=lambda: np.zeros(4))
    ddy: np.ndarray = field(default_factory=lambda: np.zeros(4))


@dataclass(frozen=True)
class PreImpactEstimate:
    x_com: float
    L_y: float
    z_com: float
    dx_com: float
    # vertical velocity dx_com was evaluated at, and d(dx_com)/d(dz)
    dz_com: float = 0.0
    dx_dz: float = 0.0


def bezier_eval(coeffs, s: float) -> tuple[float, float, float]:
    """Degree-5 Bezier value and first two phase derivatives (s clamped to [0, 1])."""
    c = np.asarray(coeffs, float)
    s = min(max(s, 0.0), 1.0)
    r = 1.0 - s
    sp = s ** np.arange(6)
    rp = r ** np.arange(6)[::-1]
    val = float(c @ (_BINOM5 * sp * rp))
    d1 = np.diff(c)
    dval = 5.0 * float(d1 @ (_BINOM4 * sp[:5] * (r ** np.arange(5)[::-1])))
    d2 = np.diff(d1)
    ddval = 20.0 * float(d2 @ (_BINOM3 * sp[:4] * (r ** np.arange(4)[::-1])))
    return val, dval, ddval


def _touchdown_phase(b_v, h_des) -> float:
    """Last phase in (0.5, 1] where the desired swing height descends through h_des."""
    f = lambda s: bezier_eval(b_v, s)[0] - h_des
    grid = np.linspace(0.5, 1.0, 101)
    vals = np.array([f(s) for s in grid])
    for i in range(len(grid) - 1, 0, -1):
        if vals[i - 1] > 0 >= vals[i]:
            return brentq(f, grid[i - 1], grid[i], xtol=1e-14)
    return 1.0


def plan_step(post: PhaseState, stone: StoneConfig, stone_next: StoneConfig | None,
              params: GaitParams) -> StepPlan:
    p = params
    z_tilde = chord_height(post.com.x_com, post.com.z_com, stone, p)
    if z_tilde <= 0:
        raise InfeasibleStep(f"COM below the virtual slope (z_tilde={z_tilde:.3f})")
    x_target = p.epsilon * stone.l_des
    try:
        t_lip = time_to_impact(x_target, z_tilde, post.reduced.x_com, post.reduced.L_y, p.g)
    except (Unreachable, NonPositiveMomentum) as e:
        raise InfeasibleStep(str(e)) from e
    apex = max(0.0, stone.h_des) + p.z_sw_max
    b_v = np.array([post.z_sw, apex, apex, apex, stone.h_des, stone.h_des + p.z_sw_neg])
    # stretch the swing so the foot reaches the stone when the LIP reaches x_target
    s_td = _touchdown_phase(b_v, stone.h_des)
    T_s = t_lip / s_td
    if not 0 < T_s <= MAX_STEP_DURATION:
        raise InfeasibleStep(f"step duration {T_s:.4g} s outside (0, {MAX_STEP_DURATION}]")

    z_com_f = p.z_tilde_star + p.epsilon * stone.h_des
    est = PreImpactEstimate(x_target, float("nan"), z_com_f, float("nan"))
    L_des = desired_momentum(est, stone, stone_next, p)

    lip = LipParams(z_tilde, p.g)
    viable = viable_post_impact(post.reduced, lip, p.energy_target)
    if not viable:
        log.warning("post-impact state outside viable set: x=%.3f L=%.3f E=%.3f",
                    post.reduced.x_com, post.reduced.L_y, orbital_energy(post.reduced, lip))

    b_h = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    b_phi = np.array([post.phi] * 3 + [p.phi_other_f] * 3)
    t_td = t_lip
    return StepPlan(T_s, stone, stone_next, L_des, p.phi_other_f, z_com_f, b_h, b_v,
                    b_phi, post, z_tilde, t_td, viable)


def chord_slope(x: float, z: float, stone: StoneConfig, params: GaitParams) -> float:
    """Slope of the line from COM (x, z) to the planned pre-impact COM on ``stone``."""
    x_f = params.epsilon * stone.l_des
    z_f = params.z_tilde_star + params.epsilon * stone.h_des
    if x_f - x < 0.1 * stone.l_des:
        return stone.slope
    return (z_f - z) / (x_f - x)


def chord_height(x: float, z: float, stone: StoneConfig, params: GaitParams) -> float:
    """LIP height of the COM at (x, z) for a step onto ``stone``.

    A COM moving on a straight line ``z = a + k x`` obeys the LIP with height
    ``a``. The line used is the chord to the planned pre-impact COM, which
    on uniform stairs is the virtual slope through the footholds.
    """
    return z - chord_slope(x, z, stone, params) * x


def lip_height(current: PhaseState, plan: StepPlan, params: GaitParams) -> float:
    """LIP height used for timing and prediction during a step."""
    zt = chord_height(current.com.x_com, current.com.z_com, plan.stone, params)
    return zt if zt > 0 else params.z_tilde_star


def retime(plan: StepPlan, current: PhaseState, t: float, params: GaitParams) -> StepPlan:
    """Re-solve the LIP arrival time at ``epsilon * l_des`` from the current state.

    The swing schedule is stretched so the foot still reaches the stone at the
    predicted arrival; the plan is returned unchanged when the LIP from the
    current state cannot reach the target.
    """
    x_target = params.epsilon * plan.stone.l_des
    if current.reduced.x_com >= x_target:
        return plan
    zt = lip_height(current, plan, params)
    try:
        remaining = time_to_impact(x_target, zt, current.reduced.x_com,
                                   current.reduced.L_y, params.g)
    except (Unreachable, NonPositiveMomentum):
        return plan
    t_td = t + remaining
    s_td = plan.t_touchdown / plan.T_s
    return replace(plan, T_s=t_td / s_td, t_touchdown=t_td)


def phase(t: float, plan: StepPlan) -> float:
    return min(max(t / plan.T_s, 0.0), 1.0)


def desired_outputs(t: float, plan: StepPlan, params: GaitParams | None = None) -> OutputSet:
    """Desired outputs at step time t; the z_com entry is filled in by the MPC."""
    T = plan.T_s
    s = t / T
    y = np.empty(4)
    dy = np.zeros(4)
    ddy = np.zeros(4)
    ph = bezier_eval(plan.b_phi, s)
    bh = bezier_eval(plan.b_h, s)
    bv = bezier_eval(plan.b_v, s)
    span = plan.stone.l_des - plan.post.x_sw
    y[0] = ph[0]
    y[1] = plan.z_com_f
    y[2] = plan.post.x_sw + bh[0] * span
    y[3] = bv[0]
    if s < 1.0:
        dy[0], ddy[0] = ph[1] / T, ph[2] / T**2
        dy[2], ddy[2] = bh[1] * span / T, bh[2] * span / T**2
        dy[3], ddy[3] = bv[1] / T, bv[2] / T**2
    return OutputSet(y, dy, ddy)


def blend_weight(t: float, plan: StepPlan, params: GaitParams) -> float:
    w0 = params.blend_weight
    return w0 + (1.0 - w0) * phase(t, plan)


def estimate_preimpact(current: PhaseState, t: float, plan: StepPlan,
                       params: GaitParams) -> PreImpactEstimate:
    """Predict the pre-impact COM state from the current one.

    (x, L) follow the LIP at ``lip_height`` over the remaining time to
    touchdown; height and forward velocity blend the planned pre-impact
    values with the current ones, trusting the plan more as the step
    progresses.

    The planned forward velocity inverts ``L = z dx - x dz + L_c`` at the
    predicted pre-impact point with the centroidal momentum ``L_c`` held at
    its current value. It depends linearly on the pre-impact vertical
    velocity; ``dx_com`` is evaluated at the current one and ``dx_dz`` holds
    the slope so ``compute_u_des`` can solve for a consistent pair.
    On a flat LIP this reduces to ``L / z``.
    """
    w = blend_weight(t, plan, params)
    zt = lip_height(current, plan, params)
    remaining = max(plan.t_touchdown - t, 0.0)
    pre = lip_flow(current.reduced, LipParams(zt, params.g), remaining)
    com = current.com
    z_hat = w * plan.z_com_f + (1.0 - w) * com.z_com
    dx_plan = (pre.L_y - com.L_com_y + pre.x_com * com.dz_com) / z_hat
    dx_hat = w * dx_plan + (1.0 - w) * com.dx_com
    return PreImpactEstimate(pre.x_com, pre.L_y, z_hat, dx_hat, com.dz_com,
                             w * pre.x_com / z_hat)


def desired_momentum(est: PreImpactEstimate, stone: StoneConfig,
                     stone_next: StoneConfig | None, params: GaitParams) -> float:
    x_plus = est.x_com - stone.l_des
    zt_plus = est.z_com - stone.h_des
    if stone_next is not None and params.use_preview:
        zt_plus -= chord_slope(x_plus, zt_plus, stone_next, params) * x_plus
    if zt_plus <= 0:
        zt_plus = params.z_tilde_star
    try:
        return momentum_from_energy(params.e_star, x_plus, zt_plus, params.g)
    except NegativeRadicand as e:
        raise InfeasibleStep(str(e)) from e


def discrete_input(L_des: float, L_minus: float, dx_minus: float, stone: StoneConfig) -> float:
    """Pre-impact vertical COM velocity that makes the post-impact momentum ``L_des``.

    Inverts the reduced impact map ``L+ = L- + l dz- - h dx-`` for ``dz-``.
    """
    return (L_des - L_minus + stone.h_des * dx_minus) / stone.l_des


def compute_u_des(est: PreImpactEstimate, plan: StepPlan,
                  params: GaitParams) -> tuple[float, float]:
    """Desired pre-impact vertical COM velocity and the momentum it targets.

    The forward-velocity estimate is taken at ``dz = u_des`` itself, which
    keeps the result consistent when ``est.dx_dz`` is nonzero.
    """
    L_des = desired_momentum(est, plan.stone, plan.stone_next, params)
    l, h = plan.stone.l_des, plan.stone.h_des
    denom = l - h * est.dx_dz
    if denom < 0.25 * l:
        # nearly singular coupling; use the estimate as evaluated
        return discrete_input(L_des, est.L_y, est.dx_com, plan.stone), L_des
    dx0 = est.dx_com - est.dx_dz * est.dz_com
    return (L_des - est.L_y + h * dx0) / denom, L_des
