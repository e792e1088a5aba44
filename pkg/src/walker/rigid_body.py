"""Planar five-link biped: kinematics, floating-base dynamics and plastic impact.

Generalized coordinates (n = 7)::

    q = [hip x, hip z, torso pitch, stance hip, stance knee, swing hip, swing knee]

Pitch angles follow the right-hand rule about +y with x forward and z up, so
a positive pitch tilts the torso forward and swings a hanging leg backward.
Hip angles are measured relative to the torso, knee angles relative to the
thigh. Every link's absolute angle is a fixed linear combination of q.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .reduced_models import ComKinematics, ReducedState

log = logging.getLogger(__name__)

N_DOF = 7
N_ACT = 4

# link order used by all per-link arrays
TORSO, ST_THIGH, ST_SHIN, SW_THIGH, SW_SHIN = range(5)

# point rows in Kinematics.pos / .jac / .jdqd
STANCE_FOOT, SWING_FOOT, STANCE_KNEE, SWING_KNEE = 5, 6, 7, 8

FRAMES = ("stance", "swing", "com", "torso")


class SingularContact(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class RobotModel:
    torso_mass: float = 10.0
    torso_length: float = 0.5
    torso_com: float = 0.25
    thigh_mass: float = 2.0
    thigh_length: float = 0.4
    thigh_com: float = 0.2
    shin_mass: float = 1.0
    shin_length: float = 0.4
    shin_com: float = 0.2
    # None -> slender rod m*l^2/12
    torso_inertia: float | None = None
    thigh_inertia: float | None = None
    shin_inertia: float | None = None
    g: float = 9.81

    def __post_init__(self):
        for name in ("torso", "thigh", "shin"):
            m = getattr(self, f"{name}_mass")
            l = getattr(self, f"{name}_length")
            if not (m > 0 and l > 0):
                raise ValueError(f"{name} mass and length must be positive")
            if getattr(self, f"{name}_inertia") is None:
                object.__setattr__(self, f"{name}_inertia", m * l**2 / 12.0)
            if not getattr(self, f"{name}_inertia") > 0:
                raise ValueError(f"{name} inertia must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @cached_property
    def masses(self) -> np.ndarray:
        return np.array([self.torso_mass, self.thigh_mass, self.shin_mass,
                         self.thigh_mass, self.shin_mass])

    @cached_property
    def inertias(self) -> np.ndarray:
        return np.array([self.torso_inertia, self.thigh_inertia, self.shin_inertia,
                         self.thigh_inertia, self.shin_inertia])

    @cached_property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @cached_property
    def leg_length(self) -> float:
        return self.thigh_length + self.shin_length

    @cached_property
    def angle_map(self) -> np.ndarray:
        """5x7 map from q to absolute link angles."""
        S = np.zeros((5, N_DOF))
        S[:, 2] = 1.0
        S[ST_THIGH, 3] = S[ST_SHIN, 3] = S[ST_SHIN, 4] = 1.0
        S[SW_THIGH, 5] = S[SW_SHIN, 5] = S[SW_SHIN, 6] = 1.0
        return S

    @cached_property
    def point_coeffs(self) -> np.ndarray:
        """Signed lengths along each link's up-vector, one row per tracked point.

        A point's position is ``hip + sum_k C[p, k] * (sin a_k, cos a_k)``.
        """
        lt, ls = self.thigh_length, self.shin_length
        C = np.zeros((9, 5))
        C[TORSO, TORSO] = self.torso_com
        for th, sh, foot, knee in ((ST_THIGH, ST_SHIN, STANCE_FOOT, STANCE_KNEE),
                                   (SW_THIGH, SW_SHIN, SWING_FOOT, SWING_KNEE)):
            C[th, th] = -self.thigh_com
            C[sh, th] = -lt
            C[sh, sh] = -self.shin_com
            C[foot, th] = -lt
            C[foot, sh] = -ls
            C[knee, th] = -lt
        return C

    @cached_property
    def actuation(self) -> np.ndarray:
        B = np.zeros((N_DOF, N_ACT))
        B[3:, :] = np.eye(N_ACT)
        return B


class Kinematics(NamedTuple):
    pos: np.ndarray      # (9, 2) world positions of link COMs, feet, knees
    vel: np.ndarray      # (9, 2)
    jac: np.ndarray      # (9, 2, 7)
    jdqd: np.ndarray     # (9, 2) Jdot @ dq
    angles: np.ndarray   # (5,) absolute link angles
    rates: np.ndarray    # (5,)


def kinematics(model: RobotModel, q, dq) -> Kinematics:
    S = model.angle_map
    C = model.point_coeffs
    a = S @ q
    ad = S @ dq
    sa, ca = np.sin(a), np.cos(a)
    U = np.stack((sa, ca), axis=1)
    Up = np.stack((ca, -sa), axis=1)
    pos = q[:2] + C @ U
    jac = np.einsum("pk,kd,kj->pdj", C, Up, S)
    jac[:, 0, 0] += 1.0
    jac[:, 1, 1] += 1.0
    vel = jac @ dq
    jdqd = -C @ (U * (ad * ad)[:, None])
    return Kinematics(pos, vel, jac, jdqd, a, ad)


def mass_matrix(model: RobotModel, q, kin: Kinematics | None = None) -> np.ndarray:
    if kin is None:
        kin = kinematics(model, q, np.zeros(N_DOF))
    J = kin.jac[:5]
    S = model.angle_map
    D = np.einsum("p,pdi,pdj->ij", model.masses, J, J)
    D += S.T @ (model.inertias[:, None] * S)
    return 0.5 * (D + D.T)


def gravity_vector(model: RobotModel, q, kin: Kinematics | None = None) -> np.ndarray:
    if kin is None:
        kin = kinematics(model, q, np.zeros(N_DOF))
    return model.g * (model.masses @ kin.jac[:5, 1, :])


def bias_forces(model: RobotModel, q, dq, kin: Kinematics | None = None) -> np.ndarray:
    """Coriolis, centrifugal and gravity terms H(q, dq)."""
    if kin is None:
        kin = kinematics(model, q, dq)
    J = kin.jac[:5]
    m = model.masses
    # link rotations are planar, so only translational Jdot terms survive
    h = np.einsum("p,pdi,pd->i", m, J, kin.jdqd[:5])
    return h + model.g * (m @ J[:, 1, :])


def _frame_row(frame: str) -> int:
    try:
        return {"stance": STANCE_FOOT, "swing": SWING_FOOT}[frame]
    except KeyError:
        raise ValueError(f"contact frame must be 'stance' or 'swing', got {frame!r}")


def contact_jacobian(model: RobotModel, q, dq, frame: str = "stance",
                     kin: Kinematics | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Foot Jacobian (2x7) and the drift term Jdot @ dq."""
    row = _frame_row(frame)
    if kin is None:
        kin = kinematics(model, q, dq)
    return kin.jac[row].copy(), kin.jdqd[row].copy()


def com_state(model: RobotModel, kin: Kinematics):
    """World COM position, velocity, Jacobian and Jdot*dq."""
    w = model.masses / model.total_mass
    p = w @ kin.pos[:5]
    v = w @ kin.vel[:5]
    J = np.einsum("p,pdj->dj", w, kin.jac[:5])
    jd = w @ kin.jdqd[:5]
    return p, v, J, jd


def angular_momentum_about(model: RobotModel, kin: Kinematics, point, point_vel=(0.0, 0.0)) -> float:
    """Mass-normalized y angular momentum about a point (per-link sum)."""
    r = kin.pos[:5] - np.asarray(point)
    v = kin.vel[:5] - np.asarray(point_vel)
    m = model.masses
    L = m @ (r[:, 1] * v[:, 0] - r[:, 0] * v[:, 1]) + model.inertias @ kin.rates
    return float(L / model.total_mass)


def com_kinematics(model: RobotModel, q, dq, kin: Kinematics | None = None):
    """COM relative to the stance foot and the centroidal momentum term.

    Returns a ``ComKinematics`` whose ``L_com_y`` is the mass-normalized
    centroidal angular momentum.
    """
    if kin is None:
        kin = kinematics(model, q, dq)
    p, v, _, _ = com_state(model, kin)
    foot, foot_v = kin.pos[STANCE_FOOT], kin.vel[STANCE_FOOT]
    r = p - foot
    rv = v - foot_v
    L_centroidal = angular_momentum_about(model, kin, p, v)
    return ComKinematics(float(r[0]), float(r[1]), float(rv[0]), float(rv[1]),
                         L_centroidal)


def reduced_state(model: RobotModel, q, dq, kin: Kinematics | None = None):
    """(x_com, L_y) about the stance foot."""
    if kin is None:
        kin = kinematics(model, q, dq)
    k = com_kinematics(model, q, dq, kin)
    L = k.z_com * k.dx_com - k.x_com * k.dz_com + k.L_com_y
    return ReducedState(k.x_com, L)


def swing_foot_relative(kin: Kinematics) -> tuple[float, float]:
    d = kin.pos[SWING_FOOT] - kin.pos[STANCE_FOOT]
    return float(d[0]), float(d[1])


def kinetic_energy(model: RobotModel, q, dq) -> float:
    return 0.5 * float(dq @ mass_matrix(model, q) @ dq)


def potential_energy(model: RobotModel, q) -> float:
    kin = kinematics(model, q, np.zeros(N_DOF))
    return model.g * float(model.masses @ kin.pos[:5, 1])


def constrained_dynamics(model: RobotModel, q, dq, tau, stabilization=(0.0, 0.0),
                         anchor=None, kin: Kinematics | None = None):
    """Stance-constrained forward dynamics; returns (ddq, F).

    ``stabilization = (kp, kd)`` adds Baumgarte feedback pulling the stance
    foot back to ``anchor``; zero gains give the exact holonomic constraint.
    """
    if kin is None:
        kin = kinematics(model, q, dq)
    D = mass_matrix(model, q, kin)
    H = bias_forces(model, q, dq, kin)
    J = kin.jac[STANCE_FOOT]
    rhs_c = -kin.jdqd[STANCE_FOOT]
    kp, kd = stabilization
    if kd:
        rhs_c = rhs_c - kd * kin.vel[STANCE_FOOT]
    if kp and anchor is not None:
        rhs_c = rhs_c - kp * (kin.pos[STANCE_FOOT] - anchor)
    K = np.zeros((N_DOF + 2, N_DOF + 2))
    K[:N_DOF, :N_DOF] = D
    K[:N_DOF, N_DOF:] = -J.T
    K[N_DOF:, :N_DOF] = J
    rhs = np.concatenate((model.actuation @ tau - H, rhs_c))
    sol = np.linalg.solve(K, rhs)
    return sol[:N_DOF], sol[N_DOF:]


def plastic_impact(model: RobotModel, q, dq_minus, new_stance: str = "swing") -> np.ndarray:
    """Post-impact velocity for an instantaneous plastic touchdown of ``new_stance``."""
    row = _frame_row(new_stance)
    kin = kinematics(model, q, dq_minus)
    J = kin.jac[row]
    if np.linalg.matrix_rank(J) < 2:
        raise SingularContact("impact Jacobian is rank deficient")
    D = mass_matrix(model, q, kin)
    K = np.zeros((N_DOF + 2, N_DOF + 2))
    K[:N_DOF, :N_DOF] = D
    K[:N_DOF, N_DOF:] = -J.T
    K[N_DOF:, :N_DOF] = J
    rhs = np.concatenate((D @ dq_minus, np.zeros(2)))
    dq_plus = np.linalg.solve(K, rhs)[:N_DOF]

    other = STANCE_FOOT if row == SWING_FOOT else SWING_FOOT
    v_old = kinematics(model, q, dq_plus).vel[other]
    if v_old[1] < 0:
        log.warning("trailing foot would not lift off after impact (vz=%.3g)", v_old[1])
    return dq_plus


def relabel_legs(q, dq):
    """Swap stance and swing joint coordinates."""
    perm = [0, 1, 2, 5, 6, 3, 4]
    return np.asarray(q)[perm].copy(), np.asarray(dq)[perm].copy()


def leg_ik(model: RobotModel, hip, foot, torso_pitch: float) -> tuple[float, float]:
    """Hip and knee angles placing ``foot`` for a given hip position, knee forward."""
    d = np.asarray(foot, float) - np.asarray(hip, float)
    r = float(np.hypot(*d))
    l1, l2 = model.thigh_length, model.shin_length
    if not abs(l1 - l2) < r < l1 + l2:
        raise ValueError(f"foot out of reach (distance {r:.3f} m)")
    beta = np.arctan2(-d[0], -d[1])
    g1 = np.arccos((l1**2 + r**2 - l2**2) / (2 * l1 * r))
    g2 = np.arccos((l2**2 + r**2 - l1**2) / (2 * l2 * r))
    a_thigh = beta - g1
    a_shin = beta + g2
    return float(a_thigh - torso_pitch), float(a_shin - a_thigh)
