"""Linear inverted pendulum (LIP) and the underactuated hybrid model of the robot.

State convention: ``x_com`` is the COM horizontal position relative to the
stance foot and ``L_y`` the mass-normalized angular momentum about the
stance foot (m^2/s). All functions here are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

GRAVITY = 9.81

# hard cap on planned stance durations (s)
MAX_STEP_DURATION = 10.0


class Unreachable(ValueError):
    """The LIP orbit never crosses the requested position."""


class NonPositiveMomentum(ValueError):
    """Time-to-impact requested for a state that is not walking forward."""


class DegenerateHeight(ValueError):
    """COM height at or below the stance foot."""


class NegativeRadicand(ValueError):
    """The requested orbital energy cannot be reached from this position."""


@dataclass(frozen=True)
class LipParams:
    z_tilde: float
    g: float = GRAVITY

    def __post_init__(self):
        if not self.z_tilde > 0:
            raise ValueError(f"z_tilde must be positive, got {self.z_tilde}")
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")

    @property
    def lam(self) -> float:
        return math.sqrt(self.g / self.z_tilde)


@dataclass(frozen=True)
class ReducedState:
    x_com: float
    L_y: float


@dataclass(frozen=True)
class ComKinematics:
    x_com: float
    z_com: float
    dx_com: float
    dz_com: float
    L_com_y: float = 0.0


@dataclass(frozen=True)
class StoneConfig:
    """Next foothold relative to the current stance foot."""

    l_des: float
    h_des: float

    def __post_init__(self):
        if not self.l_des > 0:
            raise ValueError(f"stone distance must be positive, got {self.l_des}")
        if not abs(self.h_des) < self.l_des:
            raise ValueError(
                f"stone slope must be below 90 deg, got l={self.l_des}, h={self.h_des}"
            )

    @property
    def slope(self) -> float:
        return self.h_des / self.l_des


@dataclass(frozen=True)
class EnergyTarget:
    e_star: float
    e_min: float | None = None
    e_max: float | None = None

    def __post_init__(self):
        # collapsed band by default
        if self.e_min is None:
            object.__setattr__(self, "e_min", self.e_star)
        if self.e_max is None:
            object.__setattr__(self, "e_max", self.e_star)
        if not 0 < self.e_min <= self.e_star <= self.e_max:
            raise ValueError(
                f"need 0 < e_min <= e_star <= e_max, got "
                f"{self.e_min}, {self.e_star}, {self.e_max}"
            )


def lip_flow(s0: ReducedState, p: LipParams, t: float) -> ReducedState:
    """Exact LIP solution after ``t`` seconds."""
    if t < 0:
        raise ValueError("lip_flow needs t >= 0")
    lam = p.lam
    c, s = math.cosh(lam * t), math.sinh(lam * t)
    x = c * s0.x_com + s * s0.L_y / (lam * p.z_tilde)
    L = lam * p.z_tilde * s * s0.x_com + c * s0.L_y
    return ReducedState(x, L)


def orbital_energy(s: ReducedState, p: LipParams) -> float:
    return (s.L_y / p.z_tilde) ** 2 - (p.g / p.z_tilde) * s.x_com**2


def _lip_x(T, lam, z_tilde, x0, L0):
    return math.cosh(lam * T) * x0 + math.sinh(lam * T) * L0 / (lam * z_tilde)


def _lip_dx(T, lam, z_tilde, x0, L0):
    return lam * math.sinh(lam * T) * x0 + math.cosh(lam * T) * L0 / z_tilde


def time_to_impact(x_des: float, z_tilde: float, x0: float, L0: float,
                   g: float = GRAVITY, tol: float = 1e-12) -> float:
    """Smallest T >= 0 at which the forward-walking LIP reaches ``x_des``.

    Safeguarded Newton iteration inside a bracket that is monotone in T.
    Raises ``Unreachable`` if the orbit turns back before ``x_des`` or the
    crossing lies beyond ``MAX_STEP_DURATION``.
    """
    if L0 <= 0:
        raise NonPositiveMomentum(f"L0 must be positive, got {L0}")
    if x_des == x0:
        return 0.0
    if x_des < x0:
        raise Unreachable(f"target {x_des} lies behind current position {x0}")
    lam = math.sqrt(g / z_tilde)

    def f(T):
        return _lip_x(T, lam, z_tilde, x0, L0) - x_des

    # x(T) is increasing up to the turning point (only exists for E < 0, x0 < 0)
    ratio = -L0 / (z_tilde * lam * x0) if x0 < 0 else math.inf
    t_turn = math.atanh(ratio) / lam if ratio < 1.0 else math.inf

    hi = 1.0
    while True:
        hi_eff = min(hi, t_turn, MAX_STEP_DURATION)
        if f(hi_eff) >= 0:
            hi = hi_eff
            break
        if hi_eff >= t_turn or hi_eff >= MAX_STEP_DURATION:
            raise Unreachable(
                f"x_des={x_des} not crossed within {hi_eff:.3g} s "
                f"(x0={x0}, L0={L0}, z_tilde={z_tilde})"
            )
        hi *= 2.0
    lo = 0.0

    T = math.asinh(lam * z_tilde * (x_des - x0) / max(L0, 1e-9)) / lam
    if not lo < T < hi:
        T = 0.5 * (lo + hi)
    for _ in range(200):
        r = f(T)
        if abs(r) < tol:
            return T
        if r < 0:
            lo = T
        else:
            hi = T
        d = _lip_dx(T, lam, z_tilde, x0, L0)
        T_new = T - r / d if d > 0 else lo - 1.0
        if not lo < T_new < hi:
            T_new = 0.5 * (lo + hi)
        if hi - lo < 1e-15:
            return T_new
        T = T_new
    return T


def virtual_slope_height(x_com: float, z_com: float, stone: StoneConfig) -> float:
    return z_com - stone.slope * x_com


def hz_continuous_rhs(s: ReducedState, k: ComKinematics,
                      g: float = GRAVITY) -> tuple[float, float]:
    if k.z_com <= 0:
        raise DegenerateHeight(f"z_com must be positive, got {k.z_com}")
    dx = (s.L_y + s.x_com * k.dz_com - k.L_com_y) / k.z_com
    return dx, g * s.x_com


def hz_impact_map(s_minus: ReducedState, k_minus: ComKinematics,
                  x_sw: float, z_sw: float) -> ReducedState:
    """Reduced reset map: momentum about the landing foot is conserved."""
    x_plus = s_minus.x_com - x_sw
    L_plus = s_minus.L_y + x_sw * k_minus.dz_com - z_sw * k_minus.dx_com
    return ReducedState(x_plus, L_plus)


def viable_post_impact(s_plus: ReducedState, p: LipParams, tgt: EnergyTarget) -> bool:
    if not (s_plus.x_com < 0 and s_plus.L_y > 0):
        return False
    E = orbital_energy(s_plus, p)
    return tgt.e_min <= E <= tgt.e_max


def momentum_from_energy(e_star: float, x_plus: float, z_tilde_plus: float,
                         g: float = GRAVITY) -> float:
    """Positive angular momentum giving orbital energy ``e_star`` at ``x_plus``."""
    if not z_tilde_plus > 0:
        raise DegenerateHeight(f"z_tilde_plus must be positive, got {z_tilde_plus}")
    rad = e_star + (g / z_tilde_plus) * x_plus**2
    if rad < 0:
        raise NegativeRadicand(f"E*={e_star} unreachable at x={x_plus}")
    return z_tilde_plus * math.sqrt(rad)
