"""Shrinking-horizon MPC on the vertical COM double integrator.

Minimizes the summed squared vertical acceleration from the current
(z, dz) to the desired pre-impact (z_f, u_des) at the impact time, with the
unilateral contact bound ``ddz >= -g``. Only the inputs are decision
variables; the terminal condition is written in condensed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .qp_solver import ActiveSetSolver, QpProblem, Status

log = logging.getLogger(__name__)

DEFAULT_N = 10
MIN_HORIZON = 0.005


class MpcInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class VerticalMpcProblem:
    z0: float
    dz0: float
    z_f: float
    u_des: float
    horizon: float
    N: int = DEFAULT_N
    g: float = 9.81

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"remaining horizon must be positive, got {self.horizon}")
        if self.N < 1:
            raise ValueError("N must be at least 1")

    @property
    def dt(self) -> float:
        return self.horizon / self.N


@dataclass
class MpcSolution:
    u: np.ndarray         # (N,) accelerations
    z: np.ndarray         # (N+1, 2) predicted (z, dz)
    status: Status

    @property
    def u0(self) -> float:
        return float(self.u[0])


def discretize(dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization of the double integrator."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    A = np.array([[1.0, dt], [0.0, 1.0]])
    B = np.array([[0.5 * dt * dt], [dt]])
    return A, B


def rollout(z0, dz0, u, dt) -> np.ndarray:
    A, B = discretize(dt)
    z = np.empty((len(u) + 1, 2))
    z[0] = z0, dz0
    for k, uk in enumerate(u):
        z[k + 1] = A @ z[k] + B[:, 0] * uk
    return z


def terminal_map(p: VerticalMpcProblem) -> tuple[np.ndarray, np.ndarray]:
    """Rows M, rhs r with M u = r equivalent to z_N = (z_f, u_des).

    Position row is divided by dt^2 and velocity row by dt for conditioning.
    """
    N, dt = p.N, p.dt
    k = np.arange(N)
    M = np.vstack((N - 1 - k + 0.5, np.ones(N)))
    r = np.array([(p.z_f - p.z0 - N * dt * p.dz0) / dt**2,
                  (p.u_des - p.dz0) / dt])
    return M, r


def build_qp(p: VerticalMpcProblem) -> QpProblem:
    M, r = terminal_map(p)
    return QpProblem(H=2.0 * np.eye(p.N), g=np.zeros(p.N), A_eq=M, b_eq=r,
                     lb=np.full(p.N, -p.g))


def unconstrained_solution(p: VerticalMpcProblem) -> np.ndarray:
    M, r = terminal_map(p)
    return M.T @ np.linalg.solve(M @ M.T, r)


def solve_vertical_mpc(p: VerticalMpcProblem, solver: ActiveSetSolver | None = None,
                       warm: bool = True) -> MpcSolution:
    solver = solver or ActiveSetSolver()
    qp = build_qp(p)
    sol = solver.solve_warm(qp) if warm else solver.solve(qp)
    if sol.status is not Status.OPTIMAL:
        raise MpcInfeasible(f"vertical MPC {sol.status.value} (horizon {p.horizon:.4f} s)")
    return MpcSolution(sol.x, rollout(p.z0, p.dz0, sol.x, p.dt), sol.status)


class VerticalMpc:
    """Per-controller MPC wrapper with horizon floor and infeasibility fallback."""

    def __init__(self, N: int = DEFAULT_N, g: float = 9.81, min_horizon: float = MIN_HORIZON):
        self.N = N
        self.g = g
        self.min_horizon = min_horizon
        self.solver = ActiveSetSolver()
        self.last_u0 = 0.0
        self.infeasible_count = 0
        # last solved input sequence, its interval and the horizon it was solved for
        self._plan: tuple[np.ndarray, float, float] | None = None
        self._prev_remaining: float | None = None

    def reset(self):
        self.solver.active_set = ()
        self._plan = None
        self._prev_remaining = None

    def _held_input(self, remaining: float) -> float:
        """Average of the last solved sequence over the coming control period.

        Below the horizon floor the last plan is played out open loop, so the
        terminal velocity it was built for is reached regardless of where the
        final solve fell relative to the impact time.
        """
        if self._plan is None:
            return self.last_u0
        u, dt, horizon = self._plan
        period = (self._prev_remaining - remaining) if self._prev_remaining else dt
        period = max(period, 1e-9)
        t0 = horizon - remaining
        t1 = min(t0 + period, horizon)
        if t1 <= t0:
            return float(u[-1])
        edges = np.arange(len(u) + 1) * dt
        overlap = np.clip(np.minimum(edges[1:], t1) - np.maximum(edges[:-1], t0), 0.0, None)
        return float(overlap @ u / (t1 - t0))

    def command(self, z, dz, z_f, u_des, remaining) -> float:
        if remaining < self.min_horizon:
            u0 = self._held_input(remaining)
            self._prev_remaining = remaining
            self.last_u0 = u0
            return u0
        self._prev_remaining = remaining
        p = VerticalMpcProblem(z, dz, z_f, u_des, remaining, self.N, self.g)
        u_free = unconstrained_solution(p)
        if u_free.min() >= -self.g:
            # the minimum-norm solution already respects the contact bound
            self.solver.active_set = ()
            u = u_free
        else:
            try:
                u = solve_vertical_mpc(p, self.solver).u
            except MpcInfeasible:
                self.infeasible_count += 1
                log.debug("vertical MPC infeasible, using clipped least-squares input")
                self.solver.active_set = ()
                u = np.maximum(unconstrained_solution(p), -self.g)
        self._plan = (np.asarray(u, float), p.dt, remaining)
        self.last_u0 = float(u[0])
        return self.last_u0
