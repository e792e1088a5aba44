"""Small dense convex QP solver (dual active-set, warm-startable).

Solves::

    min  1/2 x'Hx + g'x
    s.t. A_eq x = b_eq,  A_in x <= b_in,  lb <= x <= ub

Finite bounds are appended after ``A_in`` as extra inequality rows, so an
active-set index ``i >= m_in`` refers to a bound. The method follows
Goldfarb and Idnani: start from the equality-constrained minimizer, then
repeatedly add the most violated inequality, dropping constraints whose
multipliers would turn negative. Each subproblem is solved directly through
its KKT system, which is cheap at the sizes used here (n <= ~35).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

REGULARIZATION = 1e-9


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_in: np.ndarray | None = None
    b_in: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, float))
        self.g = np.asarray(self.g, float).ravel()
        n = self.g.size
        if self.H.shape != (n, n):
            raise ValueError(f"Hessian shape {self.H.shape} does not match n={n}")
        if np.abs(self.H - self.H.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(self.H).max()):
            raise ValueError("Hessian is not symmetric")
        self.A_eq, self.b_eq = _pair(self.A_eq, self.b_eq, n, "equality")
        self.A_in, self.b_in = _pair(self.A_in, self.b_in, n, "inequality")
        for name in ("lb", "ub"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, float).ravel()
                if v.size != n:
                    raise ValueError(f"{name} must have length {n}")
                setattr(self, name, v)

    @property
    def n(self) -> int:
        return self.g.size

    def inequality_rows(self) -> tuple[np.ndarray, np.ndarray]:
        """All inequalities (general rows, then finite lower, then finite upper bounds)."""
        C, d = [self.A_in], [self.b_in]
        eye = np.eye(self.n)
        if self.lb is not None:
            idx = np.flatnonzero(np.isfinite(self.lb))
            C.append(-eye[idx])
            d.append(-self.lb[idx])
        if self.ub is not None:
            idx = np.flatnonzero(np.isfinite(self.ub))
            C.append(eye[idx])
            d.append(self.ub[idx])
        return np.vstack(C), np.concatenate(d)

    def objective(self, x) -> float:
        return float(0.5 * x @ self.H @ x + self.g @ x)


def _pair(A, b, n, what):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, float))
    b = np.asarray(b, float).ravel()
    if A.shape != (b.size, n):
        raise ValueError(f"{what} block has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


@dataclass
class QpSolution:
    x: np.ndarray
    status: Status
    y_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    z_in: np.ndarray = field(default_factory=lambda: np.zeros(0))
    active_set: tuple[int, ...] = ()
    kkt_residual: float = np.inf
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


class _Singular(Exception):
    pass


def _kkt_solve(G, A, rhs_x, rhs_c):
    n, m = G.shape[0], A.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = G
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate((rhs_x, rhs_c))
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        raise _Singular
    if not np.all(np.isfinite(sol)):
        raise _Singular
    if np.abs(K @ sol - rhs).max() > 1e-9 * (1.0 + np.abs(rhs).max()) * max(1.0, np.abs(K).max()):
        raise _Singular
    return sol[:n], sol[n:]


class ActiveSetSolver:
    """Stateful solver that remembers the last active set for warm starts."""

    def __init__(self, max_iter: int = 200, tol: float = 1e-9, kkt_tol: float = 1e-8):
        self.max_iter = max_iter
        self.tol = tol
        self.kkt_tol = kkt_tol
        self.active_set: tuple[int, ...] = ()

    def solve(self, problem: QpProblem) -> QpSolution:
        sol = self._run(problem, ())
        self.active_set = sol.active_set
        return sol

    def solve_warm(self, problem: QpProblem, previous_active_set=None) -> QpSolution:
        W0 = self.active_set if previous_active_set is None else tuple(previous_active_set)
        sol = self._run(problem, W0)
        self.active_set = sol.active_set
        return sol

    def _run(self, prob: QpProblem, W0) -> QpSolution:
        C, d = prob.inequality_rows()
        m_in = C.shape[0]
        if any(not 0 <= i < m_in for i in W0):
            raise ValueError("warm-start active set does not fit this problem")
        G = prob.H
        try:
            return self._gi(prob, G, C, d, list(dict.fromkeys(W0)))
        except _Singular:
            pass
        G = prob.H + REGULARIZATION * np.eye(prob.n)
        try:
            return self._gi(prob, G, C, d, [])
        except _Singular:
            # equality block inconsistent or rank deficient
            return QpSolution(np.full(prob.n, np.nan), Status.INFEASIBLE)

    def _eqp(self, G, g, Aeq, beq, C, d, W):
        A = np.vstack((Aeq, C[W])) if W else Aeq
        b = np.concatenate((beq, d[W])) if W else beq
        x, mult = _kkt_solve(G, A, -g, b)
        return x, mult

    def _gi(self, prob, G, C, d, W):
        g, Aeq, beq = prob.g, prob.A_eq, prob.b_eq
        me = beq.size
        changes = 0
        if W:
            try:
                x, mult = self._eqp(G, g, Aeq, beq, C, d, W)
            except _Singular:
                W = []
        if not W:
            x, mult = self._eqp(G, g, Aeq, beq, C, d, W)
        nu, lam = mult[:me], mult[me:]
        # warm start: shed constraints with negative multipliers
        while W and lam.min() < -self.tol:
            j = int(np.argmin(lam))
            del W[j]
            changes += 1
            x, mult = self._eqp(G, g, Aeq, beq, C, d, W)
            nu, lam = mult[:me], mult[me:]
        lam = list(lam)

        scale_g = max(1.0, np.abs(G).max())
        status = Status.ITERATION_LIMIT
        while changes <= self.max_iter:
            viol = C @ x - d
            if W:
                viol[W] = -np.inf
            p = int(np.argmax(viol)) if viol.size else -1
            if p < 0 or viol[p] <= self.tol * (1.0 + abs(d[p])):
                status = Status.OPTIMAL
                break
            cp = C[p]
            lam_p = 0.0
            added = False
            while not added:
                A = np.vstack((Aeq, C[W])) if W else Aeq
                dx, dmult = _kkt_solve(G, A, -cp, np.zeros(A.shape[0]))
                dnu, dlam = dmult[:me], dmult[me:]
                curv = -cp @ dx
                t1 = np.inf
                if curv * scale_g > 1e-12 * (cp @ cp):
                    t1 = (cp @ x - d[p]) / curv
                t2, jblock = np.inf, -1
                for k, (lk, dk) in enumerate(zip(lam, dlam)):
                    if dk < -1e-14:
                        r = lk / -dk
                        if r < t2:
                            t2, jblock = r, k
                if not np.isfinite(t1) and not np.isfinite(t2):
                    return self._finish(prob, x, nu, W, lam, C, d, Status.INFEASIBLE, changes)
                t = min(t1, t2)
                if np.isfinite(t1):
                    x = x + t * dx
                nu = nu + t * dnu
                lam = [lk + t * dk for lk, dk in zip(lam, dlam)]
                lam_p += t
                if t2 < t1:
                    del W[jblock]
                    del lam[jblock]
                else:
                    W.append(p)
                    lam.append(lam_p)
                    added = True
                changes += 1
                if changes > self.max_iter:
                    break
        return self._finish(prob, x, nu, W, lam, C, d, status, changes)

    def _finish(self, prob, x, nu, W, lam, C, d, status, changes):
        m_in = C.shape[0]
        z = np.zeros(m_in)
        if W:
            z[W] = lam
        # sort active set for reproducible warm starts
        active = tuple(sorted(W))
        res = kkt_residual(prob, x, nu, z, C, d)
        if status is Status.OPTIMAL and res > self.kkt_tol:
            # one refinement pass on the final active set
            try:
                x2, mult = self._eqp(prob.H, prob.g, prob.A_eq, prob.b_eq, C, d, list(active))
                me = prob.b_eq.size
                z2 = np.zeros(m_in)
                z2[list(active)] = mult[me:]
                res2 = kkt_residual(prob, x2, mult[:me], z2, C, d)
                if res2 < res:
                    x, nu, z, res = x2, mult[:me], z2, res2
            except _Singular:
                pass
        return QpSolution(x, status, np.asarray(nu), z, active, res, changes)


def kkt_residual(prob: QpProblem, x, y_eq, z_in, C=None, d=None) -> float:
    """Max of stationarity, primal/dual feasibility and complementarity violations."""
    if C is None:
        C, d = prob.inequality_rows()
    stat = prob.H @ x + prob.g + prob.A_eq.T @ y_eq + C.T @ z_in
    r = [np.abs(stat).max(initial=0.0)]
    if prob.b_eq.size:
        r.append(np.abs(prob.A_eq @ x - prob.b_eq).max())
    if d.size:
        slack = C @ x - d
        r.append(max(slack.max(), 0.0))
        r.append(max(-z_in.min(), 0.0))
        r.append(np.abs(z_in * slack).max())
    return float(max(r))


def solve(problem: QpProblem, max_iter: int = 200) -> QpSolution:
    return ActiveSetSolver(max_iter=max_iter).solve(problem)


def solve_warm(problem: QpProblem, previous_active_set, max_iter: int = 200) -> QpSolution:
    return ActiveSetSolver(max_iter=max_iter).solve_warm(problem, previous_active_set)
