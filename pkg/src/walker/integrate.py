"""Adaptive Dormand-Prince 4(5) stepping with dense output and event location.

Uses the same tableau as ``scipy.integrate.RK45`` but without the per-call
setup cost, which matters when the integrator is restarted every control
period.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import RK45

_A, _B, _C, _E, _P = RK45.A, RK45.B, RK45.C, RK45.E, RK45.P
_SAFETY, _MIN_FACTOR, _MAX_FACTOR = 0.9, 0.2, 10.0


class IntegrationFailure(RuntimeError):
    pass


class DenseStep:
    """Quartic interpolant over one accepted step."""

    def __init__(self, t0, h, y0, K):
        self.t0, self.h, self.y0 = t0, h, y0
        self.Q = K.T @ _P

    def __call__(self, t):
        x = (t - self.t0) / self.h
        return self.y0 + self.h * (self.Q @ np.array([x, x * x, x**3, x**4]))


class Dopri5:
    def __init__(self, fun, rtol=1e-9, atol=1e-9, h0=1e-3, h_min=1e-12):
        self.fun = fun
        self.rtol, self.atol = rtol, atol
        self.h = h0
        self.h_min = h_min
        self.nfev = 0

    def _step(self, t, y, f0, h):
        K = np.empty((7, y.size))
        K[0] = f0
        for s in range(1, 6):
            dy = K[:s].T @ _A[s, :s] * h
            K[s] = self.fun(t + _C[s] * h, y + dy)
        y_new = y + h * (K[:6].T @ _B)
        f_new = self.fun(t + h, y_new)
        K[6] = f_new
        self.nfev += 6
        err = h * (K.T @ _E)
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        return y_new, f_new, K, float(np.sqrt(np.mean((err / scale) ** 2)))

    def integrate(self, t0, y0, t1, guard=None, guard_tol=1e-12):
        """Advance from t0 to t1, stopping early where ``guard`` drops through zero.

        Returns ``(t, y, hit)``. At a hit the returned state satisfies
        ``-tol <= guard(y) <= 0`` with the crossing time bracketed to ``guard_tol``.
        """
        t, y = t0, np.asarray(y0, float)
        f = self.fun(t, y)
        self.nfev += 1
        g_prev = guard(y) if guard is not None else None
        while t < t1:
            truncated = t1 - t < self.h
            h = min(self.h, t1 - t)
            while True:
                if h < self.h_min:
                    raise IntegrationFailure(f"step size underflow at t={t:.6g}")
                y_new, f_new, K, en = self._step(t, y, f, h)
                if en <= 1.0:
                    factor = _MAX_FACTOR if en == 0 else min(_MAX_FACTOR, _SAFETY * en ** -0.2)
                    # a step shortened to land on t1 says nothing about growth
                    if not (truncated and factor >= 1.0):
                        self.h = h * factor
                    break
                truncated = False
                h *= max(_MIN_FACTOR, _SAFETY * en ** -0.2)
            if guard is not None:
                g_new = guard(y_new)
                if g_prev > 0.0 >= g_new:
                    dense = DenseStep(t, h, y, K)
                    lo, hi = t, t + h
                    while hi - lo > guard_tol:
                        mid = 0.5 * (lo + hi)
                        if guard(dense(mid)) > 0.0:
                            lo = mid
                        else:
                            hi = mid
                    y_hit = y_new if hi == t + h else dense(hi)
                    return hi, y_hit, True
                g_prev = g_new
            t, y, f = t + h, y_new, f_new
            if not np.all(np.isfinite(y)):
                raise IntegrationFailure("non-finite state")
        return t1, y, False
