"""Compiled hot path for the simulator: constrained forward dynamics.

Mirrors ``rigid_body.constrained_dynamics`` (the numpy reference) so the
integrator can take thousands of steps per simulated second.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def constrained_accel(q, dq, tau, C, S, m, inertia, g, kp, kd, anchor):
    n = 7
    a = S @ q
    ad = S @ dq
    sa = np.sin(a)
    ca = np.cos(a)
    jac = np.zeros((9, 2, n))
    jd = np.zeros((9, 2))
    for p in range(9):
        jac[p, 0, 0] = 1.0
        jac[p, 1, 1] = 1.0
        for k in range(5):
            c = C[p, k]
            if c == 0.0:
                continue
            jd[p, 0] -= c * sa[k] * ad[k] * ad[k]
            jd[p, 1] -= c * ca[k] * ad[k] * ad[k]
            for j in range(2, n):
                s = S[k, j]
                if s != 0.0:
                    jac[p, 0, j] += c * ca[k] * s
                    jac[p, 1, j] -= c * sa[k] * s
    K = np.zeros((n + 2, n + 2))
    rhs = np.zeros(n + 2)
    for p in range(5):
        for i in range(n):
            rhs[i] -= m[p] * (jac[p, 0, i] * jd[p, 0] + jac[p, 1, i] * jd[p, 1] + g * jac[p, 1, i])
            for j in range(n):
                K[i, j] += m[p] * (jac[p, 0, i] * jac[p, 0, j] + jac[p, 1, i] * jac[p, 1, j])
    for k in range(5):
        for i in range(n):
            for j in range(n):
                K[i, j] += inertia[k] * S[k, i] * S[k, j]
    for i in range(4):
        rhs[3 + i] += tau[i]
    # stance foot row 5
    px = q[0]
    pz = q[1]
    for k in range(5):
        px += C[5, k] * sa[k]
        pz += C[5, k] * ca[k]
    vx = 0.0
    vz = 0.0
    for j in range(n):
        vx += jac[5, 0, j] * dq[j]
        vz += jac[5, 1, j] * dq[j]
    for i in range(n):
        K[i, n] = -jac[5, 0, i]
        K[i, n + 1] = -jac[5, 1, i]
        K[n, i] = jac[5, 0, i]
        K[n + 1, i] = jac[5, 1, i]
    rhs[n] = -jd[5, 0] - kd * vx - kp * (px - anchor[0])
    rhs[n + 1] = -jd[5, 1] - kd * vz - kp * (pz - anchor[1])
    sol = np.linalg.solve(K, rhs)
    return sol[:n], sol[n:]


@njit(cache=True)
def point_position(q, C, S, row):
    a = S @ q
    x = q[0]
    z = q[1]
    for k in range(5):
        x += C[row, k] * np.sin(a[k])
        z += C[row, k] * np.cos(a[k])
    return x, z
