import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walker.qp_solver import Status
from walker.vertical_mpc import (
    MpcInfeasible,
    VerticalMpc,
    VerticalMpcProblem,
    discretize,
    rollout,
    solve_vertical_mpc,
    unconstrained_solution,
)

G = 9.81


def min_norm_oracle(z0, dz0, z_f, v_f, T, N):
    """Closed-form minimum-norm inputs of the two-point boundary value problem.

    With u_k held over [k dt, (k+1) dt], the terminal state is
    z_N = z0 + T dz0 + dt^2 sum (N - k - 1/2) u_k and dz_N = dz0 + dt sum u_k.
    Stationarity of sum u_k^2 gives u_k = a (N - k - 1/2) + b; the two
    terminal conditions fix a and b.
    """
    dt = T / N
    w = N - np.arange(N) - 0.5
    S1, S2, S0 = w.sum(), (w * w).sum(), float(N)
    r_pos = (z_f - z0 - T * dz0) / dt**2
    r_vel = (v_f - dz0) / dt
    a, b = np.linalg.solve([[S2, S1], [S1, S0]], [r_pos, r_vel])
    return a * w + b


class TestDiscretize:
    def test_example(self):
        A, B = discretize(0.01)
        assert np.allclose(A, [[1, 0.01], [0, 1]], atol=0)
        assert np.allclose(B, [[5e-5], [0.01]], atol=1e-18)

    def test_semigroup(self):
        A1, B1 = discretize(0.02)
        A2, B2 = discretize(0.04)
        x = np.array([0.7, -0.3])
        u = 1.7
        two = A1 @ (A1 @ x + B1[:, 0] * u) + B1[:, 0] * u
        assert np.allclose(two, A2 @ x + B2[:, 0] * u, atol=1e-15)

    def test_free_fall(self):
        z = rollout(1.0, 0.5, np.full(20, -G), 0.01)
        t = 0.01 * np.arange(21)
        assert np.allclose(z[:, 0], 1.0 + 0.5 * t - 0.5 * G * t**2, atol=1e-14)
        assert np.allclose(z[:, 1], 0.5 - G * t, atol=1e-14)

    def test_invalid_dt(self):
        with pytest.raises(ValueError):
            discretize(0.0)


class TestProblem:
    @pytest.mark.parametrize("kw", [{"horizon": 0.0}, {"horizon": -0.1}, {"N": 0}])
    def test_invariants(self, kw):
        base = dict(z0=0.5, dz0=0.0, z_f=0.5, u_des=0.0, horizon=0.3)
        base.update(kw)
        with pytest.raises(ValueError):
            VerticalMpcProblem(**base)


class TestSolve:
    def test_constant_velocity(self):
        T = 0.4
        p = VerticalMpcProblem(1.0, 0.2, 1.0 + 0.2 * T, 0.2, T)
        sol = solve_vertical_mpc(p)
        assert np.abs(sol.u).max() < 1e-12
        assert sol.u0 == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=200)
    @given(st.floats(0.4, 0.7), st.floats(-0.5, 0.5), st.floats(0.4, 0.7),
           st.floats(-0.8, 0.8), st.floats(0.05, 0.8))
    def test_matches_min_norm_when_unconstrained(self, z0, dz0, zf, vf, T):
        p = VerticalMpcProblem(z0, dz0, zf, vf, T)
        oracle = min_norm_oracle(z0, dz0, zf, vf, T, p.N)
        assert np.allclose(unconstrained_solution(p), oracle, atol=1e-8)
        if oracle.min() < -G:
            return
        sol = solve_vertical_mpc(p)
        assert np.allclose(sol.u, oracle, atol=1e-8)

    @settings(max_examples=200)
    @given(st.floats(0.4, 0.7), st.floats(-1.5, 1.5), st.floats(0.3, 0.8),
           st.floats(-2.0, 1.0), st.floats(0.05, 0.8))
    def test_terminal_and_contact_bound(self, z0, dz0, zf, vf, T):
        p = VerticalMpcProblem(z0, dz0, zf, vf, T)
        try:
            sol = solve_vertical_mpc(p)
        except MpcInfeasible:
            return
        assert np.abs(sol.z[-1] - [zf, vf]).max() < 1e-8
        assert sol.u.min() >= -G - 1e-10

    def test_infeasible_when_mean_acceleration_below_minus_g(self):
        T = 0.2
        # reaching v_f needs an average acceleration of -1.5 g
        p = VerticalMpcProblem(0.5, 0.0, 0.5 - 0.75 * G * T**2, -1.5 * G * T, T)
        with pytest.raises(MpcInfeasible):
            solve_vertical_mpc(p)

    def test_active_bound(self):
        # a strong downward swing that the minimum-norm plan would overdo
        p = VerticalMpcProblem(0.5, 1.0, 0.5, -2.0, 0.5)
        assert unconstrained_solution(p).min() < -G
        sol = solve_vertical_mpc(p)
        assert sol.status is Status.OPTIMAL
        assert sol.u.min() == pytest.approx(-G, abs=1e-9)
        assert np.abs(sol.z[-1] - [0.5, -2.0]).max() < 1e-8


class TestShrinkingHorizon:
    """Re-solving one interval later (same dt, one input fewer) keeps the tail.

    The sequence stops at two inputs: a single input cannot meet both
    terminal equalities except by coincidence.
    """

    @pytest.mark.parametrize("z0, dz0, zf, vf, T", [
        (0.5, 0.1, 0.52, -0.3, 0.4),
        (0.5, 1.0, 0.5, -2.0, 0.5),  # contact bound active
    ])
    def test_tail_consistency(self, z0, dz0, zf, vf, T):
        N = 10
        p = VerticalMpcProblem(z0, dz0, zf, vf, T, N)
        sol = solve_vertical_mpc(p)
        cost = [np.sum(sol.u**2)]
        u_prev, state = sol.u, sol.z[1]
        for k in range(1, N - 1):
            p = VerticalMpcProblem(state[0], state[1], zf, vf, T - k * T / N, N - k)
            s = solve_vertical_mpc(p)
            assert np.allclose(s.u, u_prev[1:], atol=1e-7)
            cost.append(np.sum(s.u**2))
            u_prev, state = s.u, s.z[1]
        assert all(b <= a + 1e-12 for a, b in zip(cost, cost[1:]))


class TestController:
    def test_reaches_terminal_state_open_loop(self):
        """Applying the commands every millisecond lands on (z_f, u_des) at impact."""
        mpc = VerticalMpc()
        z, dz, zf, vf, T = 0.5, 0.2, 0.51, -0.3, 0.4
        dt = 1e-3
        for k in range(int(round(T / dt))):
            u = mpc.command(z, dz, zf, vf, T - k * dt)
            z, dz = z + dz * dt + 0.5 * u * dt * dt, dz + u * dt
        assert z == pytest.approx(zf, abs=2e-5)
        assert dz == pytest.approx(vf, abs=2e-3)

    def test_holds_plan_below_floor(self):
        mpc = VerticalMpc(min_horizon=0.005)
        u0 = mpc.command(0.5, 0.0, 0.5, -0.2, 0.006)
        plan, dt, _ = mpc._plan
        held = mpc.command(0.5, 0.0, 0.5, -0.2, 0.004)
        # the held input averages the stored plan over the elapsed window
        t0, t1 = 0.006 - 0.004, 0.006 - 0.004 + 0.002
        edges = np.arange(len(plan) + 1) * dt
        overlap = np.clip(np.minimum(edges[1:], t1) - np.maximum(edges[:-1], t0), 0, None)
        assert held == pytest.approx(overlap @ plan / (t1 - t0), abs=1e-12)
        assert u0 == plan[0]

    def test_hold_without_plan_returns_last(self):
        mpc = VerticalMpc()
        assert mpc.command(0.5, 0.0, 0.5, 0.0, 0.001) == 0.0

    def test_infeasible_fallback(self):
        mpc = VerticalMpc()
        T = 0.2
        u = mpc.command(0.5, 0.0, 0.5 - 0.75 * G * T**2, -1.5 * G * T, T)
        assert mpc.infeasible_count == 1
        assert u == pytest.approx(-G)

    def test_reset(self):
        mpc = VerticalMpc()
        mpc.command(0.5, 0.0, 0.5, -0.2, 0.3)
        mpc.reset()
        assert mpc._plan is None and mpc.solver.active_set == ()
