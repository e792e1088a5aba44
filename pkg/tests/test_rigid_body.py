"""Five-link model checked against a hand-written per-link oracle.

The oracle below recomputes every link position, velocity and angle from
``q`` with explicit trigonometry, independently of the matrix form used
by the library.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from walker import rigid_body as rb
from walker.reduced_models import hz_impact_map

MODELS = [
    rb.RobotModel(),
    # off-centre link COMs and explicit inertias exercise every parameter
    rb.RobotModel(torso_mass=12.0, torso_length=0.6, torso_com=0.2, thigh_mass=3.0,
                  thigh_length=0.45, thigh_com=0.15, shin_mass=0.8, shin_length=0.42,
                  shin_com=0.25, torso_inertia=0.5, thigh_inertia=0.04, shin_inertia=0.01),
]


def up(a):
    return np.array([np.sin(a), np.cos(a)])


def dup(a, da):
    return da * np.array([np.cos(a), -np.sin(a)])


def oracle_links(model, q, dq):
    """Per-link (mass, inertia, COM position, COM velocity, angle, rate) plus feet."""
    hip, dhip = q[:2], dq[:2]
    a_t, w_t = q[2], dq[2]
    links = [(model.torso_mass, model.torso_inertia,
              hip + model.torso_com * up(a_t), dhip + model.torso_com * dup(a_t, w_t), a_t, w_t)]
    feet = {}
    for name, (ih, ik) in (("stance", (3, 4)), ("swing", (5, 6))):
        a1, w1 = a_t + q[ih], w_t + dq[ih]
        a2, w2 = a1 + q[ik], w1 + dq[ik]
        knee = hip - model.thigh_length * up(a1)
        dknee = dhip - model.thigh_length * dup(a1, w1)
        links.append((model.thigh_mass, model.thigh_inertia,
                      hip - model.thigh_com * up(a1), dhip - model.thigh_com * dup(a1, w1), a1, w1))
        links.append((model.shin_mass, model.shin_inertia,
                      knee - model.shin_com * up(a2), dknee - model.shin_com * dup(a2, w2), a2, w2))
        feet[name] = (knee - model.shin_length * up(a2), dknee - model.shin_length * dup(a2, w2))
    return links, feet


def oracle_kinetic_energy(model, q, dq):
    links, _ = oracle_links(model, q, dq)
    return sum(0.5 * m * v @ v + 0.5 * I * w * w for m, I, _, v, _, w in links)


def oracle_potential(model, q):
    links, _ = oracle_links(model, q, np.zeros(7))
    return sum(m * model.g * p[1] for m, _, p, _, _, _ in links)


def oracle_momentum(model, q, dq, point, point_vel=(0.0, 0.0)):
    """Mass-normalized angular momentum about a (possibly moving) point."""
    links, _ = oracle_links(model, q, dq)
    point, point_vel = np.asarray(point), np.asarray(point_vel)
    M = sum(l[0] for l in links)
    total = 0.0
    for m, I, p, v, _, w in links:
        r, u = p - point, v - point_vel
        total += m * (r[1] * u[0] - r[0] * u[1]) + I * w
    return total / M


def random_state(rng, scale=1.0):
    q = np.array([0.0, 0.75, 0.0, 0.0, 0.5, 0.0, 0.5]) + scale * rng.uniform(-0.6, 0.6, 7)
    dq = scale * rng.uniform(-2.0, 2.0, 7)
    return q, dq


def grounded_state(model, rng):
    """Random state whose stance foot is at rest (stance constraint satisfied)."""
    q, dq = random_state(rng)
    J = rb.kinematics(model, q, dq).jac[rb.STANCE_FOOT]
    dq = dq - np.linalg.pinv(J) @ (J @ dq)
    return q, dq


@pytest.fixture(params=range(len(MODELS)), ids=["default", "offset"])
def model(request):
    return MODELS[request.param]


class TestModel:
    def test_default_inertia_is_slender_rod(self):
        m = rb.RobotModel()
        assert m.torso_inertia == pytest.approx(10.0 * 0.5**2 / 12)
        assert m.thigh_inertia == pytest.approx(2.0 * 0.4**2 / 12)

    @pytest.mark.parametrize("kw", [{"torso_mass": 0.0}, {"shin_length": -1.0},
                                    {"thigh_inertia": -0.1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            rb.RobotModel(**kw)

    def test_actuation(self):
        B = rb.RobotModel().actuation
        assert np.linalg.matrix_rank(B) == 4
        assert np.all(B[:3] == 0)


class TestKinematics:
    def test_positions_match_oracle(self, model, rng):
        for _ in range(20):
            q, dq = random_state(rng)
            kin = rb.kinematics(model, q, dq)
            links, feet = oracle_links(model, q, dq)
            for k, (_, _, p, v, a, w) in enumerate(links):
                assert np.allclose(kin.pos[k], p, atol=1e-14)
                assert np.allclose(kin.vel[k], v, atol=1e-13)
                assert kin.angles[k] == pytest.approx(a, abs=1e-14)
                assert kin.rates[k] == pytest.approx(w, abs=1e-14)
            assert np.allclose(kin.pos[rb.STANCE_FOOT], feet["stance"][0], atol=1e-14)
            assert np.allclose(kin.pos[rb.SWING_FOOT], feet["swing"][0], atol=1e-14)

    def test_jacobian_finite_difference(self, model, rng):
        q, dq = random_state(rng)
        for frame, row in (("stance", rb.STANCE_FOOT), ("swing", rb.SWING_FOOT)):
            J, _ = rb.contact_jacobian(model, q, dq, frame)
            d = 1e-6
            fd = np.empty((2, 7))
            for i in range(7):
                e = np.zeros(7)
                e[i] = d
                fd[:, i] = (rb.kinematics(model, q + e, dq).pos[row]
                            - rb.kinematics(model, q - e, dq).pos[row]) / (2 * d)
            assert np.allclose(J, fd, atol=1e-6)
            assert np.allclose(J[:, :2], np.eye(2))

    def test_jdot_finite_difference(self, model, rng):
        q, dq = random_state(rng)
        J, jd = rb.contact_jacobian(model, q, dq, "swing")
        d = 1e-6
        Jp, _ = rb.contact_jacobian(model, q + d * dq, dq, "swing")
        Jm, _ = rb.contact_jacobian(model, q - d * dq, dq, "swing")
        assert np.allclose((Jp - Jm) / (2 * d) @ dq, jd, atol=1e-5)

    def test_unknown_frame(self, model):
        with pytest.raises(ValueError):
            rb.contact_jacobian(model, np.zeros(7), np.zeros(7), "torso")


class TestDynamics:
    def test_mass_matrix_symmetric_positive_definite(self, model, rng):
        for _ in range(1000):
            q, _ = random_state(rng, 3.0)
            D = rb.mass_matrix(model, q)
            assert np.abs(D - D.T).max() < 1e-12
            assert np.linalg.eigvalsh(D).min() > 0

    def test_kinetic_energy_oracle(self, model, rng):
        for _ in range(50):
            q, dq = random_state(rng)
            ke = 0.5 * dq @ rb.mass_matrix(model, q) @ dq
            assert ke == pytest.approx(oracle_kinetic_energy(model, q, dq), abs=1e-10)

    def test_gravity_is_potential_gradient(self, model, rng):
        q, _ = random_state(rng)
        H = rb.bias_forces(model, q, np.zeros(7))
        d = 1e-6
        grad = np.array([(oracle_potential(model, q + d * e) - oracle_potential(model, q - d * e))
                         / (2 * d) for e in np.eye(7)])
        assert np.allclose(H, grad, atol=1e-6)
        assert np.allclose(H, rb.gravity_vector(model, q), atol=1e-12)

    def test_velocity_terms_are_quadratic(self, model, rng):
        q, dq = random_state(rng)
        G = rb.bias_forces(model, q, np.zeros(7))
        assert np.allclose(rb.bias_forces(model, q, dq) - G,
                           rb.bias_forces(model, q, -dq) - G, atol=1e-12)
        assert np.allclose(rb.bias_forces(model, q, 2 * dq) - G,
                           4 * (rb.bias_forces(model, q, dq) - G), atol=1e-10)

    def test_free_flight_conserves_energy(self, model, rng):
        q0, dq0 = random_state(rng)

        def f(t, y):
            q, dq = y[:7], y[7:]
            ddq = np.linalg.solve(rb.mass_matrix(model, q), -rb.bias_forces(model, q, dq))
            return np.concatenate((dq, ddq))

        sol = solve_ivp(f, (0, 0.5), np.concatenate((q0, dq0)), method="DOP853",
                        rtol=1e-10, atol=1e-10, dense_output=True)
        energy = lambda y: oracle_kinetic_energy(model, y[:7], y[7:]) + oracle_potential(model, y[:7])
        e0 = energy(sol.y[:, 0])
        drift = max(abs(energy(sol.sol(t)) - e0) for t in np.linspace(0, 0.5, 51))
        assert drift < 1e-6

    def test_constrained_dynamics_holds_contact(self, model, rng):
        q, dq = grounded_state(model, rng)
        tau = rng.uniform(-20, 20, 4)
        ddq, F = rb.constrained_dynamics(model, q, dq, tau)
        kin = rb.kinematics(model, q, dq)
        J, jd = kin.jac[rb.STANCE_FOOT], kin.jdqd[rb.STANCE_FOOT]
        assert np.abs(J @ ddq + jd).max() < 1e-10
        D, H = rb.mass_matrix(model, q), rb.bias_forces(model, q, dq)
        assert np.abs(D @ ddq + H - model.actuation @ tau - J.T @ F).max() < 1e-9


class TestCentroidal:
    def test_symmetric_pose_com_above_foot(self):
        m = rb.RobotModel()
        # both legs straight down: COM directly above the stance foot
        q = np.array([0.0, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert rb.com_kinematics(m, q, np.zeros(7)).x_com == pytest.approx(0.0, abs=1e-15)

    def test_momentum_about_foot_matches_oracle(self, model, rng):
        for _ in range(50):
            q, dq = grounded_state(model, rng)
            L = rb.reduced_state(model, q, dq).L_y
            foot = rb.kinematics(model, q, dq).pos[rb.STANCE_FOOT]
            assert L == pytest.approx(oracle_momentum(model, q, dq, foot), abs=1e-10)

    def test_rigid_translation(self, model, rng):
        q, _ = random_state(rng)
        dq = np.zeros(7)
        dq[:2] = rng.uniform(-1, 1, 2)
        k = rb.com_kinematics(model, q, dq)
        kin = rb.kinematics(model, q, dq)
        # the stance foot moves with the body, so relative velocity is zero
        assert k.L_com_y == pytest.approx(0.0, abs=1e-14)
        L = rb.angular_momentum_about(model, kin, kin.pos[rb.STANCE_FOOT])
        assert L == pytest.approx(k.z_com * dq[0] - k.x_com * dq[1], abs=1e-13)


class TestImpact:
    def test_no_impulse_needed(self, model, rng):
        q, dq = random_state(rng)
        J = rb.kinematics(model, q, dq).jac[rb.SWING_FOOT]
        dq = dq - np.linalg.pinv(J) @ (J @ dq)
        assert np.allclose(rb.plastic_impact(model, q, dq), dq, atol=1e-12)

    def test_impact_properties(self, model, rng):
        for _ in range(50):
            q, dq = grounded_state(model, rng)
            dq_plus = rb.plastic_impact(model, q, dq)
            kin = rb.kinematics(model, q, dq_plus)
            assert np.abs(kin.vel[rb.SWING_FOOT]).max() < 1e-10
            assert (rb.kinetic_energy(model, q, dq_plus)
                    <= rb.kinetic_energy(model, q, dq) + 1e-12)
            p = kin.pos[rb.SWING_FOOT]
            assert oracle_momentum(model, q, dq_plus, p) == pytest.approx(
                oracle_momentum(model, q, dq, p), abs=1e-10)

    def test_reduced_impact_map_agrees(self, model, rng):
        for _ in range(100):
            q, dq = grounded_state(model, rng)
            k = rb.com_kinematics(model, q, dq)
            s = rb.reduced_state(model, q, dq)
            x_sw, z_sw = rb.swing_foot_relative(rb.kinematics(model, q, dq))
            reduced = hz_impact_map(s, k, x_sw, z_sw)
            q2, dq2 = rb.relabel_legs(q, rb.plastic_impact(model, q, dq))
            full = rb.reduced_state(model, q2, dq2)
            assert full.x_com == pytest.approx(reduced.x_com, abs=1e-12)
            assert full.L_y == pytest.approx(reduced.L_y, abs=1e-8)

    def test_floating_base_jacobian_never_singular(self, model, rng):
        # base translation columns make every foot Jacobian full row rank
        for _ in range(20):
            q, _ = random_state(rng, 3.0)
            J = rb.kinematics(model, q, np.zeros(7)).jac[rb.SWING_FOOT]
            assert np.linalg.matrix_rank(J) == 2


class TestRelabel:
    @settings(max_examples=50)
    @given(st.lists(st.floats(-3, 3), min_size=14, max_size=14))
    def test_involution(self, v):
        q, dq = np.array(v[:7]), np.array(v[7:])
        q2, dq2 = rb.relabel_legs(*rb.relabel_legs(q, dq))
        assert np.array_equal(q, q2) and np.array_equal(dq, dq2)

    def test_symmetric_pose_is_fixed(self):
        q = np.array([0.1, 0.8, 0.05, 0.2, 0.3, 0.2, 0.3])
        q2, _ = rb.relabel_legs(q, np.zeros(7))
        assert np.array_equal(q, q2)

    def test_feet_swap_roles(self, model, rng):
        q, dq = random_state(rng)
        before = rb.kinematics(model, q, dq)
        after = rb.kinematics(model, *rb.relabel_legs(q, dq))
        assert np.allclose(after.pos[rb.STANCE_FOOT], before.pos[rb.SWING_FOOT], atol=1e-15)
        assert np.allclose(after.pos[rb.SWING_FOOT], before.pos[rb.STANCE_FOOT], atol=1e-15)


class TestLegIk:
    def test_places_foot(self, model, rng):
        for _ in range(20):
            hip = np.array([0.0, 0.7])
            foot = hip + rng.uniform([-0.3, -0.8], [0.3, -0.45])
            theta = rng.uniform(-0.2, 0.2)
            q = np.zeros(7)
            q[:2], q[2] = hip, theta
            q[3:5] = rb.leg_ik(model, hip, foot, theta)
            assert np.allclose(rb.kinematics(model, q, np.zeros(7)).pos[rb.STANCE_FOOT], foot,
                               atol=1e-12)
            assert q[4] > 0

    def test_out_of_reach(self, model):
        with pytest.raises(ValueError):
            rb.leg_ik(model, (0.0, 2.0), (0.0, 0.0), 0.0)
