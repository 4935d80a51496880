import numpy as np
import pytest

from legkit.jump import euler_step
from legkit.reference import jump_rig
from legkit.rigid import (TreeState, floating_state, floating_step, forward_dynamics,
                          kinetic_energy, point_wrench, potential_energy)
from legkit.spatial import body_velocities, centroidal_momentum, system_momentum


def _q(model, seed):
    rng = np.random.default_rng(seed)
    return np.array([rng.uniform(0.7 * j.limits[0], 0.7 * j.limits[1]) for j in model.dof_joints])


def test_mass_matrix_matches_body_kinetic_energy(tello):
    # 0.5 qd^T H qd against per-body 0.5 (m v_c^2 + w^T I w) from velocity propagation
    rng = np.random.default_rng(0)
    for seed in range(5):
        q = _q(tello, seed)
        qd = rng.normal(size=tello.dof)
        Rs, ps, ws, vs = body_velocities(tello, q, qd)
        ke = 0.0
        for i, si in enumerate(tello.composed):
            c = Rs[i] @ si.com
            vc = vs[i] + np.cross(ws[i], c)
            Iw = Rs[i] @ si.inertia @ Rs[i].T
            ke += 0.5 * (si.mass * vc @ vc + ws[i] @ Iw @ ws[i])
        assert kinetic_energy(tello, q, qd) == pytest.approx(ke, rel=1e-12)


def test_mass_matrix_symmetric_positive(tello):
    H = TreeState(tello, _q(tello, 1)).mass_matrix()
    np.testing.assert_allclose(H, H.T, atol=1e-14)
    assert np.linalg.eigvalsh(H).min() > 0


def test_rnea_consistent_with_mass_matrix(tello):
    rng = np.random.default_rng(2)
    q = _q(tello, 2)
    qd, qdd = rng.normal(size=(2, tello.dof))
    ts = TreeState(tello, q)
    tau, _ = ts.rnea(qd, qdd)
    bias, _ = ts.rnea(qd, np.zeros(tello.dof))
    np.testing.assert_allclose(tau, ts.mass_matrix() @ qdd + bias, atol=1e-11)
    qdd_back = forward_dynamics(tello, q, qd, tau)
    np.testing.assert_allclose(qdd_back, qdd, atol=1e-8)


def test_gravity_torque_is_potential_gradient(tello):
    q = _q(tello, 3)
    ts = TreeState(tello, q)
    g, _ = ts.rnea(np.zeros(tello.dof), np.zeros(tello.dof))
    h = 1e-6
    grad = np.array([(potential_energy(tello, q + h * e) - potential_energy(tello, q - h * e)) / (2 * h)
                     for e in np.eye(tello.dof)])
    np.testing.assert_allclose(g, grad, atol=1e-7)


def test_external_force_maps_through_jacobian(tello):
    from legkit.spatial import point_jacobian
    q = _q(tello, 4)
    ts = TreeState(tello, q)
    bi = tello.body_index["ankle_link"]
    f = np.array([3.0, -1.0, 20.0])
    x = ts.ps[bi]
    zero = np.zeros(tello.dof)
    base, _ = ts.rnea(zero, zero)
    loaded, _ = ts.rnea(zero, zero, f_ext={bi: point_wrench(x, f)})
    np.testing.assert_allclose(base - loaded, point_jacobian(tello, q, "ankle_link").T @ f, atol=1e-12)


def test_locked_joints_hold(tello):
    rng = np.random.default_rng(5)
    q = _q(tello, 5)
    qd = rng.normal(size=tello.dof)
    qd[0] = 0.0
    qdd = forward_dynamics(tello, q, qd, np.zeros(tello.dof), locked=[0])
    assert qdd[0] == 0.0


def test_energy_drift_zero_torque_no_gravity(tello):
    # slider rig, no contact, no gravity, zero torque: kinetic energy is conserved
    rig = jump_rig(tello)
    q = np.zeros(rig.dof)
    q[rig.q_index["hfe"]] = -0.5
    q[rig.q_index["knee"]] = 1.0
    qd = np.zeros(rig.dof)
    qd[rig.q_index["hfe"]] = 2.0
    qd[rig.q_index["knee"]] = -3.0
    qd[rig.q_index["ankle"]] = 1.5
    qd[rig.q_index["slider"]] = 0.4
    e0 = kinetic_energy(rig, q, qd)
    zero = np.zeros(rig.dof)
    worst = 0.0
    for _ in range(10_000):
        q, qd = euler_step(rig, q, qd, zero, 1e-4, 0.0)
        worst = max(worst, abs(kinetic_energy(rig, q, qd) - e0))
    assert worst < 1e-3 * e0


def _swing(model, q, qd, dt, steps, gravity, locked=()):
    def energy(q, qd):
        return kinetic_energy(model, q, qd) + potential_energy(model, q, gravity)

    e0 = energy(q, qd)
    zero = np.zeros(model.dof)
    worst = 0.0
    for _ in range(steps):
        q, qd = euler_step(model, q, qd, zero, dt, gravity, locked)
        worst = max(worst, abs(energy(q, qd) - e0))
    return e0, worst


def test_energy_drift_rig_with_gravity(tello):
    # rig held at stance height, contact off, zero torque: the leg swings freely.
    # Energy is measured from the floor, as for the jump.
    rig = jump_rig(tello)
    s = rig.q_index["slider"]
    q = np.zeros(rig.dof)
    q[s] = 0.4
    q[rig.q_index["haa"]] = 0.3
    q[rig.q_index["hfe"]] = -0.9
    q[rig.q_index["knee"]] = 0.6
    e0, worst = _swing(rig, q, np.zeros(rig.dof), 1e-4, 10_000, 9.81, locked=[s])
    assert worst < 1e-3 * e0


def test_energy_error_is_first_order(tello):
    # semi-implicit Euler: the energy error shrinks linearly with the step
    q = np.zeros(tello.dof)
    q[tello.q_index["hfe"]] = -0.9
    q[tello.q_index["knee"]] = 0.6
    errs = [_swing(tello, q, np.zeros(tello.dof), dt, int(round(0.2 / dt)), 9.81)[1]
            for dt in (2e-4, 1e-4)]
    assert errs[1] == pytest.approx(0.5 * errs[0], rel=0.05)


def test_floating_state_zero_momentum(tello):
    q = _q(tello, 6)
    qd = np.random.default_rng(6).normal(size=tello.dof)
    st = floating_state(tello, q, qd)
    w, v = st.base_velocity(tello)
    L, hG = system_momentum(tello, q, qd, (st.R, st.p), (w, v))
    np.testing.assert_allclose(L, 0.0, atol=1e-12)
    np.testing.assert_allclose(hG, 0.0, atol=1e-12)


def test_floating_step_keeps_momentum(tello):
    rng = np.random.default_rng(7)
    q = _q(tello, 7)
    qd = rng.normal(size=tello.dof)
    st = floating_state(tello, q, qd, root_twist=[0.3, -0.2, 0.5, 0.1, 0.0, -0.2])

    def hg(st):
        w, v = st.base_velocity(tello)
        return centroidal_momentum(tello, st.q, st.qd, (st.R, st.p), (w, v))

    h0 = hg(st)
    c0 = st.tree(tello).total_com()
    L0 = st.momentum[3:].copy()
    for k in range(500):
        tau = 0.5 * np.sin(0.01 * k + np.arange(tello.dof))
        st = floating_step(tello, st, tau, 1e-3)
    assert np.linalg.norm(hg(st) - h0) < 1e-6 * (1 + np.linalg.norm(h0))
    # free com drifts in a straight line with the linear momentum
    np.testing.assert_allclose(st.tree(tello).total_com(), c0 + 0.5 * L0 / tello.total_mass,
                               atol=1e-9)
